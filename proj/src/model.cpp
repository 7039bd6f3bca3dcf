#include "slcnn/model.hpp"

#include <limits>

namespace slcnn {

std::string task_name(Task task) {
    return task == Task::single_label ? "single-label" : "multi-label";
}

Task parse_task(const std::string& name) {
    if (name == "single-label") return Task::single_label;
    if (name == "multi-label") return Task::multi_label;
    throw ValueError("unknown task '" + name + "' (expect single-label or multi-label)");
}

std::string ModelSpec::name() const {
    return std::to_string(m) + "^" + std::to_string(n);
}

void ModelSpec::validate() const {
    if (m < 2 || m > 5) {
        throw ValueError("model spec: downsampling factor m must be in [2,5], got " +
                         std::to_string(m));
    }
    if (n < 1) throw ValueError("model spec: block count n must be >= 1, got " + std::to_string(n));
    if (channels < 1) throw ValueError("model spec: channels must be >= 1");
    if (num_outputs < 1) throw ValueError("model spec: num_outputs must be >= 1");
}

std::pair<int, int> parse_scale_name(const std::string& name) {
    const size_t caret = name.find('^');
    if (caret == std::string::npos || caret == 0 || caret + 1 >= name.size()) {
        throw ValueError("bad scale name '" + name + "' (expect m^n, e.g. 3^9)");
    }
    auto parse_int = [&name](const std::string& part) {
        if (part.empty()) throw ValueError("bad scale name '" + name + "'");
        int value = 0;
        for (char ch : part) {
            if (ch < '0' || ch > '9') {
                throw ValueError("bad scale name '" + name + "' (expect m^n, e.g. 3^9)");
            }
            value = value * 10 + (ch - '0');
            if (value > 1000000) throw ValueError("bad scale name '" + name + "' (too large)");
        }
        return value;
    };
    return {parse_int(name.substr(0, caret)), parse_int(name.substr(caret + 1))};
}

long input_length(const ModelSpec& spec) {
    spec.validate();
    long len = 1;
    for (int i = 0; i < spec.n + 1; ++i) {
        if (len > std::numeric_limits<long>::max() / spec.m) {
            throw ValueError("input_length: m^(n+1) overflows for " + spec.name());
        }
        len *= spec.m;
    }
    return len;
}

long model_param_count(const ModelSpec& spec) {
    const long c = spec.channels, m = spec.m, k = spec.num_outputs;
    const long front = c * 1 * m + c;  // conv w + b
    const long bn = 2 * c;             // gamma + beta
    const long block = c * c * m + c + bn;
    const long head = k * c * 1 + k;
    return front + bn + spec.n * block + head;
}

long model_state_count(const ModelSpec& spec) {
    // each of the n+1 batchnorms also stores running mean and var
    return model_param_count(spec) + (spec.n + 1) * 2 * spec.channels;
}

} // namespace slcnn

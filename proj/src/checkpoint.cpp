#include "slcnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace slcnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

bool Container::has(const std::string& key) const {
    for (const auto& [k, v] : kv) {
        if (k == key) return true;
    }
    return false;
}

std::string Container::get(const std::string& key) const {
    for (const auto& [k, v] : kv) {
        if (k == key) return v;
    }
    throw CheckpointError(CheckpointError::Kind::malformed, "checkpoint: missing key '" + key + "'");
}

long Container::get_long(const std::string& key) const {
    const std::string v = get(key);
    try {
        size_t pos = 0;
        const long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw CheckpointError(CheckpointError::Kind::malformed,
                              "checkpoint: key '" + key + "' has non-numeric value '" + v + "'");
    }
}

const ContainerEntry* Container::find_entry(const std::string& name) const {
    for (const auto& e : entries) {
        if (e.name == name) return &e;
    }
    return nullptr;
}

Tensor<float> Container::tensor(const std::string& name) const {
    const ContainerEntry* e = find_entry(name);
    if (!e) {
        throw CheckpointError(CheckpointError::Kind::malformed,
                              "checkpoint: missing tensor '" + name + "'");
    }
    Tensor<float> out(e->d0, e->d1, e->d2);
    std::memcpy(out.data(), data.data() + e->offset / sizeof(float),
                static_cast<size_t>(e->size()) * sizeof(float));
    return out;
}

void save_container(const std::filesystem::path& path,
                    const std::vector<std::pair<std::string, std::string>>& kv,
                    const std::vector<std::pair<std::string, const Tensor<float>*>>& tensors) {
    std::ostringstream header;
    header << "version=" << kCheckpointVersion << "\n";
    for (const auto& [k, v] : kv) header << k << "=" << v << "\n";

    uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        header << "tensor\t" << name << "\t" << t->batch() << "\t" << t->channels() << "\t"
               << t->time() << "\t" << offset << "\n";
        offset += static_cast<uint64_t>(t->size()) * sizeof(float);
    }
    const std::string head = header.str();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + path.string() + "' for writing");
    out.write(kCheckpointMagic, 8);
    const uint32_t hlen = static_cast<uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, t] : tensors) {
        out.write(reinterpret_cast<const char*>(t->data()),
                  static_cast<std::streamsize>(t->size() * sizeof(float)));
    }
    if (!out) throw IoError("checkpoint: write to '" + path.string() + "' failed");
}

Container load_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path.string() + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12) {
        throw CheckpointError(CheckpointError::Kind::truncated,
                              "checkpoint: file is only " + std::to_string(bytes.size()) +
                                  " bytes, too short for magic + header length");
    }
    if (std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
        throw CheckpointError(CheckpointError::Kind::bad_magic,
                              "checkpoint: bad magic in '" + path.string() + "'");
    }
    uint32_t hlen = 0;
    std::memcpy(&hlen, bytes.data() + 8, 4);
    if (bytes.size() < 12 + static_cast<size_t>(hlen)) {
        throw CheckpointError(CheckpointError::Kind::truncated,
                              "checkpoint: header claims " + std::to_string(hlen) +
                                  " bytes but file ends early");
    }
    const std::string head(bytes.data() + 12, bytes.data() + 12 + hlen);

    Container c;
    uint64_t total_bytes = 0;
    std::istringstream hs(head);
    std::string line;
    while (std::getline(hs, line)) {
        if (line.empty()) continue;
        if (line.rfind("tensor\t", 0) == 0) {
            std::istringstream ls(line);
            std::string tag;
            ContainerEntry e;
            if (!(std::getline(ls, tag, '\t') && std::getline(ls, e.name, '\t'))) {
                throw CheckpointError(CheckpointError::Kind::malformed,
                                      "checkpoint: bad tensor line '" + line + "'");
            }
            std::string d0, d1, d2, off;
            if (!(std::getline(ls, d0, '\t') && std::getline(ls, d1, '\t') &&
                  std::getline(ls, d2, '\t') && std::getline(ls, off, '\t'))) {
                throw CheckpointError(CheckpointError::Kind::malformed,
                                      "checkpoint: bad tensor line '" + line + "'");
            }
            try {
                e.d0 = std::stol(d0);
                e.d1 = std::stol(d1);
                e.d2 = std::stol(d2);
                e.offset = std::stoull(off);
            } catch (const std::exception&) {
                throw CheckpointError(CheckpointError::Kind::malformed,
                                      "checkpoint: bad tensor line '" + line + "'");
            }
            if (e.d0 < 1 || e.d1 < 1 || e.d2 < 1 || e.offset != total_bytes) {
                throw CheckpointError(CheckpointError::Kind::malformed,
                                      "checkpoint: inconsistent tensor table at '" + e.name + "'");
            }
            total_bytes += static_cast<uint64_t>(e.size()) * sizeof(float);
            c.entries.push_back(std::move(e));
        } else {
            const size_t eq = line.find('=');
            if (eq == std::string::npos) {
                throw CheckpointError(CheckpointError::Kind::malformed,
                                      "checkpoint: bad header line '" + line + "'");
            }
            c.kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
        }
    }

    if (!c.has("version")) {
        throw CheckpointError(CheckpointError::Kind::malformed, "checkpoint: header lacks version");
    }
    if (c.get_long("version") != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::bad_version,
                              "checkpoint: format version " + c.get("version") +
                                  " not supported (expect " +
                                  std::to_string(kCheckpointVersion) + ")");
    }

    const uint64_t expect = 12 + static_cast<uint64_t>(hlen) + total_bytes;
    if (bytes.size() != expect) {
        throw CheckpointError(CheckpointError::Kind::truncated,
                              "checkpoint: expected " + std::to_string(expect) + " bytes, file has " +
                                  std::to_string(bytes.size()));
    }

    c.data.resize(static_cast<size_t>(total_bytes / sizeof(float)));
    std::memcpy(c.data.data(), bytes.data() + 12 + hlen, static_cast<size_t>(total_bytes));
    return c;
}

void save_checkpoint(Model<float>& model, const std::filesystem::path& path, long sample_rate) {
    const ModelSpec& spec = model.spec();
    std::vector<std::pair<std::string, std::string>> kv = {
        {"kind", "dcnn"},
        {"m", std::to_string(spec.m)},
        {"n", std::to_string(spec.n)},
        {"channels", std::to_string(spec.channels)},
        {"num_outputs", std::to_string(spec.num_outputs)},
        {"task", task_name(spec.task)},
        {"sample_rate", std::to_string(sample_rate)},
    };
    std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
    for (auto& [name, t] : model.named_state()) tensors.emplace_back(name, t);
    save_container(path, kv, tensors);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
    const Container c = load_container(path);
    if (c.get("kind") != "dcnn") {
        throw CheckpointError(CheckpointError::Kind::malformed,
                              "checkpoint: kind '" + c.get("kind") + "' is not a dcnn checkpoint");
    }
    ModelSpec spec;
    spec.m = static_cast<int>(c.get_long("m"));
    spec.n = static_cast<int>(c.get_long("n"));
    spec.channels = c.get_long("channels");
    spec.num_outputs = c.get_long("num_outputs");
    spec.task = parse_task(c.get("task"));

    LoadedModel out;
    out.sample_rate = c.get_long("sample_rate");
    out.model.assign_spec(spec);
    for (auto& [name, t] : out.model.named_state()) {
        Tensor<float> loaded = c.tensor(name);
        if (!loaded.same_shape(*t)) {
            throw CheckpointError(CheckpointError::Kind::malformed,
                                  "checkpoint: tensor '" + name + "' has shape " +
                                      loaded.shape_str() + ", expected " + t->shape_str());
        }
        *t = std::move(loaded);
    }
    return out;
}

} // namespace slcnn

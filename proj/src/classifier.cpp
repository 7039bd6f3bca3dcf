#include "slcnn/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "slcnn/checkpoint.hpp"

namespace slcnn {

void ClassifierSpec::validate() const {
    if (input_dim < 1) throw ConfigError("classifier spec: input_dim must be >= 1");
    if (num_outputs < 1) throw ConfigError("classifier spec: num_outputs must be >= 1");
    for (long w : hidden) {
        if (w < 1) throw ConfigError("classifier spec: hidden widths must be >= 1");
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("classifier spec: dropout must be in [0, 1)");
    }
}

Classifier Classifier::build(const ClassifierSpec& spec, uint64_t seed) {
    spec.validate();
    Classifier clf;
    clf.spec_ = spec;
    Rng rng(seed);

    long in_dim = spec.input_dim;
    std::vector<long> outs = spec.hidden;
    outs.push_back(spec.num_outputs);
    for (long out_dim : outs) {
        Param<float> w(out_dim, in_dim, 1);
        const double stddev = std::sqrt(2.0 / static_cast<double>(in_dim));
        for (long i = 0; i < w.value.size(); ++i) {
            w.value.flat(i) = static_cast<float>(rng.normal(0.0, stddev));
        }
        clf.ws_.push_back(std::move(w));
        clf.bs_.emplace_back(1, out_dim, 1);
        in_dim = out_dim;
    }
    // identity transform until a fit is stored
    clf.standardizer_.mean.assign(static_cast<size_t>(spec.input_dim), 0.0f);
    clf.standardizer_.stdev.assign(static_cast<size_t>(spec.input_dim), 1.0f);
    return clf;
}

Tensor<float> Classifier::run(const Tensor<float>& x, Mode mode, Rng* dropout_rng, Tape* tape) {
    if (x.channels() != spec_.input_dim || x.time() != 1) {
        throw ShapeError("classifier: input " + x.shape_str() + " does not match spec dim " +
                         std::to_string(spec_.input_dim));
    }
    if (tape) *tape = Tape{};

    Tensor<float> h = x;
    const size_t layers = ws_.size();
    for (size_t li = 0; li + 1 < layers; ++li) {
        if (tape) tape->dense_in.push_back(h);
        h = dense_forward(h, ws_[li].value, bs_[li].value);
        if (tape) tape->relu_in.push_back(h);
        h = relu_forward(h);
        if (mode == Mode::train && spec_.dropout > 0.0) {
            const float keep_scale = 1.0f / static_cast<float>(1.0 - spec_.dropout);
            Tensor<float> mask(h.batch(), h.channels(), h.time());
            for (long i = 0; i < mask.size(); ++i) {
                mask.flat(i) = (dropout_rng->uniform01() < spec_.dropout) ? 0.0f : keep_scale;
            }
            for (long i = 0; i < h.size(); ++i) h.flat(i) *= mask.flat(i);
            if (tape) tape->dropout_mask.push_back(std::move(mask));
        } else if (tape) {
            Tensor<float> mask(h.batch(), h.channels(), h.time());
            mask.fill(1.0f);
            tape->dropout_mask.push_back(std::move(mask));
        }
    }
    if (tape) tape->dense_in.push_back(h);
    h = dense_forward(h, ws_.back().value, bs_.back().value);
    Tensor<float> probs =
        spec_.task == Task::multi_label ? sigmoid_forward(h) : softmax_forward(h);
    if (tape) tape->probs = probs;
    return probs;
}

Tensor<float> Classifier::forward_train(const Tensor<float>& x, Rng& dropout_rng, Tape& tape) {
    return run(x, Mode::train, &dropout_rng, &tape);
}

Tensor<float> Classifier::forward_infer(const Tensor<float>& x) {
    return run(x, Mode::infer, nullptr, nullptr);
}

void Classifier::backward(const Tape& tape, const Tensor<float>& dprobs) {
    Tensor<float> grad = spec_.task == Task::multi_label ? sigmoid_backward(tape.probs, dprobs)
                                                         : softmax_backward(tape.probs, dprobs);
    const size_t layers = ws_.size();
    grad = dense_backward(tape.dense_in.back(), ws_.back().value, grad, ws_.back().grad,
                          bs_.back().grad);
    for (size_t li = layers - 1; li-- > 0;) {
        const Tensor<float>& mask = tape.dropout_mask[li];
        for (long i = 0; i < grad.size(); ++i) grad.flat(i) *= mask.flat(i);
        grad = relu_backward(tape.relu_in[li], grad);
        grad = dense_backward(tape.dense_in[li], ws_[li].value, grad, ws_[li].grad, bs_[li].grad);
    }
}

std::vector<float> Classifier::predict(const std::vector<float>& raw_feature) {
    const std::vector<float> z = standardizer_.apply(raw_feature);
    Tensor<float> x(1, static_cast<long>(z.size()), 1);
    std::copy(z.begin(), z.end(), x.row(0, 0));
    Tensor<float> probs = forward_infer(x);
    std::vector<float> out(static_cast<size_t>(probs.channels()));
    for (long k = 0; k < probs.channels(); ++k) out[static_cast<size_t>(k)] = probs.at(0, k, 0);
    return out;
}

std::vector<Param<float>*> Classifier::params() {
    std::vector<Param<float>*> out;
    for (size_t i = 0; i < ws_.size(); ++i) {
        out.push_back(&ws_[i]);
        out.push_back(&bs_[i]);
    }
    return out;
}

void Classifier::zero_grads() {
    for (Param<float>* p : params()) p->zero_grad();
}

std::vector<std::pair<std::string, Tensor<float>*>> Classifier::named_state() {
    std::vector<std::pair<std::string, Tensor<float>*>> out;
    for (size_t i = 0; i < ws_.size(); ++i) {
        out.emplace_back("layer" + std::to_string(i) + ".w", &ws_[i].value);
        out.emplace_back("layer" + std::to_string(i) + ".b", &bs_[i].value);
    }
    return out;
}

void Classifier::save(const std::filesystem::path& path) const {
    std::string hidden;
    for (size_t i = 0; i < spec_.hidden.size(); ++i) {
        if (i) hidden += ",";
        hidden += std::to_string(spec_.hidden[i]);
    }
    std::vector<std::pair<std::string, std::string>> kv = {
        {"kind", "classifier"},
        {"input_dim", std::to_string(spec_.input_dim)},
        {"hidden", hidden},
        {"dropout", std::to_string(spec_.dropout)},
        {"num_outputs", std::to_string(spec_.num_outputs)},
        {"task", task_name(spec_.task)},
    };

    const long dim = spec_.input_dim;
    Tensor<float> mean(1, dim, 1), stdev(1, dim, 1);
    for (long d = 0; d < dim; ++d) {
        mean.at(0, d, 0) = standardizer_.mean[static_cast<size_t>(d)];
        stdev.at(0, d, 0) = standardizer_.stdev[static_cast<size_t>(d)];
    }

    std::vector<std::pair<std::string, const Tensor<float>*>> tensors;
    for (size_t i = 0; i < ws_.size(); ++i) {
        tensors.emplace_back("layer" + std::to_string(i) + ".w", &ws_[i].value);
        tensors.emplace_back("layer" + std::to_string(i) + ".b", &bs_[i].value);
    }
    tensors.emplace_back("standardizer.mean", &mean);
    tensors.emplace_back("standardizer.std", &stdev);
    save_container(path, kv, tensors);
}

Classifier Classifier::load(const std::filesystem::path& path) {
    const Container c = load_container(path);
    if (c.get("kind") != "classifier") {
        throw CheckpointError(CheckpointError::Kind::malformed,
                              "checkpoint: kind '" + c.get("kind") +
                                  "' is not a classifier checkpoint");
    }
    ClassifierSpec spec;
    spec.input_dim = c.get_long("input_dim");
    spec.num_outputs = c.get_long("num_outputs");
    spec.dropout = std::stod(c.get("dropout"));
    spec.task = parse_task(c.get("task"));
    spec.hidden.clear();
    const std::string hidden = c.get("hidden");
    std::string cur;
    for (char ch : hidden) {
        if (ch == ',') {
            if (!cur.empty()) spec.hidden.push_back(std::stol(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) spec.hidden.push_back(std::stol(cur));

    Classifier clf = build(spec, 0);
    for (auto& [name, t] : clf.named_state()) {
        Tensor<float> loaded = c.tensor(name);
        if (!loaded.same_shape(*t)) {
            throw CheckpointError(CheckpointError::Kind::malformed,
                                  "checkpoint: tensor '" + name + "' has shape " +
                                      loaded.shape_str() + ", expected " + t->shape_str());
        }
        *t = std::move(loaded);
    }
    const Tensor<float> mean = c.tensor("standardizer.mean");
    const Tensor<float> stdev = c.tensor("standardizer.std");
    for (long d = 0; d < spec.input_dim; ++d) {
        clf.standardizer_.mean[static_cast<size_t>(d)] = mean.at(0, d, 0);
        clf.standardizer_.stdev[static_cast<size_t>(d)] = stdev.at(0, d, 0);
    }
    return clf;
}

namespace {

struct SongTargets {
    std::vector<long> single;        // per song
    std::vector<float> multi;        // songs x labels
    long num_labels = 0;
    Task task = Task::single_label;
};

SongTargets lookup_targets(const std::vector<SongFeature>& features,
                           const DatasetManifest& manifest) {
    std::unordered_map<std::string, const ManifestRow*> by_id;
    for (const ManifestRow& row : manifest.rows) by_id[row.clip_id] = &row;

    SongTargets t;
    t.task = manifest.task;
    t.num_labels = static_cast<long>(manifest.labels.size());
    for (const SongFeature& f : features) {
        const auto it = by_id.find(f.song_id);
        if (it == by_id.end()) {
            throw ConfigError("train_classifier: song '" + f.song_id + "' not in manifest");
        }
        if (manifest.task == Task::single_label) {
            t.single.push_back(it->second->label_ids.front());
        } else {
            const std::vector<float> hot = manifest.multi_hot(*it->second);
            t.multi.insert(t.multi.end(), hot.begin(), hot.end());
        }
    }
    return t;
}

Tensor<float> to_tensor(const std::vector<SongFeature>& features, const std::vector<long>& order,
                        long from, long count) {
    const long dim = static_cast<long>(features.front().vec.size());
    Tensor<float> out(count, dim, 1);
    for (long i = 0; i < count; ++i) {
        const SongFeature& f = features[static_cast<size_t>(order[static_cast<size_t>(from + i)])];
        std::copy(f.vec.begin(), f.vec.end(), out.row(i, 0));
    }
    return out;
}

double classifier_loss(Classifier& clf, const std::vector<SongFeature>& features,
                       const SongTargets& targets, long batch_size) {
    const long n = static_cast<long>(features.size());
    std::vector<long> order(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    double loss_sum = 0.0;
    for (long from = 0; from < n; from += batch_size) {
        const long count = std::min(batch_size, n - from);
        Tensor<float> x = to_tensor(features, order, from, count);
        Tensor<float> probs = clf.forward_infer(x);
        if (targets.task == Task::multi_label) {
            Tensor<float> y(count, targets.num_labels, 1);
            for (long i = 0; i < count; ++i) {
                const size_t base = static_cast<size_t>(order[static_cast<size_t>(from + i)]) *
                                    targets.num_labels;
                for (long k = 0; k < targets.num_labels; ++k) {
                    y.at(i, k, 0) = targets.multi[base + static_cast<size_t>(k)];
                }
            }
            loss_sum += static_cast<double>(bce_loss<float>(probs, y, nullptr)) * count;
        } else {
            std::vector<long> y(static_cast<size_t>(count));
            for (long i = 0; i < count; ++i) {
                y[static_cast<size_t>(i)] =
                    targets.single[static_cast<size_t>(order[static_cast<size_t>(from + i)])];
            }
            loss_sum += static_cast<double>(ce_loss<float>(probs, y, nullptr)) * count;
        }
    }
    return loss_sum / static_cast<double>(n);
}

} // namespace

ClassifierTrainResult train_classifier(const std::vector<SongFeature>& train_features,
                                       const std::vector<SongFeature>& valid_features,
                                       const DatasetManifest& manifest, ClassifierSpec spec,
                                       const TrainConfig& config) {
    if (train_features.empty() || valid_features.empty()) {
        throw ConfigError("train_classifier: empty train or valid feature set");
    }
    config.validate();

    if (spec.input_dim == 0) spec.input_dim = static_cast<long>(train_features.front().vec.size());
    if (spec.num_outputs == 0) spec.num_outputs = static_cast<long>(manifest.labels.size());
    spec.task = manifest.task;
    spec.validate();
    if (spec.input_dim != static_cast<long>(train_features.front().vec.size())) {
        throw ConfigError("train_classifier: feature dim " +
                          std::to_string(train_features.front().vec.size()) +
                          " does not match classifier input dim " +
                          std::to_string(spec.input_dim));
    }

    const Standardizer standardizer = fit_standardizer(train_features);
    std::vector<SongFeature> train = train_features;
    std::vector<SongFeature> valid = valid_features;
    apply_standardizer(standardizer, train);
    apply_standardizer(standardizer, valid);

    const SongTargets train_targets = lookup_targets(train, manifest);
    const SongTargets valid_targets = lookup_targets(valid, manifest);

    Classifier clf = Classifier::build(spec, config.seed);
    Rng rng(config.seed + 0xd0d0);
    PlateauScheduler sched(config.lr, config.lr_drop_factor, config.patience, config.max_lr_drops);

    const long n = static_cast<long>(train.size());
    std::vector<long> order(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    ClassifierTrainResult result;
    std::vector<Tensor<float>> best_state;
    Standardizer best_std = standardizer;
    auto snapshot = [&]() {
        best_state.clear();
        for (auto& [name, t] : clf.named_state()) best_state.push_back(*t);
    };
    auto restore = [&]() {
        size_t i = 0;
        for (auto& [name, t] : clf.named_state()) *t = best_state[i++];
    };

    std::vector<Param<float>*> params = clf.params();
    Classifier::Tape tape;
    for (long epoch = 0; epoch < config.max_epochs; ++epoch) {
        rng.shuffle(order);

        double train_loss_sum = 0.0;
        for (long from = 0; from < n; from += config.batch_size) {
            const long count = std::min(config.batch_size, n - from);
            Tensor<float> x = to_tensor(train, order, from, count);
            Tensor<float> probs = clf.forward_train(x, rng, tape);

            float loss;
            Tensor<float> dprobs;
            if (train_targets.task == Task::multi_label) {
                Tensor<float> y(count, train_targets.num_labels, 1);
                for (long i = 0; i < count; ++i) {
                    const size_t base = static_cast<size_t>(
                                            order[static_cast<size_t>(from + i)]) *
                                        train_targets.num_labels;
                    for (long k = 0; k < train_targets.num_labels; ++k) {
                        y.at(i, k, 0) = train_targets.multi[base + static_cast<size_t>(k)];
                    }
                }
                loss = bce_loss<float>(probs, y, &dprobs);
            } else {
                std::vector<long> y(static_cast<size_t>(count));
                for (long i = 0; i < count; ++i) {
                    y[static_cast<size_t>(i)] = train_targets.single[static_cast<size_t>(
                        order[static_cast<size_t>(from + i)])];
                }
                loss = ce_loss<float>(probs, y, &dprobs);
            }
            train_loss_sum += static_cast<double>(loss) * count;

            clf.zero_grads();
            clf.backward(tape, dprobs);
            sgd_step<float>(params, static_cast<float>(sched.lr()),
                            static_cast<float>(config.momentum), config.nesterov);
            ++result.log.total_steps;
        }

        const double valid_loss = classifier_loss(clf, valid, valid_targets, config.batch_size);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss_sum / static_cast<double>(n);
        rec.valid_loss = valid_loss;
        rec.lr = sched.lr();
        result.log.epochs.push_back(rec);

        const bool keep_going = sched.observe(valid_loss);
        if (sched.improved()) {
            result.log.best_epoch = epoch;
            result.log.best_valid_loss = valid_loss;
            snapshot();
        }
        if (!keep_going) break;
    }

    if (result.log.best_epoch >= 0) restore();
    clf.set_standardizer(best_std);
    result.classifier = std::move(clf);
    return result;
}

} // namespace slcnn

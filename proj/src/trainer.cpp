#include "slcnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "slcnn/audio.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {

void TrainConfig::validate() const {
    // lr = 0 is allowed so the step-is-identity contract stays testable
    if (lr < 0) throw ConfigError("train config: lr must be >= 0");
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (lr_drop_factor <= 1) throw ConfigError("train config: lr_drop_factor must be > 1");
    if (patience < 1) throw ConfigError("train config: patience must be >= 1");
    if (max_lr_drops < 0) throw ConfigError("train config: max_lr_drops must be >= 0");
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
    if (precision != 32 && precision != 64) {
        throw ConfigError("train config: precision must be 32 or 64");
    }
    if (max_segments_per_clip < 0) {
        throw ConfigError("train config: max_segments_per_clip must be >= 0");
    }
}

std::string TrainLog::serialize() const {
    std::ostringstream out;
    for (const EpochRecord& r : epochs) {
        char line[128];
        std::snprintf(line, sizeof(line), "%ld\t%.9g\t%.9g\t%.9g\n", r.epoch, r.train_loss,
                      r.valid_loss, r.lr);
        out << line;
    }
    return out.str();
}

void TrainLog::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("train log: cannot write '" + path.string() + "'");
    out << serialize();
}

SegmentPool build_segment_pool(const DatasetManifest& manifest, Split split, long segment_length,
                               long sample_rate, long max_segments_per_clip) {
    const std::vector<const ManifestRow*> rows = manifest.rows_for(split);
    if (rows.empty()) {
        throw ConfigError("segment pool: split '" + split_name(split) + "' is empty");
    }

    SegmentPool pool;
    pool.segment_length = segment_length;
    pool.num_labels = static_cast<long>(manifest.labels.size());
    pool.task = manifest.task;

    // first pass: decode and collect, per clip
    std::vector<Tensor<float>> clip_segments;
    std::vector<long> clip_counts;
    long total = 0;
    for (const ManifestRow* row : rows) {
        WaveClip clip = decode_wav(manifest.resolve_path(*row));
        clip = resample(clip, sample_rate);
        SegmentBatch batch = segment(clip, segment_length);
        long count = batch.data.batch();
        if (max_segments_per_clip > 0 && count > max_segments_per_clip) {
            // evenly spaced subset, deterministic
            Tensor<float> keep(max_segments_per_clip, 1, segment_length);
            for (long i = 0; i < max_segments_per_clip; ++i) {
                const long src = i * count / max_segments_per_clip;
                std::copy(batch.data.row(src, 0), batch.data.row(src, 0) + segment_length,
                          keep.row(i, 0));
            }
            batch.data = std::move(keep);
            count = max_segments_per_clip;
        }
        clip_segments.push_back(std::move(batch.data));
        clip_counts.push_back(count);
        total += count;
    }

    pool.data = Tensor<float>(total, 1, segment_length);
    pool.clip_index.resize(static_cast<size_t>(total));
    if (manifest.task == Task::single_label) {
        pool.single_labels.resize(static_cast<size_t>(total));
    } else {
        pool.multi_targets.assign(static_cast<size_t>(total) * pool.num_labels, 0.0f);
    }

    long at = 0;
    for (size_t ci = 0; ci < clip_segments.size(); ++ci) {
        const ManifestRow* row = rows[ci];
        const std::vector<float> hot = manifest.multi_hot(*row);
        for (long s = 0; s < clip_counts[ci]; ++s, ++at) {
            std::copy(clip_segments[ci].row(s, 0), clip_segments[ci].row(s, 0) + segment_length,
                      pool.data.row(at, 0));
            pool.clip_index[static_cast<size_t>(at)] = static_cast<long>(ci);
            if (manifest.task == Task::single_label) {
                pool.single_labels[static_cast<size_t>(at)] = row->label_ids.front();
            } else {
                std::copy(hot.begin(), hot.end(),
                          pool.multi_targets.begin() + static_cast<size_t>(at) * pool.num_labels);
            }
        }
    }
    return pool;
}

namespace {

template <typename T>
Tensor<T> gather_segments(const SegmentPool& pool, const std::vector<long>& order, long from,
                          long count) {
    Tensor<T> out(count, 1, pool.segment_length);
    for (long i = 0; i < count; ++i) {
        const float* src = pool.data.row(order[static_cast<size_t>(from + i)], 0);
        T* dst = out.row(i, 0);
        for (long t = 0; t < pool.segment_length; ++t) dst[t] = static_cast<T>(src[t]);
    }
    return out;
}

template <typename T>
Tensor<T> gather_multi_targets(const SegmentPool& pool, const std::vector<long>& order, long from,
                               long count) {
    Tensor<T> out(count, pool.num_labels, 1);
    for (long i = 0; i < count; ++i) {
        const size_t base = static_cast<size_t>(order[static_cast<size_t>(from + i)]) *
                            pool.num_labels;
        for (long k = 0; k < pool.num_labels; ++k) {
            out.at(i, k, 0) = static_cast<T>(pool.multi_targets[base + static_cast<size_t>(k)]);
        }
    }
    return out;
}

std::vector<long> gather_single_labels(const SegmentPool& pool, const std::vector<long>& order,
                                       long from, long count) {
    std::vector<long> out(static_cast<size_t>(count));
    for (long i = 0; i < count; ++i) {
        out[static_cast<size_t>(i)] = pool.single_labels[static_cast<size_t>(
            order[static_cast<size_t>(from + i)])];
    }
    return out;
}

// loss over one pool in infer mode, plus the cheap segment metric
template <typename T>
SegmentEval eval_pool(Model<T>& model, const SegmentPool& pool, long batch_size) {
    const long n = pool.data.batch();
    std::vector<long> order(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    double loss_sum = 0.0;
    double hits = 0.0, hit_total = 0.0;
    for (long from = 0; from < n; from += batch_size) {
        const long count = std::min(batch_size, n - from);
        Tensor<T> x = gather_segments<T>(pool, order, from, count);
        Tensor<T> probs = model.forward(x, Mode::infer);
        if (pool.task == Task::multi_label) {
            Tensor<T> y = gather_multi_targets<T>(pool, order, from, count);
            loss_sum += static_cast<double>(bce_loss<T>(probs, y, nullptr)) * count;
            for (long i = 0; i < count; ++i) {
                for (long k = 0; k < pool.num_labels; ++k) {
                    const bool pred = probs.at(i, k, 0) > T(0.5);
                    const bool truth = y.at(i, k, 0) > T(0.5);
                    hits += (pred == truth) ? 1.0 : 0.0;
                    hit_total += 1.0;
                }
            }
        } else {
            std::vector<long> y = gather_single_labels(pool, order, from, count);
            loss_sum += static_cast<double>(ce_loss<T>(probs, y, nullptr)) * count;
            for (long i = 0; i < count; ++i) {
                long best = 0;
                for (long k = 1; k < pool.num_labels; ++k) {
                    if (probs.at(i, k, 0) > probs.at(i, best, 0)) best = k;
                }
                hits += (best == y[static_cast<size_t>(i)]) ? 1.0 : 0.0;
                hit_total += 1.0;
            }
        }
    }
    SegmentEval out;
    out.loss = loss_sum / static_cast<double>(n);
    out.metric = hit_total > 0 ? hits / hit_total : 0.0;
    out.segments = n;
    return out;
}

template <typename T>
TrainResult train_loop(const ModelSpec& spec, const SegmentPool& train_pool,
                       const SegmentPool& valid_pool, const TrainConfig& config) {
    const auto t0 = std::chrono::steady_clock::now();

    Model<T> model = Model<T>::build(spec, config.seed);
    Rng rng(config.seed + 0x5eed); // shuffle stream, distinct from init
    PlateauScheduler sched(config.lr, config.lr_drop_factor, config.patience, config.max_lr_drops);

    const long n = train_pool.data.batch();
    std::vector<long> order(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    TrainResult result;
    std::vector<Tensor<T>> best_state;
    auto snapshot = [&]() {
        best_state.clear();
        for (auto& [name, t] : model.named_state()) best_state.push_back(*t);
    };
    auto restore = [&]() {
        size_t i = 0;
        for (auto& [name, t] : model.named_state()) *t = best_state[i++];
    };

    std::vector<Param<T>*> params = model.params();
    ModelTape<T> tape;
    for (long epoch = 0; epoch < config.max_epochs; ++epoch) {
        rng.shuffle(order); // every training segment appears exactly once per epoch

        double train_loss_sum = 0.0;
        for (long from = 0; from < n; from += config.batch_size) {
            const long count = std::min(config.batch_size, n - from);
            Tensor<T> x = gather_segments<T>(train_pool, order, from, count);
            Tensor<T> probs = model.forward_train(x, tape);

            T loss;
            Tensor<T> dprobs;
            if (train_pool.task == Task::multi_label) {
                Tensor<T> y = gather_multi_targets<T>(train_pool, order, from, count);
                loss = bce_loss<T>(probs, y, &dprobs);
            } else {
                std::vector<long> y = gather_single_labels(train_pool, order, from, count);
                loss = ce_loss<T>(probs, y, &dprobs);
            }
            train_loss_sum += static_cast<double>(loss) * count;

            model.zero_grads();
            model.backward(tape, dprobs);
            sgd_step<T>(params, static_cast<T>(sched.lr()), static_cast<T>(config.momentum),
                        config.nesterov);
            ++result.log.total_steps;
        }

        const SegmentEval valid = eval_pool<T>(model, valid_pool, config.batch_size);

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss_sum / static_cast<double>(n);
        rec.valid_loss = valid.loss;
        rec.lr = sched.lr();
        result.log.epochs.push_back(rec);

        const bool keep_going = sched.observe(valid.loss);
        if (sched.improved()) {
            result.log.best_epoch = epoch;
            result.log.best_valid_loss = valid.loss;
            snapshot();
        }
        if (!keep_going) break;
    }

    if (result.log.best_epoch >= 0) restore();
    result.model = model.template cast<float>();
    result.log.wall_clock_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace

TrainResult train_dcnn(const ModelSpec& spec, const DatasetManifest& manifest,
                       const TrainConfig& config, long sample_rate) {
    spec.validate();
    config.validate();
    manifest.validate();
    manifest.require_splits({Split::train, Split::valid});
    if (spec.num_outputs != static_cast<long>(manifest.labels.size())) {
        throw ConfigError("train_dcnn: model has " + std::to_string(spec.num_outputs) +
                          " outputs but manifest vocabulary has " +
                          std::to_string(manifest.labels.size()));
    }
    if ((spec.task == Task::single_label) != (manifest.task == Task::single_label)) {
        throw ConfigError("train_dcnn: model task " + task_name(spec.task) +
                          " does not match manifest task " + task_name(manifest.task));
    }

    const long W = input_length(spec);
    // decode errors surface here, before any training step runs
    const SegmentPool train_pool =
        build_segment_pool(manifest, Split::train, W, sample_rate, config.max_segments_per_clip);
    const SegmentPool valid_pool =
        build_segment_pool(manifest, Split::valid, W, sample_rate, config.max_segments_per_clip);

    if (config.precision == 64) {
        return train_loop<double>(spec, train_pool, valid_pool, config);
    }
    return train_loop<float>(spec, train_pool, valid_pool, config);
}

SegmentEval evaluate_segments(Model<float>& model, const DatasetManifest& manifest, Split split,
                              long sample_rate) {
    manifest.validate();
    const long W = input_length(model.spec());
    const SegmentPool pool = build_segment_pool(manifest, split, W, sample_rate, 0);
    return eval_pool<float>(model, pool, 64);
}

} // namespace slcnn

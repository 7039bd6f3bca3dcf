#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "slcnn/audio.hpp"
#include "slcnn/manifest.hpp"
#include "slcnn/model.hpp"

namespace slcnn {

struct TrainConfig {
    double lr = 0.01;
    double momentum = 0.9;
    bool nesterov = true;
    long batch_size = 23;       // segments per step
    double lr_drop_factor = 5;  // lr /= factor on plateau
    long patience = 3;          // epochs without improvement before a drop
    long max_lr_drops = 2;      // stop once a further drop would be needed
    long max_epochs = 50;
    uint64_t seed = 0;
    int precision = 32; // 32 | 64; 64 exists for verification runs
    // 0 = train on every segment. Otherwise each clip contributes at most
    // this many segments, picked evenly across the clip, which keeps
    // desk-scale epochs short. Extraction always sees every segment.
    long max_segments_per_clip = 0;

    void validate() const;
};

struct EpochRecord {
    long epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double lr = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    long total_steps = 0;
    long best_epoch = -1;
    double best_valid_loss = 0.0;
    double wall_clock_sec = 0.0; // not serialized; artifact files stay byte-stable
    std::string checkpoint_path;

    // One tab-separated record per epoch: epoch, train_loss, valid_loss, lr.
    std::string serialize() const;
    void save(const std::filesystem::path& path) const;
};

struct TrainResult {
    Model<float> model; // parameters of the best-validation epoch
    TrainLog log;
};

// Mini-batch supervised training on segment-level labels inherited from
// songs. Deterministic for a fixed seed: init, shuffling and batch
// composition all come from TrainConfig::seed.
TrainResult train_dcnn(const ModelSpec& spec, const DatasetManifest& manifest,
                       const TrainConfig& config, long sample_rate = kPipelineRate);

struct SegmentEval {
    double loss = 0.0;
    // single-label: argmax accuracy; multi-label: per-label accuracy at 0.5.
    double metric = 0.0;
    long segments = 0;
};

// Segment-level loss over one split, iterated in manifest order, infer mode.
SegmentEval evaluate_segments(Model<float>& model, const DatasetManifest& manifest, Split split,
                              long sample_rate = kPipelineRate);

// Plateau-driven lr schedule shared by the DCNN trainer and the song
// classifier: divide lr by `factor` after `patience` epochs without
// improvement, stop after `max_drops` drops (or on max_epochs elsewhere).
class PlateauScheduler {
public:
    PlateauScheduler(double lr, double factor, long patience, long max_drops)
        : lr_(lr), factor_(factor), patience_(patience), max_drops_(max_drops) {}

    double lr() const { return lr_; }
    bool improved() const { return improved_; }

    // Feed one epoch's validation loss; returns false when training should stop.
    bool observe(double valid_loss) {
        improved_ = valid_loss < best_ ;
        if (improved_) {
            best_ = valid_loss;
            stale_ = 0;
            return true;
        }
        if (++stale_ < patience_) return true;
        if (drops_ >= max_drops_) return false;
        lr_ /= factor_;
        ++drops_;
        stale_ = 0;
        return true;
    }

private:
    double lr_;
    double factor_;
    long patience_;
    long max_drops_;
    double best_ = std::numeric_limits<double>::infinity();
    long stale_ = 0;
    long drops_ = 0;
    bool improved_ = false;
};

// Internal: materialized segment pool for one split. Exposed because the
// tests exercise the shuffling and label-inheritance contracts directly.
struct SegmentPool {
    long segment_length = 0;
    long num_labels = 0;
    Task task = Task::single_label;
    Tensor<float> data;               // (segments x 1 x W)
    std::vector<long> clip_index;     // row -> clip ordinal in the split
    std::vector<long> single_labels;  // per segment, single-label task
    std::vector<float> multi_targets; // (segments x num_labels), multi-label task
};

SegmentPool build_segment_pool(const DatasetManifest& manifest, Split split, long segment_length,
                               long sample_rate, long max_segments_per_clip);

} // namespace slcnn

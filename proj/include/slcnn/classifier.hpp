#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slcnn/aggregate.hpp"
#include "slcnn/manifest.hpp"
#include "slcnn/rng.hpp"
#include "slcnn/trainer.hpp"

namespace slcnn {

struct ClassifierSpec {
    long input_dim = 0;              // 0 = take from the training features
    std::vector<long> hidden{512};   // empty list degenerates to logistic regression
    double dropout = 0.5;
    long num_outputs = 0;            // 0 = take from the manifest vocabulary
    Task task = Task::single_label;

    void validate() const;
};

// Fully-connected song classifier: dense -> relu -> dropout per hidden
// layer, then a dense head with sigmoid (multi-label) or softmax
// (single-label). Dropout is inverted (scaled at train time), so inference
// is a pure forward pass. The fitted feature standardizer travels with the
// classifier so predict() consumes raw aggregated features.
class Classifier {
public:
    Classifier() = default;

    static Classifier build(const ClassifierSpec& spec, uint64_t seed);

    const ClassifierSpec& spec() const { return spec_; }
    const Standardizer& standardizer() const { return standardizer_; }
    void set_standardizer(Standardizer s) { standardizer_ = std::move(s); }

    struct Tape {
        std::vector<Tensor<float>> dense_in;
        std::vector<Tensor<float>> relu_in;
        std::vector<Tensor<float>> dropout_mask; // keep ? 1/(1-p) : 0
        Tensor<float> probs;
    };

    Tensor<float> forward_train(const Tensor<float>& x, Rng& dropout_rng, Tape& tape);
    Tensor<float> forward_infer(const Tensor<float>& x);
    void backward(const Tape& tape, const Tensor<float>& dprobs);

    // Standardizes with the stored transform, then runs inference.
    std::vector<float> predict(const std::vector<float>& raw_feature);

    std::vector<Param<float>*> params();
    void zero_grads();
    std::vector<std::pair<std::string, Tensor<float>*>> named_state();

    void save(const std::filesystem::path& path) const;
    static Classifier load(const std::filesystem::path& path);

private:
    Tensor<float> run(const Tensor<float>& x, Mode mode, Rng* dropout_rng, Tape* tape);

    ClassifierSpec spec_;
    std::vector<Param<float>> ws_; // (out, in, 1) per layer, hidden then head
    std::vector<Param<float>> bs_;
    Standardizer standardizer_;
};

struct ClassifierTrainResult {
    Classifier classifier;
    TrainLog log;
};

// Trains on raw (unstandardized) song features; labels come from the
// manifest rows matching each feature's song id. Fits the standardizer on
// the train split and stores it inside the classifier. Same optimizer and
// plateau contract as the DCNN trainer.
ClassifierTrainResult train_classifier(const std::vector<SongFeature>& train_features,
                                       const std::vector<SongFeature>& valid_features,
                                       const DatasetManifest& manifest, ClassifierSpec spec,
                                       const TrainConfig& config);

} // namespace slcnn

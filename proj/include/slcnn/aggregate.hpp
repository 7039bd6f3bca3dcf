#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "slcnn/audio.hpp"
#include "slcnn/manifest.hpp"
#include "slcnn/model.hpp"

namespace slcnn {

// One (scale, level) block inside a concatenated song vector.
struct FeatureBlock {
    std::string scale;
    int level = 0;
    long offset = 0;
    long length = 0;
};

// Song-level vector: per-scale (canonical list order), levels -3, -2, -1.
struct SongFeature {
    std::string song_id;
    std::vector<float> vec;
    std::vector<FeatureBlock> layout;
};

// Per-segment features: for each requested level, the tapped (channels x
// time) activation averaged over time to a channels-vector. Inference mode;
// the model's running statistics are read, never written.
// Result: level -> one vector per segment, in batch order.
std::map<int, std::vector<std::vector<float>>> extract_level_features(
    Model<float>& model, const SegmentBatch& batch, const std::vector<int>& levels);

// Arithmetic mean over segments, summed sequentially in segment-offset
// order so the result is a pure function of the segment multiset.
std::map<int, std::vector<float>> aggregate_song(
    const std::map<int, std::vector<std::vector<float>>>& per_segment,
    const std::vector<long>& offsets);

using ScaleLevelKey = std::pair<std::string, int>;

// Concatenation in canonical order with a layout descriptor. Throws if a
// requested (scale, level) block is missing.
SongFeature concat_scales(const std::string& song_id,
                          const std::map<ScaleLevelKey, std::vector<float>>& song_vectors,
                          const std::vector<std::string>& scales, const std::vector<int>& levels);

// Keep only the blocks matching the given scales and levels, offsets
// recomputed. Used for level/scale ablations over already-extracted files.
SongFeature subset_feature(const SongFeature& feature, const std::vector<std::string>& scales,
                           const std::vector<int>& levels);

// Per-dimension z-scoring fit on the train split, std floored at 1e-8.
struct Standardizer {
    std::vector<float> mean;
    std::vector<float> stdev; // floored

    std::vector<float> apply(const std::vector<float>& x) const;
};

Standardizer fit_standardizer(const std::vector<SongFeature>& train);
void apply_standardizer(const Standardizer& s, std::vector<SongFeature>& features);

// Feature file: '#SLFEAT1 dim=<D> blocks=<scale:level:offset:len,...>'
// header then one `<song_id>\t<floats>` line per song. Floats are printed
// with enough digits to round-trip binary32 exactly.
void write_feature_file(const std::filesystem::path& path,
                        const std::vector<SongFeature>& features);
std::vector<SongFeature> read_feature_file(const std::filesystem::path& path);

// Full extraction for every clip of a split: decode + resample once, then
// per scale segment/tap/average, concatenated in scale order.
std::vector<SongFeature> extract_split_features(
    const DatasetManifest& manifest, Split split,
    std::vector<std::pair<std::string, Model<float>*>>& models, // (scale, model), canonical order
    const std::vector<int>& levels, long sample_rate = kPipelineRate);

} // namespace slcnn

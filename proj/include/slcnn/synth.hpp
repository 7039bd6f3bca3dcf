#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slcnn/manifest.hpp"

namespace slcnn {

// Desk-scale corpus generator. Three timbre families with disjoint texture:
//   tone   - sine with a few harmonics, fundamental in [600, 1200] Hz
//   square - band-limited odd-harmonic stack, fundamental in [90, 180] Hz
//   noise  - white noise
// Fundamentals are randomized inside the family band, clips run 3-5 s.
// Writes a single-label corpus (one family per clip) and a multi-label
// variant (presence of each family in a mix), both with stratified
// 60/20/20 train/valid/test splits.
struct SynthConfig {
    std::filesystem::path out_dir;
    int classes = 3; // 2 or 3 leading families
    int clips_per_class = 40;
    uint64_t seed = 1;
    long sample_rate = 22050;
    double min_duration_sec = 3.0;
    double max_duration_sec = 5.0;
};

struct SynthResult {
    std::filesystem::path single_manifest;
    std::filesystem::path multi_manifest;
    long wav_count_single = 0;
    long wav_count_multi = 0;
};

SynthResult make_synthetic(const SynthConfig& config);

} // namespace slcnn

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slcnn/tensor.hpp"

namespace slcnn {

inline constexpr long kPipelineRate = 22050;

// Decoded mono audio. samples live in [-1, 1].
struct WaveClip {
    std::string id;
    long sample_rate = 0;
    std::vector<float> samples;
};

// Fixed-length excerpts cut from one clip: (segments x 1 x segment_length).
struct SegmentBatch {
    long segment_length = 0;
    Tensor<float> data;
    std::string clip_id;
    std::vector<long> offsets; // sample offset of each segment in the clip
};

// RIFF/WAVE reader for PCM 16-bit and IEEE float 32-bit, 1-2 channels.
// Stereo is averaged to mono; 16-bit samples are scaled by 1/32768.
// The clip id is the file stem.
WaveClip decode_wav(const std::filesystem::path& path);

// Writers used by the synthetic-corpus generator and the tests.
// Samples are interleaved when channels == 2 and clamped to [-1, 1].
void write_wav_pcm16(const std::filesystem::path& path, const std::vector<float>& samples,
                     long sample_rate, int channels = 1);
void write_wav_float32(const std::filesystem::path& path, const std::vector<float>& samples,
                       long sample_rate, int channels = 1);

// Linear-interpolation resampling; pass-through (bitwise) when the rates
// already match.
WaveClip resample(const WaveClip& clip, long target_rate);

// Non-overlapping windows with hop = segment_length; a trailing remainder
// shorter than a window is dropped. A clip shorter than one window yields
// exactly one right-zero-padded segment.
SegmentBatch segment(const WaveClip& clip, long segment_length);

} // namespace slcnn

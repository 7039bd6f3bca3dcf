#include "slcnn/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace slcnn {

namespace {

uint32_t read_u32(const std::vector<char>& b, size_t at) {
    uint32_t v = 0;
    std::memcpy(&v, b.data() + at, 4);
    return v;
}

uint16_t read_u16(const std::vector<char>& b, size_t at) {
    uint16_t v = 0;
    std::memcpy(&v, b.data() + at, 2);
    return v;
}

void write_bytes(std::ofstream& out, const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ofstream& out, uint32_t v) { write_bytes(out, &v, 4); }
void write_u16(std::ofstream& out, uint16_t v) { write_bytes(out, &v, 2); }

struct FmtChunk {
    uint16_t codec = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits = 0;
};

void write_wav(const std::filesystem::path& path, const std::vector<float>& samples,
               long sample_rate, int channels, bool as_float) {
    if (channels < 1 || channels > 2) throw ValueError("write_wav: 1 or 2 channels only");
    if (samples.size() % static_cast<size_t>(channels) != 0) {
        throw ValueError("write_wav: sample count not a multiple of channel count");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_wav: cannot open '" + path.string() + "'");

    const uint16_t bytes_per = as_float ? 4 : 2;
    const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * bytes_per);
    const uint16_t block_align = static_cast<uint16_t>(bytes_per * channels);

    write_bytes(out, "RIFF", 4);
    write_u32(out, 36 + data_bytes);
    write_bytes(out, "WAVE", 4);
    write_bytes(out, "fmt ", 4);
    write_u32(out, 16);
    write_u16(out, as_float ? 3 : 1);
    write_u16(out, static_cast<uint16_t>(channels));
    write_u32(out, static_cast<uint32_t>(sample_rate));
    write_u32(out, static_cast<uint32_t>(sample_rate * block_align));
    write_u16(out, block_align);
    write_u16(out, static_cast<uint16_t>(bytes_per * 8));
    write_bytes(out, "data", 4);
    write_u32(out, data_bytes);

    for (float s : samples) {
        const float c = std::clamp(s, -1.0f, 1.0f);
        if (as_float) {
            write_bytes(out, &c, 4);
        } else {
            const long q = std::lround(static_cast<double>(c) * 32768.0);
            const int16_t i16 = static_cast<int16_t>(std::clamp<long>(q, -32768, 32767));
            write_bytes(out, &i16, 2);
        }
    }
    if (!out) throw IoError("write_wav: write to '" + path.string() + "' failed");
}

} // namespace

void write_wav_pcm16(const std::filesystem::path& path, const std::vector<float>& samples,
                     long sample_rate, int channels) {
    write_wav(path, samples, sample_rate, channels, false);
}

void write_wav_float32(const std::filesystem::path& path, const std::vector<float>& samples,
                       long sample_rate, int channels) {
    write_wav(path, samples, sample_rate, channels, true);
}

WaveClip decode_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("decode_wav: cannot open '" + path.string() + "'");
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0) {
        throw WavError(WavError::Kind::not_riff, "decode_wav: '" + path.string() + "' is not RIFF");
    }
    if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw WavError(WavError::Kind::not_riff,
                       "decode_wav: '" + path.string() + "' is RIFF but not WAVE");
    }

    FmtChunk fmt;
    bool have_fmt = false;
    size_t data_at = 0, data_len = 0;
    bool have_data = false;

    size_t at = 12;
    while (at + 8 <= bytes.size()) {
        char id[5] = {0};
        std::memcpy(id, bytes.data() + at, 4);
        const uint32_t len = read_u32(bytes, at + 4);
        const size_t payload = at + 8;
        if (payload + len > bytes.size()) {
            throw WavError(WavError::Kind::truncated,
                           "decode_wav: chunk '" + std::string(id) + "' of " + std::to_string(len) +
                               " bytes runs past end of file");
        }
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) {
                throw WavError(WavError::Kind::truncated, "decode_wav: fmt chunk too short");
            }
            fmt.codec = read_u16(bytes, payload);
            fmt.channels = read_u16(bytes, payload + 2);
            fmt.sample_rate = read_u32(bytes, payload + 4);
            fmt.bits = read_u16(bytes, payload + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_at = payload;
            data_len = len;
            have_data = true;
        }
        at = payload + len + (len % 2); // chunks are word-aligned
    }

    if (!have_fmt) throw WavError(WavError::Kind::missing_chunk, "decode_wav: no fmt chunk");
    if (!have_data) throw WavError(WavError::Kind::missing_chunk, "decode_wav: no data chunk");
    if (fmt.codec != 1 && fmt.codec != 3) {
        throw WavError(WavError::Kind::unsupported_codec,
                       "decode_wav: codec " + std::to_string(fmt.codec) +
                           " unsupported (PCM=1 or IEEE float=3 only)");
    }
    if (fmt.channels < 1 || fmt.channels > 2) {
        throw WavError(WavError::Kind::unsupported_channels,
                       "decode_wav: " + std::to_string(fmt.channels) + " channels unsupported");
    }
    if (fmt.codec == 1 && fmt.bits != 16) {
        throw WavError(WavError::Kind::unsupported_depth,
                       "decode_wav: PCM " + std::to_string(fmt.bits) + "-bit unsupported (16 only)");
    }
    if (fmt.codec == 3 && fmt.bits != 32) {
        throw WavError(WavError::Kind::unsupported_depth,
                       "decode_wav: float " + std::to_string(fmt.bits) +
                           "-bit unsupported (32 only)");
    }

    const size_t bytes_per = fmt.bits / 8;
    const size_t frame_bytes = bytes_per * fmt.channels;
    const size_t frames = data_len / frame_bytes;

    WaveClip clip;
    clip.id = path.stem().string();
    clip.sample_rate = fmt.sample_rate;
    clip.samples.resize(frames);

    for (size_t f = 0; f < frames; ++f) {
        float acc = 0.0f;
        for (uint16_t ch = 0; ch < fmt.channels; ++ch) {
            const size_t p = data_at + f * frame_bytes + ch * bytes_per;
            if (fmt.codec == 1) {
                int16_t raw = 0;
                std::memcpy(&raw, bytes.data() + p, 2);
                acc += static_cast<float>(raw) / 32768.0f;
            } else {
                float raw = 0.0f;
                std::memcpy(&raw, bytes.data() + p, 4);
                acc += std::clamp(raw, -1.0f, 1.0f);
            }
        }
        clip.samples[f] = acc / static_cast<float>(fmt.channels);
    }
    return clip;
}

WaveClip resample(const WaveClip& clip, long target_rate) {
    if (clip.sample_rate <= 0) throw ValueError("resample: source rate must be > 0");
    if (target_rate <= 0) throw ValueError("resample: target rate must be > 0");
    if (clip.sample_rate == target_rate) return clip;

    WaveClip out;
    out.id = clip.id;
    out.sample_rate = target_rate;
    if (clip.samples.empty()) return out;

    const long n = static_cast<long>(clip.samples.size());
    const double ratio = static_cast<double>(clip.sample_rate) / static_cast<double>(target_rate);
    const long out_len =
        std::max<long>(1, static_cast<long>(std::floor(static_cast<double>(n - 1) / ratio)) + 1);
    out.samples.resize(static_cast<size_t>(out_len));
    for (long i = 0; i < out_len; ++i) {
        const double pos = static_cast<double>(i) * ratio;
        long i0 = static_cast<long>(std::floor(pos));
        if (i0 > n - 1) i0 = n - 1;
        const long i1 = std::min(i0 + 1, n - 1);
        const double frac = pos - static_cast<double>(i0);
        out.samples[static_cast<size_t>(i)] = static_cast<float>(
            (1.0 - frac) * clip.samples[static_cast<size_t>(i0)] +
            frac * clip.samples[static_cast<size_t>(i1)]);
    }
    return out;
}

SegmentBatch segment(const WaveClip& clip, long segment_length) {
    if (segment_length < 1) throw ValueError("segment: segment_length must be >= 1");
    if (clip.samples.empty()) throw ValueError("segment: clip '" + clip.id + "' is empty");

    const long n = static_cast<long>(clip.samples.size());
    const long count = std::max<long>(1, n / segment_length);

    SegmentBatch batch;
    batch.segment_length = segment_length;
    batch.clip_id = clip.id;
    batch.data = Tensor<float>(count, 1, segment_length);
    batch.offsets.resize(static_cast<size_t>(count));
    for (long s = 0; s < count; ++s) {
        batch.offsets[static_cast<size_t>(s)] = s * segment_length;
        float* row = batch.data.row(s, 0);
        const long start = s * segment_length;
        const long avail = std::min(segment_length, n - start); // < W only for the padded case
        for (long t = 0; t < avail; ++t) row[t] = clip.samples[static_cast<size_t>(start + t)];
    }
    return batch;
}

} // namespace slcnn

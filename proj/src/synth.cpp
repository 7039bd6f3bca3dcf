#include "slcnn/synth.hpp"

#include <algorithm>
#include <cmath>

#include "slcnn/audio.hpp"
#include "slcnn/rng.hpp"

namespace slcnn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void normalize_peak(std::vector<float>& y, float peak) {
    float mx = 0.0f;
    for (float v : y) mx = std::max(mx, std::fabs(v));
    if (mx <= 0.0f) return;
    const float s = peak / mx;
    for (float& v : y) v *= s;
}

std::vector<float> gen_tone(long n, long rate, Rng& rng) {
    const double f0 = rng.uniform(600.0, 1200.0);
    const double phases[3] = {rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi),
                              rng.uniform(0.0, kTwoPi)};
    const double amps[3] = {1.0, 0.5, 0.25};
    std::vector<float> y(static_cast<size_t>(n), 0.0f);
    for (long t = 0; t < n; ++t) {
        const double tt = static_cast<double>(t) / static_cast<double>(rate);
        double v = 0.0;
        for (int k = 0; k < 3; ++k) {
            v += amps[k] * std::sin(kTwoPi * f0 * (k + 1) * tt + phases[k]);
        }
        y[static_cast<size_t>(t)] = static_cast<float>(v);
    }
    normalize_peak(y, 1.0f);
    return y;
}

std::vector<float> gen_square(long n, long rate, Rng& rng) {
    const double f0 = rng.uniform(90.0, 180.0);
    const double t0 = rng.uniform(0.0, 1.0 / f0); // common shift keeps the square shape
    std::vector<float> y(static_cast<size_t>(n), 0.0f);
    for (long t = 0; t < n; ++t) {
        const double tt = static_cast<double>(t) / static_cast<double>(rate) + t0;
        double v = 0.0;
        for (long k = 1; k * f0 < 10000.0; k += 2) {
            v += std::sin(kTwoPi * f0 * static_cast<double>(k) * tt) / static_cast<double>(k);
        }
        y[static_cast<size_t>(t)] = static_cast<float>(v);
    }
    normalize_peak(y, 1.0f);
    return y;
}

std::vector<float> gen_noise(long n, long /*rate*/, Rng& rng) {
    std::vector<float> y(static_cast<size_t>(n));
    for (long t = 0; t < n; ++t) y[static_cast<size_t>(t)] = static_cast<float>(rng.uniform(-1.0, 1.0));
    return y;
}

std::vector<float> gen_family(int family, long n, long rate, Rng& rng) {
    switch (family) {
        case 0: return gen_tone(n, rate, rng);
        case 1: return gen_square(n, rate, rng);
        default: return gen_noise(n, rate, rng);
    }
}

const char* kFamilyNames[3] = {"tone", "square", "noise"};

Split split_for(long index, long total) {
    // per-group 60/20/20; groups of >= 3 get at least one clip per split
    const long n_train = std::max<long>(1, total * 3 / 5);
    const long n_valid = std::max<long>(1, total / 5);
    if (index < n_train) return Split::train;
    if (index < n_train + n_valid) return Split::valid;
    return Split::test;
}

} // namespace

SynthResult make_synthetic(const SynthConfig& config) {
    if (config.classes < 2 || config.classes > 3) {
        throw ConfigError("make_synthetic: classes must be 2 or 3");
    }
    if (config.clips_per_class < 3) {
        throw ConfigError("make_synthetic: need at least 3 clips per class for the splits");
    }

    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir / "wavs_single");
    fs::create_directories(config.out_dir / "wavs_multi");

    Rng rng(config.seed);
    SynthResult result;

    auto duration_samples = [&rng, &config]() {
        const double dur = rng.uniform(config.min_duration_sec, config.max_duration_sec);
        return static_cast<long>(dur * static_cast<double>(config.sample_rate));
    };

    // single-label corpus: one family per clip
    DatasetManifest single;
    single.task = Task::single_label;
    for (int c = 0; c < config.classes; ++c) single.labels.push_back(kFamilyNames[c]);
    for (int c = 0; c < config.classes; ++c) {
        for (int i = 0; i < config.clips_per_class; ++i) {
            const long n = duration_samples();
            std::vector<float> y = gen_family(c, n, config.sample_rate, rng);
            for (float& v : y) v *= 0.75f;

            char id[64];
            std::snprintf(id, sizeof(id), "s%s%03d", kFamilyNames[c], i);
            const std::string rel = std::string("wavs_single/") + id + ".wav";
            write_wav_pcm16(config.out_dir / rel, y, config.sample_rate);
            ++result.wav_count_single;

            ManifestRow row;
            row.clip_id = id;
            row.path = rel;
            row.split = split_for(i, config.clips_per_class);
            row.label_ids = {c};
            single.rows.push_back(std::move(row));
        }
    }
    result.single_manifest = config.out_dir / "manifest_single.tsv";
    single.validate();
    single.save(result.single_manifest);

    // multi-label variant: mixes cycle through the nonempty family subsets,
    // so every split of a pattern group sees each tag present and absent
    DatasetManifest multi;
    multi.task = Task::multi_label;
    for (int c = 0; c < config.classes; ++c) multi.labels.push_back(kFamilyNames[c]);

    const int patterns = (1 << config.classes) - 1;
    const long total = static_cast<long>(config.classes) * config.clips_per_class;
    std::vector<long> seen_of_pattern(static_cast<size_t>(patterns), 0);
    const long group_size = (total + patterns - 1) / patterns;
    for (long i = 0; i < total; ++i) {
        const int pattern = static_cast<int>(i % patterns) + 1;
        const long n = duration_samples();

        int active = 0;
        for (int c = 0; c < config.classes; ++c) active += (pattern >> c) & 1;
        const float gain = 0.85f / static_cast<float>(active);

        std::vector<float> mix(static_cast<size_t>(n), 0.0f);
        ManifestRow row;
        for (int c = 0; c < config.classes; ++c) {
            if (!((pattern >> c) & 1)) continue;
            const std::vector<float> y = gen_family(c, n, config.sample_rate, rng);
            for (long t = 0; t < n; ++t) mix[static_cast<size_t>(t)] += gain * y[static_cast<size_t>(t)];
            row.label_ids.push_back(c);
        }

        char id[64];
        std::snprintf(id, sizeof(id), "m%03ld_p%d", i, pattern);
        const std::string rel = std::string("wavs_multi/") + id + ".wav";
        write_wav_pcm16(config.out_dir / rel, mix, config.sample_rate);
        ++result.wav_count_multi;

        row.clip_id = id;
        row.path = rel;
        row.split = split_for(seen_of_pattern[static_cast<size_t>(pattern - 1)]++, group_size);
        multi.rows.push_back(std::move(row));
    }
    result.multi_manifest = config.out_dir / "manifest_multi.tsv";
    multi.validate();
    multi.save(result.multi_manifest);

    return result;
}

} // namespace slcnn

#include "slcnn/aggregate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace slcnn {

std::map<int, std::vector<std::vector<float>>> extract_level_features(
    Model<float>& model, const SegmentBatch& batch, const std::vector<int>& levels) {
    const long want = input_length(model.spec());
    if (batch.segment_length != want) {
        throw ShapeError("extract_level_features: segments of length " +
                         std::to_string(batch.segment_length) + " do not fit model " +
                         model.spec().name() + " (needs " + std::to_string(want) + ")");
    }

    const long total = batch.data.batch();
    const long channels = model.spec().channels;
    std::map<int, std::vector<std::vector<float>>> out;
    for (int lvl : levels) out[lvl] = {};

    const long chunk = 64; // bounded forward batches; infer mode is per-sample
    for (long from = 0; from < total; from += chunk) {
        const long count = std::min(chunk, total - from);
        Tensor<float> x(count, 1, want);
        for (long i = 0; i < count; ++i) {
            std::copy(batch.data.row(from + i, 0), batch.data.row(from + i, 0) + want, x.row(i, 0));
        }
        std::map<int, Tensor<float>> taps = model.forward_with_taps(x, levels, Mode::infer);
        for (auto& [lvl, act] : taps) {
            const long tdim = act.time();
            const float inv = 1.0f / static_cast<float>(tdim);
            for (long i = 0; i < count; ++i) {
                std::vector<float> vec(static_cast<size_t>(channels));
                for (long c = 0; c < channels; ++c) {
                    float s = 0.0f;
                    const float* row = act.row(i, c);
                    for (long t = 0; t < tdim; ++t) s += row[t];
                    vec[static_cast<size_t>(c)] = s * inv;
                }
                out[lvl].push_back(std::move(vec));
            }
        }
    }
    return out;
}

std::map<int, std::vector<float>> aggregate_song(
    const std::map<int, std::vector<std::vector<float>>>& per_segment,
    const std::vector<long>& offsets) {
    if (per_segment.empty()) throw ValueError("aggregate_song: no levels given");

    const size_t n = offsets.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&offsets](size_t a, size_t b) { return offsets[a] < offsets[b]; });

    std::map<int, std::vector<float>> out;
    for (const auto& [lvl, rows] : per_segment) {
        if (rows.empty()) throw ValueError("aggregate_song: level " + std::to_string(lvl) +
                                           " has no segments");
        if (rows.size() != n) {
            throw ShapeError("aggregate_song: level " + std::to_string(lvl) + " has " +
                             std::to_string(rows.size()) + " rows for " + std::to_string(n) +
                             " offsets");
        }
        std::vector<float> acc(rows.front().size(), 0.0f);
        for (size_t oi : order) {
            const std::vector<float>& row = rows[oi];
            for (size_t d = 0; d < acc.size(); ++d) acc[d] += row[d];
        }
        const float inv = 1.0f / static_cast<float>(n);
        for (float& v : acc) v *= inv;
        out[lvl] = std::move(acc);
    }
    return out;
}

SongFeature concat_scales(const std::string& song_id,
                          const std::map<ScaleLevelKey, std::vector<float>>& song_vectors,
                          const std::vector<std::string>& scales, const std::vector<int>& levels) {
    std::vector<int> level_order = levels;
    std::sort(level_order.begin(), level_order.end()); // -3, -2, -1

    SongFeature out;
    out.song_id = song_id;
    for (const std::string& scale : scales) {
        for (int lvl : level_order) {
            const auto it = song_vectors.find({scale, lvl});
            if (it == song_vectors.end()) {
                throw ValueError("concat_scales: missing block (scale " + scale + ", level " +
                                 std::to_string(lvl) + ")");
            }
            FeatureBlock block;
            block.scale = scale;
            block.level = lvl;
            block.offset = static_cast<long>(out.vec.size());
            block.length = static_cast<long>(it->second.size());
            out.vec.insert(out.vec.end(), it->second.begin(), it->second.end());
            out.layout.push_back(std::move(block));
        }
    }
    return out;
}

SongFeature subset_feature(const SongFeature& feature, const std::vector<std::string>& scales,
                           const std::vector<int>& levels) {
    std::map<ScaleLevelKey, std::vector<float>> vectors;
    for (const FeatureBlock& block : feature.layout) {
        vectors[{block.scale, block.level}] =
            std::vector<float>(feature.vec.begin() + block.offset,
                               feature.vec.begin() + block.offset + block.length);
    }
    return concat_scales(feature.song_id, vectors, scales, levels);
}

std::vector<float> Standardizer::apply(const std::vector<float>& x) const {
    if (x.size() != mean.size()) {
        throw ShapeError("standardizer: vector of dim " + std::to_string(x.size()) +
                         " vs transform of dim " + std::to_string(mean.size()));
    }
    std::vector<float> out(x.size());
    for (size_t d = 0; d < x.size(); ++d) out[d] = (x[d] - mean[d]) / stdev[d];
    return out;
}

Standardizer fit_standardizer(const std::vector<SongFeature>& train) {
    if (train.size() < 2) throw ValueError("fit_standardizer: need >= 2 training songs");
    const size_t dim = train.front().vec.size();

    Standardizer s;
    s.mean.assign(dim, 0.0f);
    s.stdev.assign(dim, 0.0f);

    std::vector<double> mean(dim, 0.0), sq(dim, 0.0);
    for (const SongFeature& f : train) {
        if (f.vec.size() != dim) {
            throw ShapeError("fit_standardizer: inconsistent feature dims " +
                             std::to_string(f.vec.size()) + " vs " + std::to_string(dim));
        }
        for (size_t d = 0; d < dim; ++d) {
            mean[d] += f.vec[d];
            sq[d] += static_cast<double>(f.vec[d]) * f.vec[d];
        }
    }
    const double inv = 1.0 / static_cast<double>(train.size());
    for (size_t d = 0; d < dim; ++d) {
        mean[d] *= inv;
        double var = sq[d] * inv - mean[d] * mean[d];
        if (var < 0) var = 0;
        s.mean[d] = static_cast<float>(mean[d]);
        s.stdev[d] = static_cast<float>(std::max(std::sqrt(var), 1e-8));
    }
    return s;
}

void apply_standardizer(const Standardizer& s, std::vector<SongFeature>& features) {
    for (SongFeature& f : features) f.vec = s.apply(f.vec);
}

void write_feature_file(const std::filesystem::path& path,
                        const std::vector<SongFeature>& features) {
    if (features.empty()) throw ValueError("write_feature_file: no songs");
    const std::vector<FeatureBlock>& layout = features.front().layout;

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("feature file: cannot write '" + path.string() + "'");

    out << "#SLFEAT1 dim=" << features.front().vec.size() << " blocks=";
    for (size_t i = 0; i < layout.size(); ++i) {
        if (i) out << ",";
        out << layout[i].scale << ":" << layout[i].level << ":" << layout[i].offset << ":"
            << layout[i].length;
    }
    out << "\n";

    char buf[32];
    for (const SongFeature& f : features) {
        if (f.vec.size() != features.front().vec.size()) {
            throw ShapeError("write_feature_file: song '" + f.song_id +
                             "' dim does not match header");
        }
        out << f.song_id;
        for (float v : f.vec) {
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
            out << "\t" << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("feature file: write to '" + path.string() + "' failed");
}

std::vector<SongFeature> read_feature_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("feature file: cannot open '" + path.string() + "'");

    std::string header;
    if (!std::getline(in, header) || header.rfind("#SLFEAT1 ", 0) != 0) {
        throw ConfigError("feature file: '" + path.string() + "' lacks the #SLFEAT1 header");
    }

    long dim = -1;
    std::vector<FeatureBlock> layout;
    std::istringstream hs(header.substr(9));
    std::string tok;
    while (hs >> tok) {
        if (tok.rfind("dim=", 0) == 0) {
            dim = std::stol(tok.substr(4));
        } else if (tok.rfind("blocks=", 0) == 0) {
            std::istringstream bs(tok.substr(7));
            std::string one;
            while (std::getline(bs, one, ',')) {
                FeatureBlock block;
                // scale:level:offset:len — scale itself never contains ':'
                std::istringstream fs(one);
                std::string scale, level, offset, length;
                if (!(std::getline(fs, scale, ':') && std::getline(fs, level, ':') &&
                      std::getline(fs, offset, ':') && std::getline(fs, length, ':'))) {
                    throw ConfigError("feature file: bad block '" + one + "'");
                }
                block.scale = scale;
                block.level = std::stoi(level);
                block.offset = std::stol(offset);
                block.length = std::stol(length);
                layout.push_back(std::move(block));
            }
        } else {
            throw ConfigError("feature file: unknown header token '" + tok + "'");
        }
    }
    if (dim < 1) throw ConfigError("feature file: header lacks dim=");

    std::vector<SongFeature> out;
    std::string line;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        SongFeature f;
        std::istringstream ls(line);
        if (!std::getline(ls, f.song_id, '\t')) {
            throw ConfigError("feature file line " + std::to_string(lineno) + ": no song id");
        }
        std::string field;
        while (std::getline(ls, field, '\t')) {
            f.vec.push_back(std::strtof(field.c_str(), nullptr));
        }
        if (static_cast<long>(f.vec.size()) != dim) {
            throw ConfigError("feature file line " + std::to_string(lineno) + ": " +
                              std::to_string(f.vec.size()) + " values, header says " +
                              std::to_string(dim));
        }
        f.layout = layout;
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<SongFeature> extract_split_features(
    const DatasetManifest& manifest, Split split,
    std::vector<std::pair<std::string, Model<float>*>>& models, const std::vector<int>& levels,
    long sample_rate) {
    std::vector<SongFeature> out;
    for (const ManifestRow* row : manifest.rows_for(split)) {
        WaveClip clip = decode_wav(manifest.resolve_path(*row));
        clip = resample(clip, sample_rate);

        std::map<ScaleLevelKey, std::vector<float>> vectors;
        std::vector<std::string> scale_order;
        for (auto& [scale, model] : models) {
            scale_order.push_back(scale);
            const SegmentBatch batch = segment(clip, input_length(model->spec()));
            const auto per_seg = extract_level_features(*model, batch, levels);
            auto per_level = aggregate_song(per_seg, batch.offsets);
            for (auto& [lvl, vec] : per_level) vectors[{scale, lvl}] = std::move(vec);
        }
        out.push_back(concat_scales(row->clip_id, vectors, scale_order, levels));
    }
    return out;
}

} // namespace slcnn

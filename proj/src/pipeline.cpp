#include "slcnn/pipeline.hpp"

#include <algorithm>

#include "slcnn/checkpoint.hpp"

namespace slcnn {

namespace fs = std::filesystem;

std::filesystem::path train_dcnn_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                       const std::string& scale,
                                       const std::filesystem::path& out_dir) {
    cfg.validate();
    manifest.validate();
    manifest.require_splits({Split::train, Split::valid});

    const auto [m, n] = parse_scale_name(scale);
    ModelSpec spec;
    spec.m = m;
    spec.n = n;
    spec.channels = cfg.channels;
    spec.num_outputs = static_cast<long>(manifest.labels.size());
    spec.task = manifest.task;

    fs::create_directories(out_dir);
    cfg.echo_into(out_dir);

    TrainResult result = train_dcnn(spec, manifest, cfg.dcnn, cfg.sample_rate);
    const fs::path ckpt = out_dir / ("dcnn_" + scale + ".ckpt");
    save_checkpoint(result.model, ckpt, cfg.sample_rate);
    result.log.checkpoint_path = ckpt.string();
    result.log.save(out_dir / ("train_" + scale + ".tsv"));
    return ckpt;
}

std::map<Split, std::filesystem::path> extract_stage(const PipelineConfig& cfg,
                                                     const DatasetManifest& manifest,
                                                     const std::filesystem::path& ckpt_dir,
                                                     const std::filesystem::path& out_dir) {
    cfg.validate();
    manifest.validate();

    std::vector<LoadedModel> loaded;
    std::vector<std::pair<std::string, Model<float>*>> models;
    loaded.reserve(cfg.scales.size());
    for (const std::string& scale : cfg.scales) {
        const fs::path ckpt = ckpt_dir / ("dcnn_" + scale + ".ckpt");
        if (!fs::exists(ckpt)) {
            throw ConfigError("extract: no checkpoint for scale " + scale + " (looked for '" +
                              ckpt.string() + "')");
        }
        loaded.push_back(load_checkpoint(ckpt));
    }
    for (size_t i = 0; i < cfg.scales.size(); ++i) {
        models.emplace_back(cfg.scales[i], &loaded[i].model);
    }

    fs::create_directories(out_dir);
    cfg.echo_into(out_dir);

    std::map<Split, fs::path> out;
    for (Split split : {Split::train, Split::valid, Split::test}) {
        if (manifest.rows_for(split).empty()) continue;
        const std::vector<SongFeature> features =
            extract_split_features(manifest, split, models, cfg.levels, cfg.sample_rate);
        const fs::path file = out_dir / ("features_" + split_name(split) + ".tsv");
        write_feature_file(file, features);
        out[split] = file;
    }
    return out;
}

namespace {

ClassifierSpec classifier_spec_from(const PipelineConfig& cfg, const DatasetManifest& manifest) {
    ClassifierSpec spec;
    spec.input_dim = 0; // inferred from the features
    spec.hidden = cfg.clf_hidden;
    spec.dropout = cfg.clf_dropout;
    spec.num_outputs = static_cast<long>(manifest.labels.size());
    spec.task = manifest.task;
    return spec;
}

std::vector<SongFeature> load_split_features(const std::filesystem::path& feature_dir,
                                             Split split) {
    const fs::path file = feature_dir / ("features_" + split_name(split) + ".tsv");
    if (!fs::exists(file)) {
        throw ConfigError("no feature file for split '" + split_name(split) + "' (looked for '" +
                          file.string() + "')");
    }
    return read_feature_file(file);
}

} // namespace

std::filesystem::path classifier_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                       const std::filesystem::path& feature_dir,
                                       const std::filesystem::path& out_dir) {
    cfg.validate();
    manifest.validate();

    const std::vector<SongFeature> train = load_split_features(feature_dir, Split::train);
    const std::vector<SongFeature> valid = load_split_features(feature_dir, Split::valid);

    fs::create_directories(out_dir);
    cfg.echo_into(out_dir);

    ClassifierTrainResult result =
        train_classifier(train, valid, manifest, classifier_spec_from(cfg, manifest), cfg.clf);
    const fs::path ckpt = out_dir / "classifier.ckpt";
    result.classifier.save(ckpt);
    result.log.checkpoint_path = ckpt.string();
    result.log.save(out_dir / "clf_train.tsv");
    return ckpt;
}

RunOutcome score_test_split(Classifier& clf, const DatasetManifest& manifest,
                            const std::vector<SongFeature>& test_features) {
    if (test_features.empty()) throw ConfigError("score_test_split: no test features");
    std::map<std::string, const ManifestRow*> by_id;
    for (const ManifestRow& row : manifest.rows) by_id[row.clip_id] = &row;

    std::vector<std::vector<float>> scores;
    std::vector<long> single_labels;
    std::vector<std::vector<int>> multi_labels;
    for (const SongFeature& f : test_features) {
        const auto it = by_id.find(f.song_id);
        if (it == by_id.end()) {
            throw ConfigError("score_test_split: song '" + f.song_id + "' not in manifest");
        }
        scores.push_back(clf.predict(f.vec));
        if (manifest.task == Task::single_label) {
            single_labels.push_back(it->second->label_ids.front());
        } else {
            const std::vector<float> hot = manifest.multi_hot(*it->second);
            std::vector<int> row(hot.size());
            for (size_t k = 0; k < hot.size(); ++k) row[k] = hot[k] > 0.5f ? 1 : 0;
            multi_labels.push_back(std::move(row));
        }
    }

    RunOutcome outcome;
    if (manifest.task == Task::single_label) {
        outcome.metric = accuracy(scores, single_labels);
    } else {
        const MacroAucResult macro = macro_auc(scores, multi_labels, manifest.labels);
        outcome.metric = macro.macro;
        outcome.per_tag = macro.per_tag;
        outcome.skipped_tags = macro.skipped;
    }
    return outcome;
}

RunOutcome protocol_run(const PipelineConfig& cfg, const DatasetManifest& manifest,
                        const std::filesystem::path& feature_dir,
                        const std::filesystem::path& work_dir, uint64_t seed, bool retrain_dcnn) {
    PipelineConfig run_cfg = cfg;
    run_cfg.dcnn.seed = seed;
    run_cfg.clf.seed = seed;

    fs::path features = feature_dir;
    if (retrain_dcnn) {
        const fs::path run_dir = work_dir / ("run_" + std::to_string(seed));
        for (const std::string& scale : run_cfg.scales) {
            train_dcnn_stage(run_cfg, manifest, scale, run_dir);
        }
        extract_stage(run_cfg, manifest, run_dir, run_dir);
        features = run_dir;
    }

    const std::vector<SongFeature> train = load_split_features(features, Split::train);
    const std::vector<SongFeature> valid = load_split_features(features, Split::valid);
    const std::vector<SongFeature> test = load_split_features(features, Split::test);

    ClassifierTrainResult result = train_classifier(
        train, valid, manifest, classifier_spec_from(run_cfg, manifest), run_cfg.clf);
    return score_test_split(result.classifier, manifest, test);
}

EvalReport evaluate_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                          const std::filesystem::path& feature_dir,
                          const std::filesystem::path& out_dir) {
    cfg.validate();
    manifest.validate();
    manifest.require_splits({Split::train, Split::valid, Split::test});

    fs::create_directories(out_dir);
    cfg.echo_into(out_dir);

    const uint64_t base_seed = cfg.clf.seed;
    EvalReport report = repeat_runs(
        [&](uint64_t seed) {
            return protocol_run(cfg, manifest, feature_dir, out_dir, seed, cfg.retrain_dcnn);
        },
        cfg.runs, base_seed, manifest.task);
    report.save(out_dir, "report");
    return report;
}

} // namespace slcnn

// slcnn — pipeline driver for sample-level DCNN music classification.
//
// Subcommands cover the full flow: make-synthetic -> train-dcnn (per scale)
// -> extract -> train-classifier -> evaluate, plus export-features for
// level/scale ablations over already-extracted feature files.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage/validation error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "slcnn/checkpoint.hpp"
#include "slcnn/pipeline.hpp"

namespace {

using namespace slcnn;

struct CliArgs {
    std::string config;
    std::string manifest;
    std::string scale;
    std::string scales;
    std::string levels;
    std::string features;
    std::string checkpoints;
    std::string out;
    long runs = -1;
    long long seed = -1;
    bool retrain_dcnn = false;
    int classes = 3;
    int clips_per_class = 40;
    long sample_rate = kPipelineRate;
};

PipelineConfig effective_config(const CliArgs& args) {
    PipelineConfig cfg;
    if (!args.config.empty()) cfg = PipelineConfig::parse_file(args.config);
    if (!args.scale.empty()) cfg.apply_override("scales", args.scale);
    if (!args.scales.empty()) cfg.apply_override("scales", args.scales);
    if (!args.levels.empty()) cfg.apply_override("levels", args.levels);
    if (args.runs >= 0) cfg.runs = args.runs;
    if (args.seed >= 0) {
        cfg.dcnn.seed = static_cast<uint64_t>(args.seed);
        cfg.clf.seed = static_cast<uint64_t>(args.seed);
    }
    if (args.retrain_dcnn) cfg.retrain_dcnn = true;
    cfg.validate();
    return cfg;
}

int dispatch(const CLI::App& app, const CliArgs& args) {
    if (app.got_subcommand("make-synthetic")) {
        SynthConfig sc;
        sc.out_dir = args.out;
        sc.classes = args.classes;
        sc.clips_per_class = args.clips_per_class;
        sc.seed = args.seed >= 0 ? static_cast<uint64_t>(args.seed) : 1;
        sc.sample_rate = args.sample_rate;
        const SynthResult result = make_synthetic(sc);
        std::cout << "wrote " << result.wav_count_single << " single-label and "
                  << result.wav_count_multi << " multi-label clips\n";
        std::cout << "manifest (single-label): " << result.single_manifest.string() << "\n";
        std::cout << "manifest (multi-label):  " << result.multi_manifest.string() << "\n";
        return 0;
    }

    if (app.got_subcommand("export-features")) {
        const std::vector<SongFeature> features = read_feature_file(args.features);
        PipelineConfig cfg; // only used to parse the block selection
        if (!args.scales.empty()) cfg.apply_override("scales", args.scales);
        if (!args.levels.empty()) cfg.apply_override("levels", args.levels);
        std::vector<SongFeature> subset;
        subset.reserve(features.size());
        for (const SongFeature& f : features) {
            subset.push_back(subset_feature(f, cfg.scales, cfg.levels));
        }
        write_feature_file(args.out, subset);
        std::cout << "wrote " << args.out << " (dim " << subset.front().vec.size() << ")\n";
        return 0;
    }

    const PipelineConfig cfg = effective_config(args);
    const DatasetManifest manifest = DatasetManifest::parse_file(args.manifest);

    if (app.got_subcommand("train-dcnn")) {
        if (args.scale.empty()) throw ConfigError("train-dcnn: --scale is required");
        manifest.validate_for_training();
        const auto ckpt = train_dcnn_stage(cfg, manifest, args.scale, args.out);
        std::cout << "wrote " << ckpt.string() << "\n";
        return 0;
    }
    if (app.got_subcommand("extract")) {
        const std::string ckpt_dir = args.checkpoints.empty() ? args.out : args.checkpoints;
        const auto files = extract_stage(cfg, manifest, ckpt_dir, args.out);
        for (const auto& [split, file] : files) {
            std::cout << "wrote " << file.string() << "\n";
        }
        return 0;
    }
    if (app.got_subcommand("train-classifier")) {
        manifest.validate_for_training();
        const std::string feature_dir = args.features.empty() ? args.out : args.features;
        const auto ckpt = classifier_stage(cfg, manifest, feature_dir, args.out);
        std::cout << "wrote " << ckpt.string() << "\n";
        return 0;
    }
    if (app.got_subcommand("evaluate")) {
        const std::string feature_dir = args.features.empty() ? args.out : args.features;
        const EvalReport report = evaluate_stage(cfg, manifest, feature_dir, args.out);
        std::cout << report.table();
        return 0;
    }
    throw ConfigError("no subcommand given");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sample-level DCNN music classification pipeline"};
    app.require_subcommand(1);
    CliArgs args;

    auto add_common = [&args](CLI::App* cmd, bool with_manifest) {
        cmd->add_option("--config", args.config, "pipeline config file (key = value lines)");
        if (with_manifest) {
            cmd->add_option("--manifest", args.manifest, "dataset manifest")->required();
        }
        cmd->add_option("--levels", args.levels, "levels, e.g. -1,-2,-3");
        cmd->add_option("--seed", args.seed, "base seed");
        cmd->add_option("--out", args.out, "output directory")->required();
    };

    CLI::App* train = app.add_subcommand("train-dcnn", "train one m^n DCNN");
    add_common(train, true);
    train->add_option("--scale", args.scale, "scale name, e.g. 3^9")->required();

    CLI::App* extract = app.add_subcommand("extract", "extract multi-level song features");
    add_common(extract, true);
    extract->add_option("--scales", args.scales, "scale list override, e.g. 2^4,3^3");
    extract->add_option("--checkpoints", args.checkpoints,
                        "directory holding dcnn_<scale>.ckpt (default: --out)");

    CLI::App* clf = app.add_subcommand("train-classifier", "train the song-level classifier");
    add_common(clf, true);
    clf->add_option("--features", args.features,
                    "directory holding features_<split>.tsv (default: --out)");

    CLI::App* eval = app.add_subcommand("evaluate", "repeated-run evaluation protocol");
    add_common(eval, true);
    eval->add_option("--features", args.features,
                     "directory holding features_<split>.tsv (default: --out)");
    eval->add_option("--runs", args.runs, "number of repetitions");
    eval->add_flag("--retrain-dcnn", args.retrain_dcnn,
                   "retrain the DCNNs and re-extract per run (full protocol)");

    CLI::App* synth = app.add_subcommand("make-synthetic", "generate the synthetic corpus");
    synth->add_option("--out", args.out, "output directory")->required();
    synth->add_option("--classes", args.classes, "number of timbre families (2 or 3)");
    synth->add_option("--clips-per-class", args.clips_per_class, "clips per family");
    synth->add_option("--seed", args.seed, "corpus seed");
    synth->add_option("--sample-rate", args.sample_rate, "wav sample rate");

    CLI::App* exp = app.add_subcommand("export-features",
                                       "re-emit a feature file with a subset of blocks");
    exp->add_option("--features", args.features, "input feature file")->required();
    exp->add_option("--out", args.out, "output feature file")->required();
    exp->add_option("--scales", args.scales, "scales to keep, e.g. 3^9");
    exp->add_option("--levels", args.levels, "levels to keep, e.g. -1");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        return dispatch(app, args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValueError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

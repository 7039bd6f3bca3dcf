#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "slcnn/classifier.hpp"
#include "slcnn/config.hpp"
#include "slcnn/metrics.hpp"
#include "slcnn/synth.hpp"

namespace slcnn {

// Stage runners behind the CLI subcommands. Each writes its artifacts into
// out_dir with deterministic names and echoes the effective config.

// Trains cfg.dcnn on one scale; writes dcnn_<scale>.ckpt and
// train_<scale>.tsv. Returns the checkpoint path.
std::filesystem::path train_dcnn_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                       const std::string& scale,
                                       const std::filesystem::path& out_dir);

// Loads dcnn_<scale>.ckpt for every configured scale from ckpt_dir and
// writes features_<split>.tsv per split. Missing checkpoints name the scale.
std::map<Split, std::filesystem::path> extract_stage(const PipelineConfig& cfg,
                                                     const DatasetManifest& manifest,
                                                     const std::filesystem::path& ckpt_dir,
                                                     const std::filesystem::path& out_dir);

// Trains the song classifier on features_train/valid.tsv from feature_dir;
// writes classifier.ckpt and clf_train.tsv.
std::filesystem::path classifier_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                                       const std::filesystem::path& feature_dir,
                                       const std::filesystem::path& out_dir);

// Scores the test split of `features` with the classifier: accuracy for
// single-label tasks, macro AUC (plus the per-tag table) for multi-label.
RunOutcome score_test_split(Classifier& clf, const DatasetManifest& manifest,
                            const std::vector<SongFeature>& test_features);

// One repetition of the protocol with everything derived from `seed`.
// retrain_dcnn=false retrains only the classifier stage on the fixed
// features in feature_dir; retrain_dcnn=true reruns DCNN training and
// extraction per seed under work_dir/run_<seed>/.
RunOutcome protocol_run(const PipelineConfig& cfg, const DatasetManifest& manifest,
                        const std::filesystem::path& feature_dir,
                        const std::filesystem::path& work_dir, uint64_t seed, bool retrain_dcnn);

// The repeated-run evaluation protocol; writes report files into out_dir.
EvalReport evaluate_stage(const PipelineConfig& cfg, const DatasetManifest& manifest,
                          const std::filesystem::path& feature_dir,
                          const std::filesystem::path& out_dir);

} // namespace slcnn

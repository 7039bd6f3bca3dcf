#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slcnn/trainer.hpp"

namespace slcnn {

// Flat `key = value` pipeline configuration. Command-line flags override
// file values; the effective config is echoed into every output directory.
struct PipelineConfig {
    long sample_rate = kPipelineRate;
    std::vector<std::string> scales = {"3^9"}; // canonical scale order
    std::vector<int> levels = {-1, -2, -3};
    long channels = 64;

    TrainConfig dcnn;
    TrainConfig clf; // optimizer contract shared with the trainer
    std::vector<long> clf_hidden = {512};
    double clf_dropout = 0.5;

    long runs = 10; // repeated-run evaluation protocol
    bool retrain_dcnn = false;

    PipelineConfig();

    static PipelineConfig parse_file(const std::filesystem::path& path);
    void apply_line(const std::string& line, const std::string& where);
    void apply_override(const std::string& key, const std::string& value);
    std::string serialize() const;
    void validate() const;
    void echo_into(const std::filesystem::path& dir) const;
};

} // namespace slcnn

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "slcnn/model.hpp"

namespace slcnn {

// Fraction of rows whose argmax matches the label; argmax ties break to
// the lowest class index.
double accuracy(const std::vector<std::vector<float>>& scores, const std::vector<long>& labels);

// Probability that a uniformly random positive outranks a random negative,
// ties counted 0.5. Rank-statistic computation, O(n log n). Throws
// UndefinedAucError when only one class is present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct MacroAucResult {
    double macro = 0.0;
    std::vector<std::pair<std::string, double>> per_tag; // evaluable tags only
    std::vector<std::string> skipped;                    // single-class tags
};

// Unweighted mean of per-tag AUC over tags with both classes present.
MacroAucResult macro_auc(const std::vector<std::vector<float>>& scores,
                         const std::vector<std::vector<int>>& labels,
                         const std::vector<std::string>& tags);

// What one repetition of the evaluation protocol reports back.
struct RunOutcome {
    double metric = 0.0;
    std::vector<std::pair<std::string, double>> per_tag; // optional, multi-label
    std::vector<std::string> skipped_tags;
};

struct EvalReport {
    Task task = Task::single_label;
    std::vector<double> run_metrics;
    std::vector<uint64_t> seeds;
    double mean = 0.0;
    double stddev = 0.0; // population
    std::vector<std::pair<std::string, double>> per_tag_mean;
    std::vector<std::string> skipped_tags;

    std::string table() const;         // human-readable summary
    std::string records() const;       // run \t seed \t metric
    std::string per_tag_table() const; // tag \t auc
    void save(const std::filesystem::path& dir, const std::string& stem) const;
};

// Runs the pipeline closure with seeds base .. base+count-1 and reports
// mean +/- population std. A failing run aborts with its seed named.
EvalReport repeat_runs(const std::function<RunOutcome(uint64_t seed)>& run, long count,
                       uint64_t base_seed, Task task = Task::single_label);

} // namespace slcnn

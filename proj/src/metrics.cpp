#include "slcnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace slcnn {

double accuracy(const std::vector<std::vector<float>>& scores, const std::vector<long>& labels) {
    if (scores.empty()) throw ValueError("accuracy: empty input");
    if (scores.size() != labels.size()) {
        throw ShapeError("accuracy: " + std::to_string(scores.size()) + " score rows vs " +
                         std::to_string(labels.size()) + " labels");
    }
    long hits = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        const std::vector<float>& row = scores[i];
        if (row.empty()) throw ValueError("accuracy: empty score row");
        size_t best = 0;
        for (size_t k = 1; k < row.size(); ++k) {
            if (row[k] > row[best]) best = k; // strict > keeps the lowest index on ties
        }
        if (static_cast<long>(best) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ShapeError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    }
    const size_t n = scores.size();
    long pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw ValueError("roc_auc: labels must be 0 or 1");
        pos += y;
    }
    const long neg = static_cast<long>(n) - pos;
    if (pos == 0 || neg == 0) {
        throw UndefinedAucError("roc_auc: needs at least one positive and one negative, got " +
                                std::to_string(pos) + "/" + std::to_string(neg));
    }

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

    // average ranks over tied groups (1-based)
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = static_cast<double>(i + 1 + j + 1) / 2.0;
        for (size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }

    const double p = static_cast<double>(pos);
    return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

MacroAucResult macro_auc(const std::vector<std::vector<float>>& scores,
                         const std::vector<std::vector<int>>& labels,
                         const std::vector<std::string>& tags) {
    if (scores.empty() || scores.size() != labels.size()) {
        throw ShapeError("macro_auc: score/label row mismatch");
    }
    const size_t num_tags = tags.size();

    MacroAucResult out;
    double sum = 0.0;
    for (size_t t = 0; t < num_tags; ++t) {
        std::vector<double> col(scores.size());
        std::vector<int> y(scores.size());
        for (size_t i = 0; i < scores.size(); ++i) {
            if (scores[i].size() != num_tags || labels[i].size() != num_tags) {
                throw ShapeError("macro_auc: row " + std::to_string(i) + " does not have " +
                                 std::to_string(num_tags) + " columns");
            }
            col[i] = scores[i][t];
            y[i] = labels[i][t];
        }
        try {
            const double auc = roc_auc(col, y);
            out.per_tag.emplace_back(tags[t], auc);
            sum += auc;
        } catch (const UndefinedAucError&) {
            out.skipped.push_back(tags[t]);
        }
    }
    if (out.per_tag.empty()) {
        throw UndefinedAucError("macro_auc: no evaluable tags (every tag is single-class)");
    }
    out.macro = sum / static_cast<double>(out.per_tag.size());
    return out;
}

std::string EvalReport::table() const {
    std::ostringstream os;
    os << "task: " << task_name(task) << "\n";
    os << "runs: " << run_metrics.size() << "\n";
    char buf[64];
    for (size_t i = 0; i < run_metrics.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", run_metrics[i]);
        os << "  run " << i << " (seed " << seeds[i] << "): " << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.9g", mean);
    os << "mean: " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.9g", stddev);
    os << "std:  " << buf << "\n";
    if (!skipped_tags.empty()) {
        os << "skipped tags (single-class):";
        for (const std::string& t : skipped_tags) os << " " << t;
        os << "\n";
    }
    return os.str();
}

std::string EvalReport::records() const {
    std::ostringstream os;
    char buf[64];
    for (size_t i = 0; i < run_metrics.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", run_metrics[i]);
        os << i << "\t" << seeds[i] << "\t" << buf << "\n";
    }
    return os.str();
}

std::string EvalReport::per_tag_table() const {
    std::ostringstream os;
    char buf[64];
    for (const auto& [tag, auc] : per_tag_mean) {
        std::snprintf(buf, sizeof(buf), "%.9g", auc);
        os << tag << "\t" << buf << "\n";
    }
    return os.str();
}

void EvalReport::save(const std::filesystem::path& dir, const std::string& stem) const {
    auto write = [&dir](const std::string& name, const std::string& text) {
        const std::filesystem::path p = dir / name;
        std::ofstream out(p, std::ios::trunc);
        if (!out) throw IoError("report: cannot write '" + p.string() + "'");
        out << text;
    };
    write(stem + ".txt", table());
    write(stem + ".tsv", records());
    if (task == Task::multi_label && !per_tag_mean.empty()) {
        write(stem + "_tags.tsv", per_tag_table());
    }
}

EvalReport repeat_runs(const std::function<RunOutcome(uint64_t seed)>& run, long count,
                       uint64_t base_seed, Task task) {
    if (count < 1) throw ValueError("repeat_runs: run count must be >= 1");

    EvalReport report;
    report.task = task;

    std::map<std::string, std::pair<double, long>> tag_acc; // tag -> (sum, n)
    std::vector<std::string> skipped;
    for (long i = 0; i < count; ++i) {
        const uint64_t seed = base_seed + static_cast<uint64_t>(i);
        RunOutcome outcome;
        try {
            outcome = run(seed);
        } catch (const std::exception& e) {
            throw Error("repeat_runs: run with seed " + std::to_string(seed) +
                        " failed: " + e.what());
        }
        report.run_metrics.push_back(outcome.metric);
        report.seeds.push_back(seed);
        for (const auto& [tag, auc] : outcome.per_tag) {
            auto& acc = tag_acc[tag];
            acc.first += auc;
            acc.second += 1;
        }
        for (const std::string& tag : outcome.skipped_tags) {
            if (std::find(skipped.begin(), skipped.end(), tag) == skipped.end()) {
                skipped.push_back(tag);
            }
        }
    }

    const bool all_equal = std::all_of(report.run_metrics.begin(), report.run_metrics.end(),
                                       [&](double m) { return m == report.run_metrics.front(); });
    if (all_equal) {
        report.mean = report.run_metrics.front();
        report.stddev = 0.0;
    } else {
        double sum = 0.0;
        for (double m : report.run_metrics) sum += m;
        report.mean = sum / static_cast<double>(count);
        double sq = 0.0;
        for (double m : report.run_metrics) sq += (m - report.mean) * (m - report.mean);
        report.stddev = std::sqrt(sq / static_cast<double>(count));
    }

    for (const auto& [tag, acc] : tag_acc) {
        report.per_tag_mean.emplace_back(tag, acc.first / static_cast<double>(acc.second));
    }
    report.skipped_tags = std::move(skipped);
    return report;
}

} // namespace slcnn

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "slcnn/model.hpp"

namespace slcnn {

enum class Split { train, valid, test };

std::string split_name(Split split);
Split parse_split(const std::string& name);

struct ManifestRow {
    std::string clip_id;
    std::string path; // relative paths resolve against the manifest directory
    Split split = Split::train;
    std::vector<int> label_ids;
};

// Tab-separated clip table with a '#task=' and a '#labels=' header line.
// Single-label rows carry exactly one label id.
struct DatasetManifest {
    Task task = Task::single_label;
    std::vector<std::string> labels; // ordered tag vocabulary
    std::vector<ManifestRow> rows;
    std::filesystem::path base_dir;

    static DatasetManifest parse_file(const std::filesystem::path& path);
    static DatasetManifest parse_string(const std::string& text);

    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    std::vector<const ManifestRow*> rows_for(Split split) const;
    std::filesystem::path resolve_path(const ManifestRow& row) const;

    // Structural checks: unique clip ids, label ids inside the vocabulary.
    void validate() const;
    // Requires the named splits to be nonempty.
    void require_splits(std::initializer_list<Split> splits) const;
    // CLI training commands insist on every split being populated.
    void validate_for_training() const;

    // Multi-hot target over the vocabulary.
    std::vector<float> multi_hot(const ManifestRow& row) const;
};

} // namespace slcnn

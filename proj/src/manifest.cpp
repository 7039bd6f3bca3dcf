#include "slcnn/manifest.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace slcnn {

std::string split_name(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "valid") return Split::valid;
    if (name == "test") return Split::test;
    throw ValueError("unknown split '" + name + "' (expect train, valid or test)");
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

DatasetManifest DatasetManifest::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("manifest: cannot open '" + path.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    DatasetManifest m = parse_string(buffer.str());
    m.base_dir = path.parent_path();
    return m;
}

DatasetManifest DatasetManifest::parse_string(const std::string& text) {
    DatasetManifest m;
    bool have_task = false, have_labels = false;

    std::istringstream in(text);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("#task=", 0) == 0) {
                m.task = parse_task(line.substr(6));
                have_task = true;
            } else if (line.rfind("#labels=", 0) == 0) {
                m.labels = split_on(line.substr(8), ',');
                have_labels = true;
            } else {
                throw ConfigError("manifest line " + std::to_string(lineno) +
                                  ": unknown header '" + line + "'");
            }
            continue;
        }
        const std::vector<std::string> fields = split_on(line, '\t');
        if (fields.size() != 4) {
            throw ConfigError("manifest line " + std::to_string(lineno) + ": expected 4 fields, got " +
                              std::to_string(fields.size()));
        }
        ManifestRow row;
        row.clip_id = fields[0];
        row.path = fields[1];
        row.split = parse_split(fields[2]);
        if (!fields[3].empty()) {
            for (const std::string& tok : split_on(fields[3], ',')) {
                try {
                    size_t pos = 0;
                    const int id = std::stoi(tok, &pos);
                    if (pos != tok.size()) throw std::invalid_argument(tok);
                    row.label_ids.push_back(id);
                } catch (const std::exception&) {
                    throw ConfigError("manifest line " + std::to_string(lineno) +
                                      ": bad label id '" + tok + "'");
                }
            }
        }
        m.rows.push_back(std::move(row));
    }

    if (!have_task) throw ConfigError("manifest: missing #task= header");
    if (!have_labels) throw ConfigError("manifest: missing #labels= header");
    m.validate();
    return m;
}

std::string DatasetManifest::serialize() const {
    std::ostringstream out;
    out << "#task=" << task_name(task) << "\n";
    out << "#labels=";
    for (size_t i = 0; i < labels.size(); ++i) {
        if (i) out << ",";
        out << labels[i];
    }
    out << "\n";
    for (const ManifestRow& row : rows) {
        out << row.clip_id << "\t" << row.path << "\t" << split_name(row.split) << "\t";
        for (size_t i = 0; i < row.label_ids.size(); ++i) {
            if (i) out << ",";
            out << row.label_ids[i];
        }
        out << "\n";
    }
    return out.str();
}

void DatasetManifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("manifest: cannot write '" + path.string() + "'");
    out << serialize();
}

std::vector<const ManifestRow*> DatasetManifest::rows_for(Split split) const {
    std::vector<const ManifestRow*> out;
    for (const ManifestRow& row : rows) {
        if (row.split == split) out.push_back(&row);
    }
    return out;
}

std::filesystem::path DatasetManifest::resolve_path(const ManifestRow& row) const {
    std::filesystem::path p(row.path);
    if (p.is_absolute() || base_dir.empty()) return p;
    return base_dir / p;
}

void DatasetManifest::validate() const {
    if (labels.empty()) throw ConfigError("manifest: empty label vocabulary");
    std::unordered_set<std::string> seen;
    for (const ManifestRow& row : rows) {
        if (!seen.insert(row.clip_id).second) {
            throw ConfigError("manifest: duplicate clip id '" + row.clip_id + "'");
        }
        for (int id : row.label_ids) {
            if (id < 0 || id >= static_cast<int>(labels.size())) {
                throw ConfigError("manifest: clip '" + row.clip_id + "' has label id " +
                                  std::to_string(id) + " outside vocabulary of " +
                                  std::to_string(labels.size()));
            }
        }
        if (task == Task::single_label && row.label_ids.size() != 1) {
            throw ConfigError("manifest: single-label clip '" + row.clip_id + "' has " +
                              std::to_string(row.label_ids.size()) + " labels");
        }
    }
}

void DatasetManifest::require_splits(std::initializer_list<Split> splits) const {
    for (Split s : splits) {
        if (rows_for(s).empty()) {
            throw ConfigError("manifest: split '" + split_name(s) + "' is empty");
        }
    }
}

void DatasetManifest::validate_for_training() const {
    validate();
    require_splits({Split::train, Split::valid, Split::test});
}

std::vector<float> DatasetManifest::multi_hot(const ManifestRow& row) const {
    std::vector<float> out(labels.size(), 0.0f);
    for (int id : row.label_ids) out[static_cast<size_t>(id)] = 1.0f;
    return out;
}

} // namespace slcnn

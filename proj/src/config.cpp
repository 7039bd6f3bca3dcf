#include "slcnn/config.hpp"

#include <fstream>
#include <sstream>

namespace slcnn {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

long to_long(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs an integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        const double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' needs a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' needs true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : v) {
        if (ch == ',') {
            if (!trim(cur).empty()) out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    return out;
}

bool apply_train_key(TrainConfig& t, const std::string& sub, const std::string& v,
                     const std::string& key) {
    if (sub == "lr") t.lr = to_double(v, key);
    else if (sub == "momentum") t.momentum = to_double(v, key);
    else if (sub == "nesterov") t.nesterov = to_bool(v, key);
    else if (sub == "batch_size") t.batch_size = to_long(v, key);
    else if (sub == "lr_drop_factor") t.lr_drop_factor = to_double(v, key);
    else if (sub == "patience") t.patience = to_long(v, key);
    else if (sub == "max_lr_drops") t.max_lr_drops = to_long(v, key);
    else if (sub == "max_epochs") t.max_epochs = to_long(v, key);
    else if (sub == "seed") t.seed = static_cast<uint64_t>(to_long(v, key));
    else if (sub == "precision") t.precision = static_cast<int>(to_long(v, key));
    else if (sub == "max_segments_per_clip") t.max_segments_per_clip = to_long(v, key);
    else return false;
    return true;
}

} // namespace

PipelineConfig::PipelineConfig() {
    // classifier epochs run on songs, not segments; give the plateau room
    clf.max_epochs = 200;
    clf.patience = 5;
}

PipelineConfig PipelineConfig::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    PipelineConfig cfg;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        cfg.apply_line(line, path.string() + ":" + std::to_string(lineno));
    }
    return cfg;
}

void PipelineConfig::apply_line(const std::string& raw, const std::string& where) {
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) return;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("config " + where + ": expected 'key = value', got '" + line + "'");
    }
    apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

void PipelineConfig::apply_override(const std::string& key, const std::string& value) {
    if (key == "sample_rate") {
        sample_rate = to_long(value, key);
    } else if (key == "scales") {
        scales = split_list(value);
    } else if (key == "levels") {
        levels.clear();
        for (const std::string& tok : split_list(value)) {
            levels.push_back(static_cast<int>(to_long(tok, key)));
        }
    } else if (key == "channels") {
        channels = to_long(value, key);
    } else if (key == "runs") {
        runs = to_long(value, key);
    } else if (key == "retrain_dcnn") {
        retrain_dcnn = to_bool(value, key);
    } else if (key == "clf.hidden") {
        clf_hidden.clear();
        for (const std::string& tok : split_list(value)) {
            clf_hidden.push_back(to_long(tok, key));
        }
    } else if (key == "clf.dropout") {
        clf_dropout = to_double(value, key);
    } else if (key.rfind("dcnn.", 0) == 0) {
        if (!apply_train_key(dcnn, key.substr(5), value, key)) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    } else if (key.rfind("clf.", 0) == 0) {
        if (!apply_train_key(clf, key.substr(4), value, key)) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

std::string PipelineConfig::serialize() const {
    std::ostringstream os;
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    os << "sample_rate = " << sample_rate << "\n";
    os << "scales = ";
    for (size_t i = 0; i < scales.size(); ++i) os << (i ? "," : "") << scales[i];
    os << "\n";
    os << "levels = ";
    for (size_t i = 0; i < levels.size(); ++i) os << (i ? "," : "") << levels[i];
    os << "\n";
    os << "channels = " << channels << "\n";

    auto train_block = [&os, &num](const std::string& prefix, const TrainConfig& t) {
        os << prefix << ".lr = " << num(t.lr) << "\n";
        os << prefix << ".momentum = " << num(t.momentum) << "\n";
        os << prefix << ".nesterov = " << (t.nesterov ? "true" : "false") << "\n";
        os << prefix << ".batch_size = " << t.batch_size << "\n";
        os << prefix << ".lr_drop_factor = " << num(t.lr_drop_factor) << "\n";
        os << prefix << ".patience = " << t.patience << "\n";
        os << prefix << ".max_lr_drops = " << t.max_lr_drops << "\n";
        os << prefix << ".max_epochs = " << t.max_epochs << "\n";
        os << prefix << ".seed = " << t.seed << "\n";
        os << prefix << ".precision = " << t.precision << "\n";
        os << prefix << ".max_segments_per_clip = " << t.max_segments_per_clip << "\n";
    };
    train_block("dcnn", dcnn);
    train_block("clf", clf);

    os << "clf.hidden = ";
    for (size_t i = 0; i < clf_hidden.size(); ++i) os << (i ? "," : "") << clf_hidden[i];
    os << "\n";
    os << "clf.dropout = " << num(clf_dropout) << "\n";
    os << "runs = " << runs << "\n";
    os << "retrain_dcnn = " << (retrain_dcnn ? "true" : "false") << "\n";
    return os.str();
}

void PipelineConfig::validate() const {
    if (sample_rate < 1) throw ConfigError("config: sample_rate must be >= 1");
    if (scales.empty()) throw ConfigError("config: scales list is empty");
    for (const std::string& s : scales) parse_scale_name(s); // throws on bad names
    if (levels.empty()) throw ConfigError("config: levels list is empty");
    for (int lvl : levels) {
        if (lvl < -3 || lvl > -1) {
            throw ConfigError("config: level " + std::to_string(lvl) +
                              " outside {-1,-2,-3}");
        }
    }
    if (channels < 1) throw ConfigError("config: channels must be >= 1");
    if (runs < 1) throw ConfigError("config: runs must be >= 1");
    dcnn.validate();
    clf.validate();
    for (long w : clf_hidden) {
        if (w < 1) throw ConfigError("config: clf.hidden widths must be >= 1");
    }
    if (clf_dropout < 0.0 || clf_dropout >= 1.0) {
        throw ConfigError("config: clf.dropout must be in [0, 1)");
    }
}

void PipelineConfig::echo_into(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    const std::filesystem::path p = dir / "config.effective";
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw IoError("config: cannot write '" + p.string() + "'");
    out << serialize();
}

} // namespace slcnn

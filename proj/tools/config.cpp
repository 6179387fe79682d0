#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace gradguide {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> parts;
    std::string part;
    std::stringstream stream(text);
    while (std::getline(stream, part, ',')) {
        parts.push_back(trim(part));
    }
    return parts;
}

long long to_int(const std::string& key, const std::string& text) {
    std::size_t consumed = 0;
    long long value = 0;
    try {
        value = std::stoll(text, &consumed);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    }
    if (consumed != text.size()) {
        throw ConfigError(key, "expected an integer, got '" + text + "'");
    }
    return value;
}

double to_real(const std::string& key, const std::string& text) {
    std::size_t consumed = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &consumed);
    } catch (const std::exception&) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
    if (consumed != text.size()) {
        throw ConfigError(key, "expected a number, got '" + text + "'");
    }
    return value;
}

bool to_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + text + "'");
}

/// Lookup helper that tracks which keys were consumed.
class KvReader {
public:
    explicit KvReader(const KvMap& kv) : kv_(kv) {}

    bool has(const std::string& key) const { return kv_.count(key) > 0; }

    std::string str(const std::string& key, const std::string& fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return it->second;
    }
    int integer(const std::string& key, int fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return static_cast<int>(to_int(key, it->second));
    }
    double real(const std::string& key, double fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return to_real(key, it->second);
    }
    bool boolean(const std::string& key, bool fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        return to_bool(key, it->second);
    }
    std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
        auto it = kv_.find(key);
        if (it == kv_.end()) return fallback;
        used_.insert(key);
        const long long value = to_int(key, it->second);
        if (value < 0) {
            throw ConfigError(key, "must be nonnegative");
        }
        return static_cast<std::uint64_t>(value);
    }
    void mark_used(const std::string& key) { used_.insert(key); }

    void reject_unknown() const {
        for (const auto& [key, value] : kv_) {
            if (used_.count(key) == 0) {
                throw ConfigError(key, "unknown configuration key");
            }
        }
    }

private:
    const KvMap& kv_;
    std::set<std::string> used_;
};

}  // namespace

KvMap parse_kv_text(const std::string& text) {
    KvMap kv;
    std::stringstream stream(text);
    std::string line;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected key = value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": empty key");
        }
        if (!kv.emplace(key, value).second) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": duplicate key '" + key + "'");
        }
    }
    return kv;
}

KvMap parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_kv_text(buffer.str());
}

void apply_overrides(KvMap& kv, const std::vector<std::string>& overrides) {
    for (const std::string& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw std::runtime_error("override '" + item + "': expected key=value");
        }
        kv[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
    }
}

ExperimentConfig experiment_from_kv(const KvMap& kv) {
    KvReader reader(kv);
    ExperimentConfig cfg;

    const std::string regime = reader.str("sequence.regime", "homogeneous");
    try {
        cfg.sequence.regime = regime_from_string(regime);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("sequence.regime", e.what());
    }
    cfg.sequence.num_tasks = reader.integer("sequence.num_tasks", cfg.sequence.num_tasks);
    cfg.sequence.samples_per_task =
        reader.integer("sequence.samples_per_task", cfg.sequence.samples_per_task);
    cfg.sequence.test_per_task =
        reader.integer("sequence.test_per_task", cfg.sequence.test_per_task);
    cfg.sequence.input_dim = reader.integer("sequence.input_dim", cfg.sequence.input_dim);
    cfg.sequence.classes_per_task =
        reader.integer("sequence.classes_per_task", cfg.sequence.classes_per_task);
    cfg.sequence.shift_magnitude =
        reader.real("sequence.shift_magnitude", cfg.sequence.shift_magnitude);
    cfg.sequence.seed = reader.unsigned64("sequence.seed", cfg.sequence.seed);
    try {
        validate(cfg.sequence);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("sequence", e.what());
    }

    cfg.model.input_dim = cfg.sequence.input_dim;
    cfg.model.num_classes = cfg.sequence.total_classes();
    if (reader.has("model.hidden_dims")) {
        cfg.model.hidden_dims.clear();
        for (const std::string& part : split_list(reader.str("model.hidden_dims", ""))) {
            if (part.empty()) {
                throw ConfigError("model.hidden_dims", "empty list entry");
            }
            cfg.model.hidden_dims.push_back(
                static_cast<int>(to_int("model.hidden_dims", part)));
        }
    }
    cfg.model.adapter_rank = reader.integer("model.adapter_rank", cfg.model.adapter_rank);
    cfg.model.init_std = reader.real("model.init_std", cfg.model.init_std);
    try {
        Model probe(cfg.model);  // full structural validation
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }

    const std::string variant = reader.str("train.variant", "full");
    try {
        cfg.train.variant = variant_from_string(variant);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("train.variant", e.what());
    }
    cfg.train.lr = reader.real("train.lr", cfg.train.lr);
    cfg.train.batch_size = reader.integer("train.batch_size", cfg.train.batch_size);
    cfg.train.epochs_per_task =
        reader.integer("train.epochs_per_task", cfg.train.epochs_per_task);
    cfg.train.replay_capacity =
        reader.integer("train.replay_capacity", cfg.train.replay_capacity);
    cfg.train.guidance.alpha = reader.real("train.alpha", cfg.train.guidance.alpha);
    cfg.train.guidance.scaling_enabled =
        reader.boolean("train.scaling_enabled", cfg.train.guidance.scaling_enabled);
    cfg.train.guidance.gate_enabled =
        reader.boolean("train.gate_enabled", cfg.train.guidance.gate_enabled);

    for (const auto& [key, value] : kv) {
        if (key.rfind("alpha.", 0) != 0) continue;
        reader.mark_used(key);
        const long long task_id = to_int(key, key.substr(6));
        if (task_id < 1 || task_id >= cfg.sequence.num_tasks) {
            throw ConfigError(key, "task id must lie in [1, " +
                                       std::to_string(cfg.sequence.num_tasks - 1) + "]");
        }
        cfg.train.per_task_alpha[static_cast<int>(task_id)] = to_real(key, value);
    }
    try {
        validate(cfg.train);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("train", e.what());
    }

    if (!reader.has("seeds")) {
        throw ConfigError("seeds", "required field is missing");
    }
    for (const std::string& part : split_list(reader.str("seeds", ""))) {
        if (part.empty()) {
            throw ConfigError("seeds", "empty list entry");
        }
        const long long seed = to_int("seeds", part);
        if (seed < 0) {
            throw ConfigError("seeds", "seeds must be nonnegative");
        }
        cfg.seeds.push_back(static_cast<std::uint64_t>(seed));
    }
    if (cfg.seeds.empty()) {
        throw ConfigError("seeds", "at least one seed is required");
    }
    if (std::set<std::uint64_t>(cfg.seeds.begin(), cfg.seeds.end()).size() !=
        cfg.seeds.size()) {
        throw ConfigError("seeds", "seeds must be distinct");
    }

    cfg.output_dir = reader.str("output_dir", "");

    if (reader.has("ablate.alpha_sweep")) {
        cfg.alpha_sweep.clear();
        for (const std::string& part : split_list(reader.str("ablate.alpha_sweep", ""))) {
            if (part.empty()) {
                throw ConfigError("ablate.alpha_sweep", "empty list entry");
            }
            const double alpha = to_real("ablate.alpha_sweep", part);
            if (alpha < 0.0 || alpha > 1.0) {
                throw ConfigError("ablate.alpha_sweep", "alpha values must lie in [0, 1]");
            }
            cfg.alpha_sweep.push_back(alpha);
        }
        if (cfg.alpha_sweep.empty()) {
            throw ConfigError("ablate.alpha_sweep", "at least one alpha is required");
        }
    }

    reader.reject_unknown();
    return cfg;
}

std::string experiment_json(const ExperimentConfig& cfg, std::uint64_t run_seed,
                            std::uint64_t model_seed) {
    nlohmann::json j;
    j["sequence"] = {{"regime", to_string(cfg.sequence.regime)},
                     {"num_tasks", cfg.sequence.num_tasks},
                     {"samples_per_task", cfg.sequence.samples_per_task},
                     {"test_per_task", cfg.sequence.test_per_task},
                     {"input_dim", cfg.sequence.input_dim},
                     {"classes_per_task", cfg.sequence.classes_per_task},
                     {"shift_magnitude", cfg.sequence.shift_magnitude},
                     {"seed", cfg.sequence.seed}};
    j["model"] = {{"input_dim", cfg.model.input_dim},
                  {"hidden_dims", cfg.model.hidden_dims},
                  {"num_classes", cfg.model.num_classes},
                  {"adapter_rank", cfg.model.adapter_rank},
                  {"init_std", cfg.model.init_std},
                  {"seed", model_seed}};
    nlohmann::json per_task = nlohmann::json::object();
    for (const auto& [task_id, alpha] : cfg.train.per_task_alpha) {
        per_task[std::to_string(task_id)] = alpha;
    }
    j["train"] = {{"variant", to_string(cfg.train.variant)},
                  {"lr", cfg.train.lr},
                  {"batch_size", cfg.train.batch_size},
                  {"epochs_per_task", cfg.train.epochs_per_task},
                  {"alpha", cfg.train.guidance.alpha},
                  {"scaling_enabled", cfg.train.guidance.scaling_enabled},
                  {"gate_enabled", cfg.train.guidance.gate_enabled},
                  {"replay_capacity", cfg.train.replay_capacity},
                  {"per_task_alpha", per_task},
                  {"seed", run_seed}};
    return j.dump(2) + "\n";
}

}  // namespace gradguide

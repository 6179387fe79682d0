#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gradguide/tasks.hpp"
#include "gradguide/trainer.hpp"

namespace gradguide {

/// Flat dotted-key -> raw string view of a config file.
using KvMap = std::map<std::string, std::string>;

/// key = value per line, '#' starts a comment, blank lines ignored.
/// Duplicate keys are rejected.
KvMap parse_kv_text(const std::string& text);
KvMap parse_kv_file(const std::string& path);

/// Each override is "dotted.key=value" and replaces (or adds) the entry.
void apply_overrides(KvMap& kv, const std::vector<std::string>& overrides);

/// Invalid configuration; field() names the offending key.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& message)
        : std::runtime_error("config field '" + field + "': " + message),
          field_(std::move(field)) {}

    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct ExperimentConfig {
    SequenceSpec sequence;
    ModelConfig model;   // input_dim and num_classes follow the sequence
    TrainConfig train;   // seed is set per run from `seeds`
    std::string output_dir;  // empty: resolved from the environment later
    std::vector<std::uint64_t> seeds;
    std::vector<double> alpha_sweep = {0.1, 0.2, 0.3, 0.4, 0.5};
};

/// Builds and validates the full experiment setup. Unknown keys and
/// out-of-range values raise ConfigError naming the field. `seeds` is the
/// one required key.
ExperimentConfig experiment_from_kv(const KvMap& kv);

/// Complete JSON echo of one resolved run, written next to its outputs so
/// the artifacts are self-describing.
std::string experiment_json(const ExperimentConfig& cfg, std::uint64_t run_seed,
                            std::uint64_t model_seed);

}  // namespace gradguide

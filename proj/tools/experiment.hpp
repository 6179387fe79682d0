#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace gradguide {

/// Output root resolution: explicit output_dir from the config/overrides,
/// else $GRADGUIDE_OUT, else ./out.
std::string default_output_root();
std::string resolve_output_root(const ExperimentConfig& cfg);

/// Trains the configured variant once per seed. Each seed writes
/// run.json, checkpoint files, steps.csv and matrix.csv under
/// <root>/seed<S>/; the aggregate lands in <root>/summary.csv.
/// Returns 0 on success, 2 for invalid configuration, 1 for runtime
/// failures.
int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides);

/// Variant grid (full, guidance_only, replay_only, sequential, multitask),
/// the two guidance toggles on the full variant (no_scaling, no_gate) and
/// a shared-alpha sweep on guidance_only, all per seed. Writes one
/// combined <root>/ablation_summary.csv. Exit codes as cmd_run.
int cmd_ablate(const std::string& config_path, const std::vector<std::string>& overrides);

/// Turns a summary CSV into plot-ready aggregates (mean and min-max band
/// per group): faa_by_variant.csv, per_task_final_acc.csv,
/// faa_vs_alpha.csv, plus SVG renderings of the first and last. Returns 2
/// when the CSV is malformed or has no data rows, else 0.
int cmd_plot(const std::string& summary_csv, const std::string& out_dir);

}  // namespace gradguide

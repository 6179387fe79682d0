#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gradguide/guidance.hpp"
#include "gradguide/metrics.hpp"
#include "gradguide/model.hpp"
#include "gradguide/replay.hpp"
#include "gradguide/rng.hpp"
#include "gradguide/tasks.hpp"

namespace gradguide {

enum class Variant { full, guidance_only, replay_only, sequential, multitask };

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& s);

struct TrainConfig {
    Variant variant = Variant::full;
    double lr = 1e-4;
    int batch_size = 32;
    int epochs_per_task = 5;
    GuidanceConfig guidance;
    int replay_capacity = 0;
    std::map<int, double> per_task_alpha;  // overrides; task 0 takes no alpha
    std::uint64_t seed = 0;
};

void validate(const TrainConfig& cfg);

struct StepRecord {
    int step = 0;  // global, monotone across tasks
    int task = 0;
    double loss = 0.0;
    bool gated = false;

    bool operator==(const StepRecord& other) const = default;
};

/// Everything that evolves across a sequence. Data shuffling, replay
/// sampling, gating, and buffer storage each draw from their own
/// substream of the training seed, so toggling one mechanism never
/// perturbs the draws of another.
struct TrainState {
    ParameterSet params;
    std::optional<Checkpoint> checkpoint;
    ReplayBuffer buffer;
    int completed_tasks = 0;
    Rng data_rng{0};
    Rng replay_rng{0};
    Rng gate_rng{0};
    Rng store_rng{0};
    std::vector<StepRecord> step_log;
};

TrainState make_state(const Model& model, const TrainConfig& cfg);

/// p' = p - lr * g for every parameter with a gradient; the rest are
/// copied bit-identically. Gradient keys must name trainable parameters.
ParameterSet sgd_step(const ParameterSet& params, const GradientSet& grads, double lr);

/// One task phase: epochs of shuffled mini-batches (replay-mixed and
/// guidance-injected per variant), then checkpoint the trainable subset,
/// store replay samples, and advance completed_tasks. Tasks must arrive
/// in order.
void train_task(TrainState& state, const Model& model, const Task& task,
                const TrainConfig& cfg);

struct RunResult {
    AccuracyMatrix matrix;
    ParameterSet params;
    std::vector<StepRecord> step_log;
};

/// Full sequence under one variant. Multitask pools every training set
/// into a single phase; the others visit tasks in order. After each phase
/// the accuracy of every task seen so far is appended as a matrix row.
/// A nonempty out_dir receives checkpoint_task{t}.bin, steps.csv and
/// matrix.csv.
RunResult run_sequence(const std::vector<Task>& tasks, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const std::string& out_dir = "");

void save_steps_csv(const std::vector<StepRecord>& log, const std::string& path);

}  // namespace gradguide

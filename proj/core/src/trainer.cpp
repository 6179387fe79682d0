#include "gradguide/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "gradguide/serialize.hpp"

namespace gradguide {

namespace {

// Substream ids off the training seed.
enum Stream : std::uint64_t {
    kDataStream = 0,
    kReplayStream = 1,
    kGateStream = 2,
    kStoreStream = 3,
};

Batch take(const Batch& src, const std::vector<int>& order, std::size_t begin,
           std::size_t len) {
    const int dim = src.inputs.cols();
    Batch out;
    out.task_id = src.task_id;
    out.inputs = Tensor({static_cast<int>(len), dim});
    out.labels.resize(len);
    for (std::size_t i = 0; i < len; ++i) {
        const int row = order[begin + i];
        for (int c = 0; c < dim; ++c) {
            out.inputs.at(static_cast<int>(i), c) = src.inputs.at(row, c);
        }
        out.labels[i] = src.labels[static_cast<std::size_t>(row)];
    }
    return out;
}

bool applies_guidance(Variant variant) {
    return variant == Variant::full || variant == Variant::guidance_only;
}

bool stores_replay(Variant variant) {
    return variant == Variant::full || variant == Variant::replay_only;
}

}  // namespace

std::string to_string(Variant variant) {
    switch (variant) {
        case Variant::full: return "full";
        case Variant::guidance_only: return "guidance_only";
        case Variant::replay_only: return "replay_only";
        case Variant::sequential: return "sequential";
        case Variant::multitask: return "multitask";
    }
    throw std::invalid_argument("unknown variant value");
}

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "guidance_only") return Variant::guidance_only;
    if (s == "replay_only") return Variant::replay_only;
    if (s == "sequential") return Variant::sequential;
    if (s == "multitask") return Variant::multitask;
    throw std::invalid_argument(
        "unknown variant '" + s +
        "' (expected full, guidance_only, replay_only, sequential or multitask)");
}

void validate(const TrainConfig& cfg) {
    if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
        throw std::invalid_argument("TrainConfig: lr must be positive and finite");
    }
    if (cfg.batch_size < 1) {
        throw std::invalid_argument("TrainConfig: batch_size must be positive");
    }
    if (cfg.epochs_per_task < 1) {
        throw std::invalid_argument("TrainConfig: epochs_per_task must be positive");
    }
    if (cfg.replay_capacity < 0) {
        throw std::invalid_argument("TrainConfig: replay_capacity must be nonnegative");
    }
    if (cfg.guidance.alpha < 0.0 || cfg.guidance.alpha > 1.0) {
        throw std::invalid_argument("TrainConfig: guidance.alpha must lie in [0, 1]");
    }
    for (const auto& [task_id, alpha] : cfg.per_task_alpha) {
        if (task_id < 1) {
            throw std::invalid_argument(
                "TrainConfig: per-task alpha set for task " + std::to_string(task_id) +
                "; only tasks >= 1 can take one");
        }
        if (alpha < 0.0 || alpha > 1.0) {
            throw std::invalid_argument("TrainConfig: alpha for task " +
                                        std::to_string(task_id) + " must lie in [0, 1]");
        }
    }
}

TrainState make_state(const Model& model, const TrainConfig& cfg) {
    validate(cfg);
    const Rng root(cfg.seed);
    TrainState state;
    state.params = model.init();
    state.buffer = ReplayBuffer(cfg.replay_capacity);
    state.data_rng = root.split(kDataStream);
    state.replay_rng = root.split(kReplayStream);
    state.gate_rng = root.split(kGateStream);
    state.store_rng = root.split(kStoreStream);
    return state;
}

ParameterSet sgd_step(const ParameterSet& params, const GradientSet& grads, double lr) {
    for (const auto& [name, grad] : grads.entries) {
        if (!params.has(name)) {
            throw std::invalid_argument("sgd_step: gradient for unknown parameter '" +
                                        name + "'");
        }
        if (!params.is_trainable(name)) {
            throw std::invalid_argument("sgd_step: gradient for frozen parameter '" +
                                        name + "'");
        }
        check_finite(grad, "gradient for '" + name + "'");
    }
    ParameterSet out;
    for (const auto& [name, value] : params.entries()) {
        if (grads.has(name)) {
            out.insert(name, axpy(-lr, grads.at(name), value), true);
        } else {
            out.insert(name, value, params.is_trainable(name));
        }
    }
    return out;
}

void train_task(TrainState& state, const Model& model, const Task& task,
                const TrainConfig& cfg) {
    validate(cfg);
    if (task.task_id != state.completed_tasks) {
        throw std::invalid_argument("train_task: task " + std::to_string(task.task_id) +
                                    " arrived with " + std::to_string(state.completed_tasks) +
                                    " tasks completed; tasks must run in order");
    }
    if (task.train.empty()) {
        throw std::invalid_argument("train_task: task " + std::to_string(task.task_id) +
                                    " has no training samples");
    }

    GuidanceConfig guidance = cfg.guidance;
    if (auto it = cfg.per_task_alpha.find(task.task_id); it != cfg.per_task_alpha.end()) {
        guidance.alpha = it->second;
    }
    const bool use_guidance = applies_guidance(cfg.variant) && state.checkpoint.has_value();
    const bool use_replay = stores_replay(cfg.variant) && state.buffer.total_samples() > 0;

    const int n = task.train.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

    for (int epoch = 0; epoch < cfg.epochs_per_task; ++epoch) {
        state.data_rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t len =
                std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - begin);
            Batch batch = take(task.train, order, begin, len);
            if (use_replay) {
                batch = mix(batch, state.buffer.sample_replay(batch.size(), state.replay_rng));
            }
            LossGrad lg = model.loss_and_grad(state.params, batch);
            if (!std::isfinite(lg.loss)) {
                throw std::runtime_error(
                    "train_task: non-finite loss at step " +
                    std::to_string(state.step_log.size()) + " of task " +
                    std::to_string(task.task_id));
            }
            GradientSet grads = std::move(lg.grads);
            bool gated = false;
            if (use_guidance) {
                GuidanceResult result =
                    apply_guidance(grads, state.params, *state.checkpoint, guidance,
                                   state.gate_rng);
                grads = std::move(result.grads);
                gated = result.gated;
            }
            state.params = sgd_step(state.params, grads, cfg.lr);
            state.step_log.push_back({static_cast<int>(state.step_log.size()),
                                      task.task_id, lg.loss, gated});
        }
    }

    state.checkpoint = Checkpoint{state.params.trainable_subset(), task.task_id};
    if (stores_replay(cfg.variant) && cfg.replay_capacity > 0) {
        state.buffer.store(task.task_id, task.train, state.store_rng);
    }
    ++state.completed_tasks;
}

RunResult run_sequence(const std::vector<Task>& tasks, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const std::string& out_dir) {
    if (tasks.empty()) {
        throw std::invalid_argument("run_sequence: no tasks given");
    }
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
    }
    const Model model(model_cfg);
    TrainState state = make_state(model, cfg);

    std::vector<int> test_sizes;
    test_sizes.reserve(tasks.size());
    for (const Task& task : tasks) {
        if (task.test.empty()) {
            throw std::invalid_argument("run_sequence: task " +
                                        std::to_string(task.task_id) +
                                        " has no test samples");
        }
        test_sizes.push_back(task.test.size());
    }
    AccuracyMatrix matrix(test_sizes);

    const auto evaluate_row = [&](int trained_up_to) {
        std::vector<double> row(tasks.size(), kNotEvaluated);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (static_cast<int>(i) <= trained_up_to) {
                row[i] = model.accuracy(state.params, tasks[i].test);
            }
        }
        matrix.add_row(std::move(row));
    };
    const auto persist_checkpoint = [&](int phase) {
        if (!out_dir.empty()) {
            save_parameters(state.checkpoint->params,
                            out_dir + "/checkpoint_task" + std::to_string(phase) + ".bin");
        }
    };

    if (cfg.variant == Variant::multitask) {
        Task pooled;
        pooled.task_id = 0;
        pooled.name = "pooled";
        pooled.train = tasks.front().train;
        pooled.train.task_id = 0;
        for (std::size_t t = 1; t < tasks.size(); ++t) {
            pooled.train = mix(pooled.train, tasks[t].train);
        }
        train_task(state, model, pooled, cfg);
        evaluate_row(static_cast<int>(tasks.size()) - 1);
        persist_checkpoint(0);
    } else {
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            train_task(state, model, tasks[t], cfg);
            evaluate_row(static_cast<int>(t));
            persist_checkpoint(static_cast<int>(t));
        }
    }

    if (!out_dir.empty()) {
        save_steps_csv(state.step_log, out_dir + "/steps.csv");
        save_matrix_csv(matrix, out_dir + "/matrix.csv");
    }
    return RunResult{std::move(matrix), std::move(state.params), std::move(state.step_log)};
}

void save_steps_csv(const std::vector<StepRecord>& log, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out << "step,task,loss,gated\n";
    for (const StepRecord& record : log) {
        out << record.step << "," << record.task << "," << format_real(record.loss) << ","
            << (record.gated ? 1 : 0) << "\n";
    }
    if (!out) {
        throw std::runtime_error("failed to write '" + path + "'");
    }
}

}  // namespace gradguide

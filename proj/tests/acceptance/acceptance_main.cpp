// Acceptance gate for the guidance library and its experiment harness.
// Each criterion prints one [PASS]/[FAIL] line; the exit code is the
// number of failures. Heavier criteria train on the two frozen configs
// given as argv[1] (default: ./configs).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "experiment.hpp"
#include "gradguide/guidance.hpp"
#include "gradguide/metrics.hpp"
#include "gradguide/replay.hpp"
#include "gradguide/rng.hpp"
#include "gradguide/tasks.hpp"
#include "gradguide/tensor.hpp"
#include "gradguide/trainer.hpp"
#include "guidance_reference.hpp"
#include "test_helpers.hpp"

using namespace gradguide;
using testing::TempDir;
using testing::t2;

namespace {

void require(bool ok, const std::string& message) {
    if (!ok) throw std::runtime_error(message);
}

std::string real(double v) { return format_real(v); }

double mean(const std::vector<double>& values) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double dot(const Tensor& a, const Tensor& b) {
    double sum = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

// The harness derives each run's model seed from substream 4 of the run
// seed (0..3 belong to the trainer); mirrored here so cells match cmd_run.
std::uint64_t model_seed_for(std::uint64_t run_seed) {
    return Rng(run_seed).split(4).seed();
}

struct CellResult {
    std::vector<double> faa;       // per seed, in config order
    std::vector<double> last_acc;  // final accuracy on the newest task
};

/// Loads the two frozen configs lazily and memoizes every trained cell so
/// criteria can share runs.
class Suite {
public:
    explicit Suite(std::string configs_dir) : configs_dir_(std::move(configs_dir)) {}

    std::string config_path(const std::string& name) const {
        return configs_dir_ + "/" + name;
    }

    const ExperimentConfig& homogeneous() {
        return load(hom_, hom_tasks_, "homogeneous.cfg");
    }
    const ExperimentConfig& shifted() { return load(shift_, shift_tasks_, "shifted.cfg"); }

    const CellResult& cell(const std::string& key,
                           const std::function<void(TrainConfig&)>& tweak) {
        auto it = cells_.find(key);
        if (it != cells_.end()) return it->second;

        const bool hom = key.rfind("hom/", 0) == 0;
        const ExperimentConfig& cfg = hom ? homogeneous() : shifted();
        const std::vector<Task>& tasks = hom ? hom_tasks_ : shift_tasks_;

        CellResult result;
        for (const std::uint64_t seed : cfg.seeds) {
            TrainConfig train = cfg.train;
            tweak(train);
            train.seed = seed;
            ModelConfig model = cfg.model;
            model.seed = model_seed_for(seed);
            RunResult run = run_sequence(tasks, model, train);
            result.faa.push_back(faa(run.matrix));
            result.last_acc.push_back(run.matrix.final_row().back());
        }
        return cells_.emplace(key, std::move(result)).first->second;
    }

    const CellResult& variant_cell(const std::string& regime, Variant variant) {
        return cell(regime + "/" + to_string(variant),
                    [variant](TrainConfig& t) { t.variant = variant; });
    }

private:
    const ExperimentConfig& load(std::optional<ExperimentConfig>& slot,
                                 std::vector<Task>& tasks, const std::string& name) {
        if (!slot.has_value()) {
            slot = experiment_from_kv(parse_kv_file(config_path(name)));
            tasks = generate(slot->sequence);
        }
        return *slot;
    }

    std::string configs_dir_;
    std::optional<ExperimentConfig> hom_, shift_;
    std::vector<Task> hom_tasks_, shift_tasks_;
    std::map<std::string, CellResult> cells_;
};

// ---------------------------------------------------------------------------
// 1. The norm-capped pull: hand values at 1e-12, invariants over 1000 draws.

void criterion_pull_formula(Suite&) {
    const Tensor capped = scaled_guidance(t2({1, 2}, {3, 4}), t2({1, 2}, {0, 2}));
    require(std::abs(capped[0] - 1.2) <= 1e-12 && std::abs(capped[1] - 1.6) <= 1e-12,
            "capped pull gave (" + real(capped[0]) + ", " + real(capped[1]) +
                "), expected (1.2, 1.6)");

    const Tensor small = t2({1, 2}, {0.1, 0.0});
    require(scaled_guidance(small, t2({1, 2}, {0, 2})) == small,
            "a pull shorter than the gradient must pass through unchanged");

    const Tensor boundary = scaled_guidance(t2({1, 2}, {3, 4}), t2({1, 2}, {5, 0}));
    require(std::abs(boundary[0] - 3.0) <= 1e-12 && std::abs(boundary[1] - 4.0) <= 1e-12,
            "equal norms must cap to the same vector");

    Rng rng(404);
    for (int trial = 0; trial < 1000; ++trial) {
        const int r = 1 + static_cast<int>(rng.next_below(3));
        const int c = 1 + static_cast<int>(rng.next_below(3));
        const Tensor dir = gaussian(rng, {r, c}, 0.0, 2.0);
        const Tensor grad = gaussian(rng, {r, c}, 0.0, 2.0);
        const double dir_norm = frobenius_norm(dir);
        const double grad_norm = frobenius_norm(grad);
        if (grad_norm == 0.0) continue;
        const Tensor out = scaled_guidance(dir, grad);
        if (dir_norm >= grad_norm) {
            require(std::abs(frobenius_norm(out) - grad_norm) <=
                        1e-9 * std::max(1.0, grad_norm),
                    "trial " + std::to_string(trial) + ": capped norm " +
                        real(frobenius_norm(out)) + " != gradient norm " + real(grad_norm));
            const double cosine = dot(out, dir) / (frobenius_norm(out) * dir_norm);
            require(cosine >= 1.0 - 1e-9, "trial " + std::to_string(trial) +
                                              ": capped pull not parallel, cosine " +
                                              real(cosine));
        } else {
            require(out == dir, "trial " + std::to_string(trial) +
                                    ": short pull must come back bit-identical");
        }
    }
}

// ---------------------------------------------------------------------------
// 2. Gated injection against an independent transcription of the update
//    rule, plus the gate's long-run firing rate.

void criterion_injection_fidelity(Suite&) {
    Rng setup(77);
    for (int trial = 0; trial < 300; ++trial) {
        ParameterSet current;
        ParameterSet anchor;
        GradientSet grads;
        const int entries = 2 + static_cast<int>(setup.next_below(2));
        for (int e = 0; e < entries; ++e) {
            const std::string name = "p" + std::to_string(e);
            const int r = 1 + static_cast<int>(setup.next_below(3));
            const int c = 1 + static_cast<int>(setup.next_below(3));
            current.insert(name, gaussian(setup, {r, c}, 0.0, 1.0), true);
            anchor.insert(name, gaussian(setup, {r, c}, 0.0, 1.0), true);
            switch ((trial + e) % 3) {
                case 0: grads.entries[name] = gaussian(setup, {r, c}, 0.0, 1.0); break;
                case 1: grads.entries[name] = Tensor({r, c}); break;  // zero norm
                default: break;                                       // missing
            }
        }
        GuidanceConfig cfg;
        cfg.alpha = setup.uniform();
        cfg.scaling_enabled = trial % 2 == 0;
        cfg.gate_enabled = trial % 5 != 0;
        const Checkpoint checkpoint{anchor.trainable_subset(), 0};

        Rng lib_rng(1000 + static_cast<std::uint64_t>(trial));
        Rng ref_rng = lib_rng;
        const GuidanceResult lib = apply_guidance(grads, current, checkpoint, cfg, lib_rng);
        const GuidanceResult ref =
            testing::reference_guidance(grads, current, checkpoint, cfg, ref_rng);
        require(lib.gated == ref.gated && lib.grads == ref.grads,
                "trial " + std::to_string(trial) + ": library and transcription disagree");
        require(lib_rng == ref_rng,
                "trial " + std::to_string(trial) + ": draw counts diverged");
    }

    // Exactly one draw per call, consumed even when nothing fires.
    ParameterSet params;
    params.insert("w", t2({1, 2}, {1.0, 2.0}), true);
    const Checkpoint anchor{params.trainable_subset(), 0};
    GradientSet grads;
    grads.entries["w"] = t2({1, 2}, {0.5, 0.0});
    GuidanceConfig closed;
    closed.alpha = 0.0;
    Rng gate(5);
    Rng expected = gate;
    const GuidanceResult silent = apply_guidance(grads, params, anchor, closed, gate);
    require(!silent.gated && silent.grads == grads, "a closed gate must not touch grads");
    expected.bernoulli(0.0);
    require(gate == expected, "a closed gate must still consume one draw");

    GuidanceConfig fifth;
    fifth.alpha = 0.2;
    Rng freq_rng(99);
    int fired = 0;
    for (int call = 0; call < 10000; ++call) {
        if (apply_guidance(grads, params, anchor, fifth, freq_rng).gated) ++fired;
    }
    const double rate = fired / 10000.0;
    require(rate >= 0.18 && rate <= 0.22,
            "gate fired at rate " + real(rate) + ", outside [0.18, 0.22]");
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients against central finite differences.

void criterion_gradient_check(Suite&) {
    Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        ModelConfig cfg;
        cfg.input_dim = 2 + static_cast<int>(rng.next_below(4));
        cfg.num_classes = 2 + static_cast<int>(rng.next_below(3));
        const int layers = static_cast<int>(rng.next_below(3));
        cfg.hidden_dims.clear();
        for (int l = 0; l < layers; ++l) {
            cfg.hidden_dims.push_back(3 + static_cast<int>(rng.next_below(4)));
        }
        cfg.adapter_rank = trial % 2 == 0 ? 0 : 1 + static_cast<int>(rng.next_below(2));
        cfg.init_std = 0.3;
        cfg.seed = 100 + static_cast<std::uint64_t>(trial);

        const Model model(cfg);
        const ParameterSet params = model.init();
        Batch batch;
        const int n = 3 + static_cast<int>(rng.next_below(4));
        for (int attempt = 0;; ++attempt) {
            batch.inputs = gaussian(rng, {n, cfg.input_dim}, 0.0, 1.0);
            if (cfg.hidden_dims.empty() ||
                testing::min_hidden_margin(model, params, batch) > 1e-3) {
                break;
            }
            require(attempt < 50, "trial " + std::to_string(trial) +
                                      ": no batch clear of relu kinks after 50 draws");
        }
        for (int i = 0; i < n; ++i) {
            batch.labels.push_back(
                static_cast<int>(rng.next_below(static_cast<std::uint64_t>(cfg.num_classes))));
        }

        const GradientSet analytic = model.loss_and_grad(params, batch).grads;
        const auto numeric = testing::numeric_grads(model, params, batch, 1e-5);
        const double worst = testing::max_grad_rel_error(analytic, numeric);
        require(worst < 1e-4, "trial " + std::to_string(trial) +
                                  (cfg.adapter_rank > 0 ? " (adapter)" : " (full)") +
                                  ": max relative error " + real(worst));
    }
}

// ---------------------------------------------------------------------------
// 4. Gradients are linear: a pooled batch equals the average of its halves.

void criterion_linearity(Suite&) {
    Rng rng(31);
    const ModelConfig cfg{.input_dim = 5, .hidden_dims = {6}, .num_classes = 3, .seed = 8};
    const Model model(cfg);
    const ParameterSet params = model.init();

    for (int trial = 0; trial < 5; ++trial) {
        const auto random_batch = [&](int n) {
            Batch b;
            b.inputs = gaussian(rng, {n, cfg.input_dim}, 0.0, 1.0);
            for (int i = 0; i < n; ++i) {
                b.labels.push_back(static_cast<int>(rng.next_below(3)));
            }
            return b;
        };
        const Batch a = random_batch(8);
        const Batch b = random_batch(8);
        const LossGrad half_a = model.loss_and_grad(params, a);
        const LossGrad half_b = model.loss_and_grad(params, b);
        const LossGrad pooled = model.loss_and_grad(params, mix(a, b));

        require(std::abs(pooled.loss - 0.5 * (half_a.loss + half_b.loss)) <= 1e-12,
                "pooled loss deviates from the mean of the halves");
        for (const auto& [name, grad] : pooled.grads.entries) {
            const Tensor& ga = half_a.grads.at(name);
            const Tensor& gb = half_b.grads.at(name);
            for (std::int64_t i = 0; i < grad.size(); ++i) {
                require(std::abs(grad[i] - 0.5 * (ga[i] + gb[i])) <= 1e-10,
                        "gradient of '" + name + "' is not the average of the halves");
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 5. Variant ordering on the homogeneous sequence, per seed.

void criterion_homogeneous_ordering(Suite& suite) {
    const auto& seeds = suite.homogeneous().seeds;
    const CellResult& multitask = suite.variant_cell("hom", Variant::multitask);
    const CellResult& full = suite.variant_cell("hom", Variant::full);
    const CellResult& sequential = suite.variant_cell("hom", Variant::sequential);
    const CellResult& guidance = suite.variant_cell("hom", Variant::guidance_only);
    const CellResult& replay = suite.variant_cell("hom", Variant::replay_only);

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const std::string seed = "seed " + std::to_string(seeds[i]);
        require(multitask.faa[i] >= full.faa[i],
                seed + ": multitask " + real(multitask.faa[i]) + " < full " +
                    real(full.faa[i]));
        require(full.faa[i] - sequential.faa[i] >= 0.10,
                seed + ": full " + real(full.faa[i]) + " clears sequential " +
                    real(sequential.faa[i]) + " by less than 10 points");
        require(guidance.faa[i] > replay.faa[i],
                seed + ": guidance_only " + real(guidance.faa[i]) +
                    " <= replay_only " + real(replay.faa[i]));
    }
}

// ---------------------------------------------------------------------------
// 6. Variant ordering on the shifted sequence; the guidance-vs-replay gap
//    must shrink or reverse relative to the homogeneous one.

void criterion_shifted_ordering(Suite& suite) {
    const auto& seeds = suite.shifted().seeds;
    const CellResult& full = suite.variant_cell("shift", Variant::full);
    const CellResult& guidance = suite.variant_cell("shift", Variant::guidance_only);
    const CellResult& replay = suite.variant_cell("shift", Variant::replay_only);

    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const std::string seed = "seed " + std::to_string(seeds[i]);
        require(full.faa[i] >= guidance.faa[i],
                seed + ": full " + real(full.faa[i]) + " < guidance_only " +
                    real(guidance.faa[i]));
        require(full.faa[i] >= replay.faa[i],
                seed + ": full " + real(full.faa[i]) + " < replay_only " +
                    real(replay.faa[i]));
    }

    const double shifted_gap = mean(guidance.faa) - mean(replay.faa);
    const double homogeneous_gap =
        mean(suite.variant_cell("hom", Variant::guidance_only).faa) -
        mean(suite.variant_cell("hom", Variant::replay_only).faa);
    require(shifted_gap < homogeneous_gap,
            "guidance-replay gap did not shrink: homogeneous " + real(homogeneous_gap) +
                ", shifted " + real(shifted_gap));
}

// ---------------------------------------------------------------------------
// 7. On the shifted sequence both guidance toggles hurt, the gate more.

void criterion_toggle_ablation(Suite& suite) {
    const double full = mean(suite.variant_cell("shift", Variant::full).faa);
    const double no_scaling = mean(suite.cell("shift/no_scaling", [](TrainConfig& t) {
                                        t.variant = Variant::full;
                                        t.guidance.scaling_enabled = false;
                                    }).faa);
    const double no_gate = mean(suite.cell("shift/no_gate", [](TrainConfig& t) {
                                     t.variant = Variant::full;
                                     t.guidance.gate_enabled = false;
                                 }).faa);

    require(no_gate < full, "always-on injection did not hurt: no_gate " + real(no_gate) +
                                " vs full " + real(full));
    require(no_scaling < full, "uncapped pull did not hurt: no_scaling " +
                                   real(no_scaling) + " vs full " + real(full));
    require(full - no_gate > full - no_scaling,
            "gate toggle should dominate: no_gate costs " + real(full - no_gate) +
                ", no_scaling costs " + real(full - no_scaling));
}

// ---------------------------------------------------------------------------
// 8. Alpha sensitivity on the homogeneous sequence: bounded spread, and the
//    largest alpha does not strictly dominate new-task accuracy.

void criterion_alpha_sensitivity(Suite& suite) {
    const std::vector<double>& sweep = suite.homogeneous().alpha_sweep;
    require(sweep.size() >= 2, "the sweep needs at least two alpha values");

    std::vector<double> mean_faa;
    std::vector<double> mean_last;
    for (const double alpha : sweep) {
        const CellResult& cell =
            suite.cell("hom/alpha_" + real(alpha), [alpha](TrainConfig& t) {
                t.variant = Variant::guidance_only;
                t.guidance.alpha = alpha;
                t.per_task_alpha.clear();
            });
        mean_faa.push_back(mean(cell.faa));
        mean_last.push_back(mean(cell.last_acc));
    }

    const auto [lo, hi] = std::minmax_element(mean_faa.begin(), mean_faa.end());
    require(*hi - *lo <= 0.25, "alpha sweep spread " + real(*hi - *lo) +
                                   " exceeds the calibrated bound 0.25");

    std::size_t top = 0;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        if (sweep[i] > sweep[top]) top = i;
    }
    bool dominated = false;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
        if (i != top && mean_last[i] >= mean_last[top]) dominated = true;
    }
    require(dominated, "alpha " + real(sweep[top]) +
                           " strictly dominates every smaller alpha on new-task accuracy " +
                           real(mean_last[top]));
}

// ---------------------------------------------------------------------------
// 9. The weighted final accuracy is exact on the hand example and invariant
//    to scaling every test size by the same factor.

void criterion_metric_exactness(Suite&) {
    AccuracyMatrix m({10, 30});
    m.add_row({0.5, 0.9});
    require(faa(m) == 0.8, "weighted mean of (10,30)x(0.5,0.9) gave " + real(faa(m)));

    AccuracyMatrix scaled({70, 210});
    scaled.add_row({0.5, 0.9});
    require(faa(scaled) == faa(m), "scaling all test sizes by 7 changed the value");
}

// ---------------------------------------------------------------------------
// 10. Two harness invocations from one config are byte-identical.

void criterion_determinism(Suite& suite) {
    const std::string config = suite.config_path("homogeneous.cfg");
    TempDir dir("acceptance_rerun");
    const std::string first = dir.file("first");
    const std::string second = dir.file("second");

    require(cmd_run(config, {"output_dir=" + first}) == 0, "first harness run failed");
    require(cmd_run(config, {"output_dir=" + second}) == 0, "second harness run failed");

    for (const std::uint64_t seed : suite.homogeneous().seeds) {
        const std::string name = "/seed" + std::to_string(seed) + "/matrix.csv";
        const std::string a = testing::read_file(first + name);
        require(!a.empty(), "missing matrix for seed " + std::to_string(seed));
        require(a == testing::read_file(second + name),
                "matrix.csv differs between runs for seed " + std::to_string(seed));
    }
    require(testing::read_file(first + "/summary.csv") ==
                testing::read_file(second + "/summary.csv"),
            "summary.csv differs between runs");
}

struct Criterion {
    int id;
    std::string label;
    std::function<void(Suite&)> body;
    double budget_seconds;  // 0: no bound enforced
};

}  // namespace

int main(int argc, char** argv) {
    const std::string configs_dir = argc > 1 ? argv[1] : "configs";
    Suite suite(configs_dir);

    const std::vector<Criterion> criteria{
        {1, "norm-capped pull formula", criterion_pull_formula, 1.0},
        {2, "gated injection fidelity", criterion_injection_fidelity, 5.0},
        {3, "analytic gradients vs finite differences", criterion_gradient_check, 10.0},
        {4, "gradient linearity over pooled batches", criterion_linearity, 0.0},
        {5, "variant ordering, homogeneous sequence", criterion_homogeneous_ordering, 300.0},
        {6, "variant ordering, shifted sequence", criterion_shifted_ordering, 0.0},
        {7, "guidance toggle ablations, shifted sequence", criterion_toggle_ablation, 0.0},
        {8, "alpha sensitivity, homogeneous sequence", criterion_alpha_sensitivity, 0.0},
        {9, "weighted final-accuracy exactness", criterion_metric_exactness, 0.0},
        {10, "byte-identical harness reruns", criterion_determinism, 0.0},
    };

    int failures = 0;
    for (const Criterion& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::optional<std::string> error;
        try {
            criterion.body(suite);
        } catch (const std::exception& e) {
            error = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!error.has_value() && criterion.budget_seconds > 0.0 &&
            elapsed > criterion.budget_seconds) {
            error = "exceeded the " + format_real(criterion.budget_seconds) +
                    " s time budget (" + format_real(elapsed) + " s)";
        }
        const char* tag = error.has_value() ? "[FAIL]" : "[PASS]";
        std::cout << tag << " criterion " << criterion.id << ": " << criterion.label << " ("
                  << format_real(elapsed) << " s)";
        if (error.has_value()) {
            std::cout << " -- " << *error;
            ++failures;
        }
        std::cout << "\n" << std::flush;
    }

    std::cout << (criteria.size() - static_cast<std::size_t>(failures)) << "/"
              << criteria.size() << " criteria passed\n";
    return failures == 0 ? 0 : 1;
}

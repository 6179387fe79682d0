#include <benchmark/benchmark.h>

#include "gradguide/guidance.hpp"
#include "gradguide/model.hpp"
#include "gradguide/replay.hpp"
#include "gradguide/rng.hpp"
#include "gradguide/tensor.hpp"

namespace {

using namespace gradguide;

Batch random_batch(int n, int dim, int classes, Rng& rng) {
    Batch batch;
    batch.inputs = gaussian(rng, {n, dim}, 0.0, 1.0);
    batch.labels.resize(static_cast<std::size_t>(n));
    for (int& label : batch.labels) {
        label = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(classes)));
    }
    return batch;
}

void BM_matmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(7);
    const Tensor a = gaussian(rng, {n, n}, 0.0, 1.0);
    const Tensor b = gaussian(rng, {n, n}, 0.0, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
}
BENCHMARK(BM_matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_loss_and_grad(benchmark::State& state) {
    ModelConfig cfg;
    cfg.num_classes = 10;
    const Model model(cfg);
    const ParameterSet params = model.init();
    Rng rng(7);
    const Batch batch = random_batch(static_cast<int>(state.range(0)), cfg.input_dim,
                                     cfg.num_classes, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.loss_and_grad(params, batch));
    }
}
BENCHMARK(BM_loss_and_grad)->Arg(32)->Arg(64);

void BM_apply_guidance(benchmark::State& state) {
    ModelConfig cfg;
    cfg.num_classes = 10;
    const Model model(cfg);
    const ParameterSet params = model.init();
    ModelConfig other = cfg;
    other.seed = 1;
    const Checkpoint checkpoint{Model(other).init().trainable_subset(), 0};
    Rng rng(7);
    const Batch batch = random_batch(32, cfg.input_dim, cfg.num_classes, rng);
    const LossGrad lg = model.loss_and_grad(params, batch);
    GuidanceConfig guidance;
    guidance.gate_enabled = false;  // measure the injection path itself
    Rng gate(11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(apply_guidance(lg.grads, params, checkpoint, guidance, gate));
    }
}
BENCHMARK(BM_apply_guidance);

void BM_sample_replay(benchmark::State& state) {
    Rng rng(7);
    ReplayBuffer buffer(200);
    for (int task = 0; task < 5; ++task) {
        Batch data = random_batch(2000, 32, 10, rng);
        data.task_id = task;
        buffer.store(task, data, rng);
    }
    Rng sampler(11);
    for (auto _ : state) {
        benchmark::DoNotOptimize(buffer.sample_replay(32, sampler));
    }
}
BENCHMARK(BM_sample_replay);

}  // namespace

BENCHMARK_MAIN();

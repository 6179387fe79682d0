#pragma once

#include "gradguide/model.hpp"
#include "gradguide/rng.hpp"

namespace gradguide {

/// Frozen snapshot of the trainable parameters at the end of a task.
/// Serves as the directional anchor for the approximated old-task gradient.
struct Checkpoint {
    ParameterSet params;
    int after_task = 0;
};

struct GuidanceConfig {
    double alpha = 0.2;          // Bernoulli success probability
    bool scaling_enabled = true; // norm-cap the directional vector
    bool gate_enabled = true;    // false: guidance applied on every call
};

/// Per-parameter elementwise difference current - optimal over the
/// checkpoint's key set.
GradientSet direction(const ParameterSet& current, const Checkpoint& optimal);

/// Norm-cap of the directional vector against the live gradient: when
/// ||dir|| >= ||grad|| the result is (dir / ||dir||) * ||grad||, otherwise
/// dir unchanged. The result is always parallel to dir with norm at most
/// ||grad||. Callers must skip zero-norm gradients before calling.
Tensor scaled_guidance(const Tensor& dir, const Tensor& grad);

struct GuidanceResult {
    GradientSet grads;
    bool gated = false;  // true when the guidance term was injected
};

/// One guidance step: a single Bernoulli(alpha) draw decides whether to
/// inject the approximated old-task gradient. When injecting, every
/// checkpointed parameter with a present, nonzero-norm gradient receives
/// the (optionally norm-capped) directional vector added to its gradient.
/// Parameters missing from grads or with zero gradient norm are skipped
/// and come back bit-unchanged. Always consumes exactly one draw.
GuidanceResult apply_guidance(const GradientSet& grads, const ParameterSet& current,
                              const Checkpoint& optimal, const GuidanceConfig& cfg, Rng& rng);

}  // namespace gradguide

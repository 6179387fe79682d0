#include "gradguide/guidance.hpp"

#include <stdexcept>

namespace gradguide {

GradientSet direction(const ParameterSet& current, const Checkpoint& optimal) {
    GradientSet out;
    for (const auto& [name, anchor] : optimal.params.entries()) {
        if (!current.has(name)) {
            throw std::invalid_argument("direction: parameter '" + name +
                                        "' missing from current set");
        }
        const Tensor& live = current.at(name);
        if (!live.same_shape(anchor)) {
            throw std::invalid_argument("direction: shape mismatch for '" + name + "'");
        }
        out.entries[name] = axpy(-1.0, anchor, live);
    }
    return out;
}

Tensor scaled_guidance(const Tensor& dir, const Tensor& grad) {
    if (!dir.same_shape(grad)) {
        throw std::invalid_argument("scaled_guidance: shape mismatch " + shape_string(dir) +
                                    " vs " + shape_string(grad));
    }
    const double grad_norm = frobenius_norm(grad);
    if (grad_norm == 0.0) {
        throw std::invalid_argument(
            "scaled_guidance: zero gradient norm; caller must skip this parameter");
    }
    const double dir_norm = frobenius_norm(dir);
    if (dir_norm < grad_norm) {
        return dir;
    }
    Tensor out = dir;
    for (double& v : out.data()) {
        v = (v / dir_norm) * grad_norm;
    }
    return out;
}

GuidanceResult apply_guidance(const GradientSet& grads, const ParameterSet& current,
                              const Checkpoint& optimal, const GuidanceConfig& cfg, Rng& rng) {
    // One pre-loop draw per call, consumed whether or not the gate is enabled
    // so ablation variants stay step-for-step comparable.
    const int draw = rng.bernoulli(cfg.alpha);
    const bool inject = cfg.gate_enabled ? (draw == 1) : true;

    GuidanceResult result;
    result.grads = grads;
    result.gated = inject;
    if (!inject) {
        return result;
    }

    for (const auto& [name, anchor] : optimal.params.entries()) {
        auto grad_it = result.grads.entries.find(name);
        if (grad_it == result.grads.entries.end()) {
            continue;  // parameter without a gradient
        }
        Tensor& grad = grad_it->second;
        if (frobenius_norm(grad) == 0.0) {
            continue;  // zero-norm skip
        }
        if (!current.has(name)) {
            throw std::invalid_argument("apply_guidance: parameter '" + name +
                                        "' missing from current set");
        }
        Tensor dir = axpy(-1.0, anchor, current.at(name));
        if (cfg.scaling_enabled) {
            dir = scaled_guidance(dir, grad);
        }
        grad = axpy(1.0, dir, grad);
    }
    return result;
}

}  // namespace gradguide

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gradguide/tensor.hpp"

namespace gradguide {

struct ModelConfig {
    int input_dim = 32;
    std::vector<int> hidden_dims = {64};
    int num_classes = 2;
    int adapter_rank = 0;  // 0 = full fine-tuning
    double init_std = 0.05;
    std::uint64_t seed = 0;
};

/// Ordered name -> tensor map with a trainable subset. Iteration order is
/// the map's key order, so two equal sets always serialize identically.
class ParameterSet {
public:
    void insert(const std::string& name, Tensor value, bool trainable);
    bool has(const std::string& name) const { return entries_.count(name) > 0; }
    const Tensor& at(const std::string& name) const;
    void set(const std::string& name, Tensor value);  // shape-checked replace
    bool is_trainable(const std::string& name) const { return trainable_.count(name) > 0; }

    const std::map<std::string, Tensor>& entries() const { return entries_; }
    std::vector<std::string> trainable_names() const;
    std::size_t count() const { return entries_.size(); }

    /// Copy holding only the trainable entries (all marked trainable).
    ParameterSet trainable_subset() const;

    bool operator==(const ParameterSet& other) const = default;

private:
    std::map<std::string, Tensor> entries_;
    std::set<std::string> trainable_;
};

struct GradientSet {
    std::map<std::string, Tensor> entries;

    bool has(const std::string& name) const { return entries.count(name) > 0; }
    const Tensor& at(const std::string& name) const;
    bool operator==(const GradientSet& other) const = default;
};

struct Batch {
    Tensor inputs;            // [n x input_dim]
    std::vector<int> labels;  // length n
    int task_id = 0;

    int size() const { return static_cast<int>(labels.size()); }
    bool empty() const { return labels.empty(); }
    bool operator==(const Batch& other) const = default;
};

struct LossGrad {
    double loss = 0.0;
    GradientSet grads;
};

/// Feed-forward relu classifier, optionally parameterized as a frozen base
/// plus low-rank adapters (effective weight W0 + B*A). Forward and backward
/// passes are hand-written; gradients are exact.
class Model {
public:
    explicit Model(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    int num_layers() const { return static_cast<int>(layer_dims_.size()) - 1; }
    bool adapter_mode() const { return config_.adapter_rank > 0; }

    /// Fresh Gaussian(0, init_std) parameters. In adapter mode lora_b starts
    /// at zero so the effective weight equals the base weight.
    ParameterSet init() const;

    /// Mean cross-entropy over the batch plus exact gradients for every
    /// trainable parameter.
    LossGrad loss_and_grad(const ParameterSet& params, const Batch& batch) const;

    Tensor logits(const ParameterSet& params, const Batch& batch) const;

    /// Fraction of argmax-correct predictions; ties break toward the lowest
    /// class index.
    double accuracy(const ParameterSet& params, const Batch& eval_set) const;

    /// Effective weight of one layer: the stored weight, plus lora_b*lora_a
    /// in adapter mode.
    Tensor effective_weight(const ParameterSet& params, int layer) const;

    static std::string weight_name(int layer);
    static std::string bias_name(int layer);
    static std::string lora_a_name(int layer);
    static std::string lora_b_name(int layer);

private:
    void validate_batch(const Batch& batch) const;

    ModelConfig config_;
    std::vector<int> layer_dims_;  // input, hidden..., classes
};

}  // namespace gradguide

#include "gradguide/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gradguide/rng.hpp"

namespace gradguide {

void ParameterSet::insert(const std::string& name, Tensor value, bool trainable) {
    if (has(name)) {
        throw std::invalid_argument("ParameterSet: duplicate parameter name '" + name + "'");
    }
    entries_.emplace(name, std::move(value));
    if (trainable) {
        trainable_.insert(name);
    }
}

const Tensor& ParameterSet::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw std::invalid_argument("ParameterSet: unknown parameter '" + name + "'");
    }
    return it->second;
}

void ParameterSet::set(const std::string& name, Tensor value) {
    auto it = entries_.find(name);
    if (it == entries_.end()) {
        throw std::invalid_argument("ParameterSet: unknown parameter '" + name + "'");
    }
    if (!it->second.same_shape(value)) {
        throw std::invalid_argument("ParameterSet: shape mismatch assigning '" + name + "'");
    }
    it->second = std::move(value);
}

std::vector<std::string> ParameterSet::trainable_names() const {
    return {trainable_.begin(), trainable_.end()};
}

ParameterSet ParameterSet::trainable_subset() const {
    ParameterSet out;
    for (const auto& [name, value] : entries_) {
        if (is_trainable(name)) {
            out.insert(name, value, true);
        }
    }
    return out;
}

const Tensor& GradientSet::at(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end()) {
        throw std::invalid_argument("GradientSet: unknown parameter '" + name + "'");
    }
    return it->second;
}

namespace {

// Z[i,j] = sum_k X[i,k] * W[j,k] + b[j]; W stored as [out x in].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int n = x.rows();
    const int in = x.cols();
    const int out = w.rows();
    Tensor z({n, out});
    const double* xv = x.data().data();
    const double* wv = w.data().data();
    const double* bv = b.data().data();
    double* zv = z.data().data();
    for (int i = 0; i < n; ++i) {
        const double* xi = xv + static_cast<std::size_t>(i) * in;
        double* zi = zv + static_cast<std::size_t>(i) * out;
        for (int j = 0; j < out; ++j) {
            const double* wj = wv + static_cast<std::size_t>(j) * in;
            double acc = bv[j];
            for (int k = 0; k < in; ++k) {
                acc += xi[k] * wj[k];
            }
            zi[j] = acc;
        }
    }
    return z;
}

Tensor column_sums(const Tensor& m) {
    Tensor out({m.cols()});
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            out[j] += m.at(i, j);
        }
    }
    return out;
}

Tensor relu_backward(const Tensor& dx, const Tensor& pre_activation) {
    Tensor out = dx;
    auto ov = out.data();
    auto pv = pre_activation.data();
    for (std::int64_t i = 0; i < out.size(); ++i) {
        if (pv[static_cast<std::size_t>(i)] <= 0.0) {
            ov[static_cast<std::size_t>(i)] = 0.0;
        }
    }
    return out;
}

}  // namespace

std::string Model::weight_name(int layer) { return "layer" + std::to_string(layer) + ".weight"; }
std::string Model::bias_name(int layer) { return "layer" + std::to_string(layer) + ".bias"; }
std::string Model::lora_a_name(int layer) { return "layer" + std::to_string(layer) + ".lora_a"; }
std::string Model::lora_b_name(int layer) { return "layer" + std::to_string(layer) + ".lora_b"; }

Model::Model(ModelConfig config) : config_(std::move(config)) {
    if (config_.input_dim <= 0 || config_.num_classes <= 0) {
        throw std::invalid_argument("ModelConfig: input_dim and num_classes must be positive");
    }
    for (int h : config_.hidden_dims) {
        if (h <= 0) {
            throw std::invalid_argument("ModelConfig: hidden dimensions must be positive");
        }
    }
    if (config_.adapter_rank < 0) {
        throw std::invalid_argument("ModelConfig: adapter_rank must be nonnegative");
    }
    if (config_.init_std <= 0.0) {
        throw std::invalid_argument("ModelConfig: init_std must be positive");
    }
    layer_dims_.push_back(config_.input_dim);
    layer_dims_.insert(layer_dims_.end(), config_.hidden_dims.begin(), config_.hidden_dims.end());
    layer_dims_.push_back(config_.num_classes);
    if (config_.adapter_rank > 0) {
        for (int l = 0; l < num_layers(); ++l) {
            const int fan_in = layer_dims_[static_cast<std::size_t>(l)];
            const int fan_out = layer_dims_[static_cast<std::size_t>(l) + 1];
            if (config_.adapter_rank > std::min(fan_in, fan_out)) {
                throw std::invalid_argument(
                    "ModelConfig: adapter_rank " + std::to_string(config_.adapter_rank) +
                    " exceeds min(fan_in, fan_out) = " +
                    std::to_string(std::min(fan_in, fan_out)) + " of layer " + std::to_string(l));
            }
        }
    }
}

ParameterSet Model::init() const {
    Rng rng(config_.seed);
    ParameterSet params;
    const bool adapters = adapter_mode();
    for (int l = 0; l < num_layers(); ++l) {
        const int in = layer_dims_[static_cast<std::size_t>(l)];
        const int out = layer_dims_[static_cast<std::size_t>(l) + 1];
        params.insert(weight_name(l), gaussian(rng, {out, in}, 0.0, config_.init_std), !adapters);
        params.insert(bias_name(l), Tensor({out}), !adapters);
        if (adapters) {
            const int r = config_.adapter_rank;
            params.insert(lora_a_name(l), gaussian(rng, {r, in}, 0.0, config_.init_std), true);
            params.insert(lora_b_name(l), Tensor({out, r}), true);  // zero: W_eff == W0 at start
        }
    }
    return params;
}

Tensor Model::effective_weight(const ParameterSet& params, int layer) const {
    const Tensor& base = params.at(weight_name(layer));
    if (!adapter_mode()) {
        return base;
    }
    Tensor delta = matmul(params.at(lora_b_name(layer)), params.at(lora_a_name(layer)));
    return axpy(1.0, delta, base);
}

void Model::validate_batch(const Batch& batch) const {
    if (batch.empty()) {
        throw std::invalid_argument("Model: batch must contain at least one sample");
    }
    if (batch.inputs.shape().size() != 2 || batch.inputs.cols() != config_.input_dim ||
        batch.inputs.rows() != batch.size()) {
        throw std::invalid_argument("Model: batch inputs must be [n x input_dim], got " +
                                    shape_string(batch.inputs));
    }
}

Tensor Model::logits(const ParameterSet& params, const Batch& batch) const {
    validate_batch(batch);
    Tensor x = batch.inputs;
    for (int l = 0; l < num_layers(); ++l) {
        Tensor z = affine(x, effective_weight(params, l), params.at(bias_name(l)));
        x = (l + 1 < num_layers()) ? relu(z) : std::move(z);
    }
    return x;
}

LossGrad Model::loss_and_grad(const ParameterSet& params, const Batch& batch) const {
    validate_batch(batch);
    const int layers = num_layers();

    // Forward, keeping layer inputs and pre-activations for the backward pass.
    std::vector<Tensor> inputs;       // x fed to each layer
    std::vector<Tensor> pre_acts;     // z of each layer
    std::vector<Tensor> eff_weights;  // W_eff of each layer
    inputs.reserve(static_cast<std::size_t>(layers));
    Tensor x = batch.inputs;
    for (int l = 0; l < layers; ++l) {
        eff_weights.push_back(effective_weight(params, l));
        inputs.push_back(x);
        Tensor z = affine(x, eff_weights.back(), params.at(bias_name(l)));
        if (l + 1 < layers) {
            x = relu(z);
        }
        pre_acts.push_back(std::move(z));
    }

    auto ce = softmax_cross_entropy(pre_acts.back(), batch.labels);

    LossGrad result;
    result.loss = ce.loss;
    Tensor dz = std::move(ce.dlogits);
    for (int l = layers - 1; l >= 0; --l) {
        Tensor dw = matmul(transpose(dz), inputs[static_cast<std::size_t>(l)]);  // [out x in]
        if (adapter_mode()) {
            const Tensor& a = params.at(lora_a_name(l));
            const Tensor& b = params.at(lora_b_name(l));
            result.grads.entries[lora_a_name(l)] = matmul(transpose(b), dw);
            result.grads.entries[lora_b_name(l)] = matmul(dw, transpose(a));
        } else {
            result.grads.entries[weight_name(l)] = std::move(dw);
            result.grads.entries[bias_name(l)] = column_sums(dz);
        }
        if (l > 0) {
            Tensor dx = matmul(dz, eff_weights[static_cast<std::size_t>(l)]);  // [n x in]
            dz = relu_backward(dx, pre_acts[static_cast<std::size_t>(l) - 1]);
        }
    }
    return result;
}

double Model::accuracy(const ParameterSet& params, const Batch& eval_set) const {
    if (eval_set.empty()) {
        throw std::invalid_argument("Model::accuracy: eval set must be nonempty");
    }
    Tensor scores = logits(params, eval_set);
    int correct = 0;
    for (int i = 0; i < scores.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < scores.cols(); ++c) {
            if (scores.at(i, c) > scores.at(i, best)) {
                best = c;  // strict > keeps ties at the lowest class index
            }
        }
        if (best == eval_set.labels[static_cast<std::size_t>(i)]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(scores.rows());
}

}  // namespace gradguide

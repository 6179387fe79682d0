#include "gradguide/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gradguide/rng.hpp"

namespace gradguide {

namespace {

std::int64_t element_count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) {
            throw std::invalid_argument("Tensor: shape dimensions must be positive");
        }
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(element_count(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (element_count(shape_) != static_cast<std::int64_t>(data_.size())) {
        throw std::invalid_argument("Tensor: data length does not match shape");
    }
}

int Tensor::rows() const {
    if (shape_.size() != 2) {
        throw std::invalid_argument("Tensor: rows() requires rank 2, got " + shape_string(*this));
    }
    return shape_[0];
}

int Tensor::cols() const {
    if (shape_.size() != 2) {
        throw std::invalid_argument("Tensor: cols() requires rank 2, got " + shape_string(*this));
    }
    return shape_[1];
}

double& Tensor::at(int r, int c) {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(c)];
}

double Tensor::at(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols()) +
                 static_cast<std::size_t>(c)];
}

std::string shape_string(const Tensor& t) {
    std::string s = "[";
    const auto& shape = t.shape();
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

double frobenius_norm(const Tensor& t) {
    double sum = 0.0;
    for (double v : t.data()) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

Tensor axpy(double a, const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) {
        throw std::invalid_argument("axpy: shape mismatch " + shape_string(x) + " vs " +
                                    shape_string(y));
    }
    Tensor out = y;
    auto xs = x.data();
    auto os = out.data();
    for (std::int64_t i = 0; i < x.size(); ++i) {
        os[static_cast<std::size_t>(i)] += a * xs[static_cast<std::size_t>(i)];
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a) + " and " +
                                    shape_string(b));
    }
    const int m = a.rows();
    const int k = a.cols();
    const int n = b.cols();
    Tensor out({m, n});
    // i-k-j order keeps the inner loop contiguous in b and out.
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = a.at(i, p);
            if (aip == 0.0) continue;
            for (int j = 0; j < n; ++j) {
                out.at(i, j) += aip * b.at(p, j);
            }
        }
    }
    return out;
}

Tensor transpose(const Tensor& m) {
    if (m.shape().size() != 2) {
        throw std::invalid_argument("transpose: requires rank 2, got " + shape_string(m));
    }
    Tensor out({m.cols(), m.rows()});
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            out.at(j, i) = m.at(i, j);
        }
    }
    return out;
}

Tensor relu(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.data()) {
        if (v < 0.0) v = 0.0;
    }
    return out;
}

CrossEntropyResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.shape().size() != 2) {
        throw std::invalid_argument("softmax_cross_entropy: logits must be rank 2, got " +
                                    shape_string(logits));
    }
    const int n = logits.rows();
    const int classes = logits.cols();
    if (static_cast<int>(labels.size()) != n) {
        throw std::invalid_argument("softmax_cross_entropy: label count does not match batch size");
    }
    for (int label : labels) {
        if (label < 0 || label >= classes) {
            throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(label) +
                                        " out of range [0, " + std::to_string(classes) + ")");
        }
    }

    CrossEntropyResult result;
    result.dlogits = Tensor({n, classes});
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
        double max_logit = logits.at(i, 0);
        for (int c = 1; c < classes; ++c) {
            max_logit = std::max(max_logit, logits.at(i, c));
        }
        double denom = 0.0;
        for (int c = 0; c < classes; ++c) {
            denom += std::exp(logits.at(i, c) - max_logit);
        }
        const double log_denom = std::log(denom) + max_logit;
        total += log_denom - logits.at(i, labels[static_cast<std::size_t>(i)]);
        for (int c = 0; c < classes; ++c) {
            const double p = std::exp(logits.at(i, c) - log_denom);
            result.dlogits.at(i, c) = p * inv_n;
        }
        result.dlogits.at(i, labels[static_cast<std::size_t>(i)]) -= inv_n;
    }
    result.loss = total * inv_n;
    return result;
}

Tensor gaussian(Rng& rng, std::vector<int> shape, double mean, double std) {
    if (std < 0.0) {
        throw std::invalid_argument("gaussian: std must be nonnegative");
    }
    Tensor out(std::move(shape));
    for (double& v : out.data()) {
        v = rng.gaussian(mean, std);
    }
    return out;
}

void check_finite(const Tensor& t, const std::string& context) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(context + ": non-finite entry " + std::to_string(v));
        }
    }
}

}  // namespace gradguide

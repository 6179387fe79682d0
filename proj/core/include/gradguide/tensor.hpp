#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gradguide {

class Rng;

/// Dense row-major tensor of 64-bit reals. No views, no strides, no
/// broadcasting; every operation returns a fresh value.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    const std::vector<int>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    // 2-D accessors; rows()/cols() require rank 2.
    int rows() const;
    int cols() const;
    double& at(int r, int c);
    double at(int r, int c) const;

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool operator==(const Tensor& other) const = default;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::string shape_string(const Tensor& t);

/// sqrt of the sum of squared entries; 0 iff all entries are 0.
double frobenius_norm(const Tensor& t);

/// a*x + y elementwise; x and y must share a shape.
Tensor axpy(double a, const Tensor& x, const Tensor& y);

/// Standard 2-D matrix product [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& m);

Tensor relu(const Tensor& t);

struct CrossEntropyResult {
    double loss = 0.0;
    Tensor dlogits;  // exact analytic gradient of the mean-reduced loss
};

/// Mean softmax cross-entropy over the batch. logits is [n x C]; labels
/// holds one class index per row, each in [0, C).
CrossEntropyResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Tensor of i.i.d. Gaussian(mean, std*std) draws; advances rng.
Tensor gaussian(Rng& rng, std::vector<int> shape, double mean, double std);

void check_finite(const Tensor& t, const std::string& context);

}  // namespace gradguide

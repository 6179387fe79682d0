#include "gradguide/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gradguide {

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ull;
    return mix64(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::next_below(std::uint64_t bound) {
    if (bound == 0) {
        throw std::invalid_argument("Rng::next_below: bound must be positive");
    }
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) {
            return r % bound;
        }
    }
}

double Rng::gaussian(double mean, double std) {
    if (std < 0.0) {
        throw std::invalid_argument("Rng::gaussian: std must be nonnegative");
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + std * radius * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::bernoulli(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("Rng::bernoulli: alpha must lie in [0, 1], got " +
                                    std::to_string(alpha));
    }
    return uniform() < alpha ? 1 : 0;
}

Rng Rng::split(std::uint64_t stream) const {
    std::uint64_t derived = mix64(seed_ + 0x9E3779B97F4A7C15ull * (stream + 1));
    return Rng(mix64(derived ^ 0x632BE59BD9B4E019ull));
}

}  // namespace gradguide

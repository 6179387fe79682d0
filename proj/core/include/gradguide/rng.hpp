#pragma once

#include <cstdint>
#include <vector>

namespace gradguide {

/// Deterministic counter-based generator (SplitMix64). Owned by the caller
/// and passed explicitly; identical seed gives an identical stream.
/// split() derives an independent substream from the construction seed, so
/// module-local draws never perturb each other.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();

    /// Unbiased uniform integer in [0, bound); bound must be positive.
    std::uint64_t next_below(std::uint64_t bound);

    /// Box-Muller draw; each call consumes exactly two uniforms.
    double gaussian(double mean, double std);

    /// 1 with probability alpha, 0 otherwise; alpha must lie in [0, 1].
    int bernoulli(double alpha);

    /// Independent substream keyed by (construction seed, stream id).
    Rng split(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    bool operator==(const Rng& other) const = default;

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace gradguide

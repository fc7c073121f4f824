#pragma once

#include <cstddef>
#include <cstdint>

namespace coatsynth {

/// Counter-based generator: output i of stream s under seed k is a pure function of (k, s, i),
/// so results never depend on platform, thread count, or draw interleaving between streams.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::uint64_t counter() const { return counter_; }

    std::uint64_t next_u64();
    /// Uniform in [0,1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform in (0,1); never returns 0.
    double uniform_open();
    /// Uniform integer in [0, n). n must be > 0.
    std::size_t index(std::size_t n);
    bool bernoulli(double p) { return uniform() < p; }
    /// Standard normal via Box-Muller (one value per call, no cached pair).
    double normal();

    /// Independent child generator keyed by (seed, stream, tag).
    Rng derive(std::uint64_t tag) const;

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace coatsynth

#pragma once

#include <cstdint>

#include "coatsynth/core.hpp"

namespace coatsynth {

/// Lattice value noise with quintic interpolation. Output in [0,1].
/// Pure function of (seed, position); no tables, so any seed is free to construct.
class ValueNoise {
public:
    explicit ValueNoise(std::uint64_t seed = 0) : seed_(seed) {}

    double operator()(double x, double y) const;
    double operator()(const Vec3& p) const;

    /// Sum of `octaves` layers at doubling frequency and halving weight, renormalized to [0,1].
    double fractal(double x, double y, int octaves) const;

    std::uint64_t seed() const { return seed_; }

private:
    double lattice(std::int64_t i, std::int64_t j, std::int64_t k) const;

    std::uint64_t seed_;
};

}  // namespace coatsynth

#include "coatsynth/noise.hpp"

#include <cmath>

#include "coatsynth/rng.hpp"

namespace coatsynth {

namespace {
double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }
}  // namespace

double ValueNoise::lattice(std::int64_t i, std::int64_t j, std::int64_t k) const {
    std::uint64_t h = mix64(seed_ ^ static_cast<std::uint64_t>(i) * 0x8CB92BA72F3D8DD7ull);
    h = mix64(h ^ static_cast<std::uint64_t>(j) * 0xABC98388FB8FAC03ull);
    h = mix64(h ^ static_cast<std::uint64_t>(k) * 0x9FB21C651E98DF25ull);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double ValueNoise::operator()(double x, double y) const { return (*this)(Vec3{x, y, 0.0}); }

double ValueNoise::operator()(const Vec3& p) const {
    const double fx = std::floor(p.x);
    const double fy = std::floor(p.y);
    const double fz = std::floor(p.z);
    const auto i = static_cast<std::int64_t>(fx);
    const auto j = static_cast<std::int64_t>(fy);
    const auto k = static_cast<std::int64_t>(fz);
    const double tx = fade(p.x - fx);
    const double ty = fade(p.y - fy);
    const double tz = fade(p.z - fz);

    auto lerp1 = [](double a, double b, double t) { return a + (b - a) * t; };
    const double c00 = lerp1(lattice(i, j, k), lattice(i + 1, j, k), tx);
    const double c10 = lerp1(lattice(i, j + 1, k), lattice(i + 1, j + 1, k), tx);
    const double c01 = lerp1(lattice(i, j, k + 1), lattice(i + 1, j, k + 1), tx);
    const double c11 = lerp1(lattice(i, j + 1, k + 1), lattice(i + 1, j + 1, k + 1), tx);
    return lerp1(lerp1(c00, c10, ty), lerp1(c01, c11, ty), tz);
}

double ValueNoise::fractal(double x, double y, int octaves) const {
    double sum = 0.0;
    double weight = 1.0;
    double total = 0.0;
    double freq = 1.0;
    for (int o = 0; o < octaves; ++o) {
        sum += weight * (*this)(Vec3{x * freq, y * freq, 17.0 * o});
        total += weight;
        weight *= 0.5;
        freq *= 2.0;
    }
    return total > 0.0 ? sum / total : 0.0;
}

}  // namespace coatsynth

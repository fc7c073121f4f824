#include "coatsynth/rng.hpp"

#include <cmath>
#include <numbers>

namespace coatsynth {

namespace {
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ull;
constexpr std::uint64_t kCounterStep = 0x9E3779B97F4A7C15ull;
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(seed) ^ mix64(stream * kStreamSalt + 1)) {}

std::uint64_t Rng::next_u64() {
    const std::uint64_t out = mix64(mix64(key_ + counter_ * kCounterStep) ^ key_);
    ++counter_;
    return out;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform_open() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) {
    // Lemire-style multiply-shift; bias is below 2^-64 * n and irrelevant here.
    const unsigned __int128 wide = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<std::size_t>(wide >> 64);
}

double Rng::normal() {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::derive(std::uint64_t tag) const { return Rng(mix64(seed_ ^ mix64(tag + 0x632BE59BD9B4E019ull)), stream_ * 31 + tag); }

}  // namespace coatsynth

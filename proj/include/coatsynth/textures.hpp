#pragma once

#include <cstdint>
#include <string>

#include "coatsynth/core.hpp"

namespace coatsynth {

/// Procedural albedo pattern; regenerating from the same spec is bit-exact.
struct PatternSpec {
    /// "checker", "stripes", "dots", "gradient" or "noise".
    std::string kind = "checker";
    int size = 64;
    /// Pattern repeats across the texture.
    int cells = 8;
    Rgb color_a{0.9, 0.9, 0.9};
    Rgb color_b{0.1, 0.1, 0.1};
    std::uint64_t seed = 0;

    bool operator==(const PatternSpec&) const = default;
};

/// Throws ConfigError for unknown kinds or non-positive sizes.
ColorImage render_pattern(const PatternSpec& spec);

/// True for kinds with visible structure (everything except smooth gradients).
bool is_patterned(const std::string& kind);

}  // namespace coatsynth

#include "coatsynth/textures.hpp"

#include <cmath>

#include "coatsynth/noise.hpp"

namespace coatsynth {

ColorImage render_pattern(const PatternSpec& spec) {
    if (spec.size <= 0 || spec.cells <= 0) throw ConfigError("pattern size and cells must be positive");
    const int n = spec.size;
    ColorImage img(n, n);
    const ValueNoise noise(spec.seed);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double u = (x + 0.5) / n * spec.cells;
            const double v = (y + 0.5) / n * spec.cells;
            double t = 0.0;
            if (spec.kind == "checker") {
                t = ((static_cast<int>(std::floor(u)) + static_cast<int>(std::floor(v))) & 1) ? 1.0 : 0.0;
            } else if (spec.kind == "stripes") {
                t = (static_cast<int>(std::floor(u + v)) & 1) ? 1.0 : 0.0;
            } else if (spec.kind == "dots") {
                const double du = u - std::floor(u) - 0.5;
                const double dv = v - std::floor(v) - 0.5;
                t = (du * du + dv * dv) < 0.09 ? 1.0 : 0.0;
            } else if (spec.kind == "gradient") {
                t = (x + 0.5) / n;
            } else if (spec.kind == "noise") {
                t = noise.fractal(u, v, 3) > 0.5 ? 1.0 : 0.0;
            } else {
                throw ConfigError("unknown pattern kind '" + spec.kind + "'");
            }
            img.set(x, y, lerp(spec.color_a, spec.color_b, t));
        }
    }
    return img;
}

bool is_patterned(const std::string& kind) { return kind != "gradient"; }

}  // namespace coatsynth

#include "coatsynth/baselines.hpp"

#include <algorithm>

namespace coatsynth {

void BlendIfThresholds::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!(in01(lo0) && in01(lo1) && in01(hi0) && in01(hi1))) {
        throw InvalidThreshold("blend-if thresholds must lie in [0,1]");
    }
    if (!(lo0 < lo1 && lo1 <= hi0 && hi0 < hi1)) {
        throw InvalidThreshold("blend-if thresholds must satisfy lo0 < lo1 <= hi0 < hi1");
    }
}

double BlendIfThresholds::weight(double L) const {
    // Exact zeros at the boundaries so suppressed pixels keep the base bit-for-bit.
    if (L <= lo0 || L >= hi1) return 0.0;
    return smoothstep(lo0, lo1, L) * (1.0 - smoothstep(hi0, hi1, L));
}

ColorImage blend_if(const ColorImage& base, const ColorImage& coat_layer, const ScalarMap& mask,
                    const BlendIfThresholds& thresholds) {
    thresholds.validate();
    require_same_size(base, coat_layer, "blend_if: base vs coat");
    require_same_size(base, mask, "blend_if: base vs mask");
    ColorImage out = base;
    for (std::size_t p = 0; p < base.pixel_count(); ++p) {
        if (mask[p] <= 0.0) continue;
        const Rgb b = base.pixel(p);
        const double w = mask[p] * thresholds.weight(luminance(b));
        if (w <= 0.0) continue;
        out.set_pixel(p, b + (coat_layer.pixel(p) - b) * w);
    }
    return out;
}

Rgb set_lum(const Rgb& c, double target) {
    const double d = target - luminance(c);
    return {c.x + d, c.y + d, c.z + d};
}

Rgb clip_color(const Rgb& c) {
    const double l = luminance(c);
    const double n = std::min({c.x, c.y, c.z});
    const double x = std::max({c.x, c.y, c.z});
    const Rgb gray{l, l, l};
    // No chromatic color at or beyond the gamut's gray endpoints.
    if (l <= 0.0 || l >= 1.0) return gray;
    Rgb out = c;
    if (n < 0.0) out = gray + (out - gray) * (l / (l - n));
    if (x > 1.0) out = gray + (out - gray) * ((1.0 - l) / (x - l));
    return out;
}

ColorImage color_blend(const ColorImage& base, const ColorImage& coat_layer, const ScalarMap& mask) {
    require_same_size(base, coat_layer, "color_blend: base vs coat");
    require_same_size(base, mask, "color_blend: base vs mask");
    ColorImage out = base;
    for (std::size_t p = 0; p < base.pixel_count(); ++p) {
        if (mask[p] <= 0.0) continue;
        const Rgb b = base.pixel(p);
        const Rgb blended = clip_color(set_lum(coat_layer.pixel(p), luminance(b)));
        // Fractional mask values feather linearly, like a soft layer mask.
        out.set_pixel(p, mask[p] >= 1.0 ? blended : lerp(b, blended, mask[p]));
    }
    return out;
}

}  // namespace coatsynth

#pragma once

#include "coatsynth/core.hpp"

namespace coatsynth {

/// Split-slider thresholds on the underlying layer's luminance. The coat fades in over
/// [lo0, lo1] and fades out over [hi0, hi1].
struct BlendIfThresholds {
    double lo0 = 0.0;
    double lo1 = 0.25;
    double hi0 = 0.75;
    double hi1 = 1.0;

    /// Throws InvalidThreshold unless lo0 < lo1 <= hi0 < hi1, all in [0,1].
    void validate() const;
    /// Coat weight at base luminance L.
    double weight(double L) const;
};

/// "Blend If" compositing driven by base luminance.
ColorImage blend_if(const ColorImage& base, const ColorImage& coat_layer, const ScalarMap& mask,
                    const BlendIfThresholds& thresholds = {});

/// Non-separable "Color" blend: hue and saturation from the coat, luminance from the base.
ColorImage color_blend(const ColorImage& base, const ColorImage& coat_layer, const ScalarMap& mask);

/// Shift all components so the luminance becomes `target`.
Rgb set_lum(const Rgb& c, double target);
/// Pull out-of-gamut components back into [0,1] along the gray axis, keeping luminance.
Rgb clip_color(const Rgb& c);

}  // namespace coatsynth

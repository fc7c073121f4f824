#include <doctest.h>

#include <algorithm>

#include "coatsynth/baselines.hpp"
#include "coatsynth/rng.hpp"

using namespace coatsynth;

namespace {

ColorImage random_image(Rng& rng, int w, int h) {
    ColorImage img(w, h);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

ScalarMap random_mask(Rng& rng, int w, int h) {
    ScalarMap m(w, h);
    for (double& v : m.data()) v = rng.bernoulli(0.3) ? 0.0 : (rng.bernoulli(0.5) ? 1.0 : rng.uniform());
    return m;
}

}  // namespace

TEST_CASE("blend-if weights") {
    const BlendIfThresholds t;
    CHECK(t.weight(0.0) == 0.0);
    CHECK(t.weight(1.0) == 0.0);
    CHECK(t.weight(0.5) == 1.0);
    // Halfway through the lower ramp: smoothstep(0, 0.25, 0.125) = 0.5.
    CHECK(t.weight(0.125) == doctest::Approx(0.5));
    CHECK(t.weight(0.875) == doctest::Approx(0.5));
    CHECK_THROWS_AS((BlendIfThresholds{0.3, 0.2, 0.75, 1.0}.validate()), InvalidThreshold);
    CHECK_THROWS_AS((BlendIfThresholds{0.0, 0.25, 0.75, 1.5}.validate()), InvalidThreshold);
    CHECK_THROWS_AS((BlendIfThresholds{0.0, 0.8, 0.75, 1.0}.validate()), InvalidThreshold);
    CHECK_NOTHROW((BlendIfThresholds{0.0, 0.5, 0.5, 1.0}.validate()));
}

TEST_CASE("blend-if examples") {
    ColorImage base(3, 1), coat(3, 1, Rgb{0.9, 0.1, 0.3});
    base.set(0, 0, {0, 0, 0});
    base.set(1, 0, {0.5, 0.5, 0.5});
    base.set(2, 0, {1, 1, 1});
    const ColorImage out = blend_if(base, coat, ScalarMap(3, 1, 1.0));
    CHECK(out.at(0, 0) == base.at(0, 0));
    CHECK(length(out.at(1, 0) - coat.at(1, 0)) < 1e-12);
    CHECK(out.at(2, 0) == base.at(2, 0));
    const ColorImage none = blend_if(base, coat, ScalarMap(3, 1, 0.0));
    CHECK(none == base);
    CHECK_THROWS_AS(blend_if(base, coat, ScalarMap(3, 1, 1.0), {0.5, 0.4, 0.6, 0.7}), InvalidThreshold);
    CHECK_THROWS_AS(blend_if(base, ColorImage(2, 1), ScalarMap(3, 1, 1.0)), PreconditionError);
}

TEST_CASE("blend-if properties on random images") {
    Rng rng(11);
    const BlendIfThresholds t{0.1, 0.3, 0.6, 0.9};
    for (int trial = 0; trial < 20; ++trial) {
        const ColorImage base = random_image(rng, 16, 16), coat = random_image(rng, 16, 16);
        const ScalarMap mask = random_mask(rng, 16, 16);
        const ColorImage out = blend_if(base, coat, mask, t);
        for (std::size_t p = 0; p < base.pixel_count(); ++p) {
            const Rgb b = base.pixel(p), c = coat.pixel(p), o = out.pixel(p);
            const double L = luminance(b);
            if (L <= t.lo0 || L >= t.hi1 || mask[p] == 0.0) CHECK(o == b);
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(o[k] >= std::min(b[k], c[k]) - 1e-15);
                CHECK(o[k] <= std::max(b[k], c[k]) + 1e-15);
            }
        }
    }
}

TEST_CASE("color blend examples") {
    const Rgb base{0.2, 0.6, 0.4};
    const double L = luminance(base);
    ColorImage b(1, 1, base), gray(1, 1, Rgb{0.7, 0.7, 0.7});
    const ScalarMap on(1, 1, 1.0);
    const Rgb g = color_blend(b, gray, on).at(0, 0);
    CHECK(g.x == doctest::Approx(L));
    CHECK(g.y == doctest::Approx(L));
    CHECK(g.z == doctest::Approx(L));

    // luminance(1,0,0) = 0.30, so a base at exactly that luminance leaves red untouched.
    ColorImage b30(1, 1, Rgb{0.3, 0.3, 0.3}), red(1, 1, Rgb{1, 0, 0});
    const Rgb r = color_blend(b30, red, on).at(0, 0);
    CHECK(r.x == doctest::Approx(1.0));
    CHECK(r.y == doctest::Approx(0.0));
    CHECK(r.z == doctest::Approx(0.0));

    const Rgb same = color_blend(b, b, on).at(0, 0);
    CHECK(same.x == doctest::Approx(base.x));
    CHECK(same.y == doctest::Approx(base.y));
    CHECK(same.z == doctest::Approx(base.z));
}

TEST_CASE("set_lum and clip_color") {
    const Rgb c{0.9, 0.2, 0.1};
    CHECK(luminance(set_lum(c, 0.1)) == doctest::Approx(0.1));
    // Out of gamut below: n < 0 pulls toward gray keeping luminance.
    const Rgb low{-0.2, 0.3, 0.4};
    const Rgb clipped = clip_color(low);
    CHECK(clipped.x >= -1e-12);
    CHECK(luminance(clipped) == doctest::Approx(luminance(low)));
    const Rgb high{1.4, 0.5, 0.2};
    const Rgb ch = clip_color(high);
    CHECK(ch.x <= 1.0 + 1e-12);
    CHECK(luminance(ch) == doctest::Approx(luminance(high)));
    // In-gamut colors pass through.
    CHECK(clip_color(Rgb{0.3, 0.4, 0.5}) == Rgb{0.3, 0.4, 0.5});
}

TEST_CASE("color blend preserves luminance and is identity off-mask") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const ColorImage base = random_image(rng, 16, 16), coat = random_image(rng, 16, 16);
        const ScalarMap mask = random_mask(rng, 16, 16);
        const ColorImage out = color_blend(base, coat, mask);
        for (std::size_t p = 0; p < base.pixel_count(); ++p) {
            if (mask[p] == 0.0) {
                CHECK(out.pixel(p) == base.pixel(p));
            } else {
                CHECK(std::abs(luminance(out.pixel(p)) - luminance(base.pixel(p))) < 1e-6);
            }
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(out.pixel(p)[k] >= -1e-12);
                CHECK(out.pixel(p)[k] <= 1.0 + 1e-12);
            }
        }
    }
}

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coatsynth/dataset.hpp"
#include "coatsynth/render.hpp"
#include "test_support.hpp"

using namespace coatsynth;
using coatsynth::testing::local_normal_variance;
using coatsynth::testing::masked_mean_abs_diff;
using coatsynth::testing::masked_psnr;

namespace {

/// Flat patch seen head-on from above under a unit directional light along the view axis.
SceneSpec head_on_patch(double albedo, double roughness) {
    SceneSpec s;
    s.object.kind = PrimitiveKind::Plane;
    s.object.size = 1.0;
    s.object.material.albedo = Rgb{albedo, albedo, albedo};
    s.object.material.roughness = roughness;
    s.object.material.metalness = 0.0;
    s.floor.enabled = false;
    s.lights = {{Light::Kind::Directional, {0, 1, 0}, {1, 1, 1}}};
    s.ambient = {0, 0, 0};
    s.camera = {{0, 3, 0}, {0, 0, 0}, 30.0, 33, 33};
    s.detail_amplitude = 0.0;
    return s;
}

SceneSpec small_reference(int side = 96) { return make_reference_scene(side); }

}  // namespace

TEST_CASE("lambertian patch at normal incidence") {
    for (double roughness : {1.0, 0.5}) {
        const ChannelStack st = render_uncoated(head_on_patch(0.5, roughness));
        const Rgb shading = st.shading.at(16, 16);
        CHECK(shading.x == doctest::Approx(1.0));
        CHECK(shading.y == doctest::Approx(1.0));
        // At normal incidence h = n = v = l: D = 1/(πα²), G = 1, F = F0 = 0.04, and the
        // Cook-Torrance term times n·l is D·G·F/4.
        const double alpha = roughness * roughness;
        const double spec = (1.0 / (std::numbers::pi * alpha * alpha)) * 0.04 / 4.0;
        const Rgb img = st.image.at(16, 16);
        CHECK(img.x == doctest::Approx(0.5 + spec).epsilon(1e-9));
        if (roughness == 1.0) CHECK(spec < 0.05);
        CHECK(st.object_mask.at(16, 16) == 1.0);
        CHECK(st.depth.at(16, 16) == doctest::Approx(3.0));
        // Camera-space normal of an upward patch viewed from above points at the camera.
        CHECK(st.normals.at(16, 16).z == doctest::Approx(1.0));
    }
}

TEST_CASE("background conventions") {
    SceneSpec s = head_on_patch(0.5, 0.5);
    s.ambient = {0.2, 0.1, 0.05};
    s.camera.vfov_deg = 120.0;
    const ChannelStack st = render_uncoated(s);
    // The corner ray misses the unit patch.
    CHECK(st.object_mask.at(0, 0) == 0.0);
    CHECK(std::isinf(st.depth.at(0, 0)));
    CHECK(st.normals.at(0, 0) == Vec3{0, 0, 0});
    CHECK(st.image.at(0, 0) == Rgb{0.2, 0.1, 0.05});
}

TEST_CASE("residual identity and energy sanity") {
    const SceneSpec scene = small_reference(64);
    const ChannelStack st = render_uncoated(scene);
    for (std::size_t p = 0; p < st.image.pixel_count(); ++p) {
        CHECK(st.residual.pixel(p) == st.image.pixel(p) - hadamard(st.albedo.pixel(p), st.shading.pixel(p)));
    }
    SceneSpec dark = scene;
    for (auto& l : dark.lights) l.intensity = {0, 0, 0};
    dark.ambient = {0, 0, 0};
    const ChannelStack black = render_uncoated(dark);
    for (double v : black.image.data()) CHECK(v == 0.0);
}

TEST_CASE("rendering is deterministic across thread counts") {
    const SceneSpec scene = small_reference(48);
    set_thread_count(1);
    const ChannelStack a = render_uncoated(scene);
    set_thread_count(4);
    const ChannelStack b = render_uncoated(scene);
    set_thread_count(0);
    CHECK(a.image == b.image);
    CHECK(a.normals == b.normals);
    CHECK(a.depth.data().size() == b.depth.data().size());
    for (std::size_t p = 0; p < a.depth.pixel_count(); ++p) {
        CHECK((a.depth[p] == b.depth[p] || (std::isinf(a.depth[p]) && std::isinf(b.depth[p]))));
    }
}

TEST_CASE("ggx building blocks") {
    for (double r : {0.2, 0.5, 1.0}) {
        const double a = r * r;
        CHECK(ggx_distribution(1.0, r) == doctest::Approx(1.0 / (std::numbers::pi * a * a)));
        CHECK(smith_g1(1.0, r) == doctest::Approx(1.0));
        // Normalization: the projected microfacet density integrates to 1 over the hemisphere.
        const int n = 20000;
        double integral = 0.0;
        for (int i = 0; i < n; ++i) {
            const double theta = (i + 0.5) / n * (std::numbers::pi / 2);
            const double c = std::cos(theta);
            integral += ggx_distribution(c, r) * c * std::sin(theta) * 2.0 * std::numbers::pi * (std::numbers::pi / 2 / n);
        }
        CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
    }
    const Rgb f0{0.04, 0.5, 1.0};
    CHECK(fresnel_schlick(f0, 1.0) == f0);
    const Rgb grazing = fresnel_schlick(f0, 0.0);
    CHECK(grazing.x == doctest::Approx(1.0));
    CHECK(grazing.y == doctest::Approx(1.0));
    // Below the horizon there is no specular.
    CHECK(specular_brdf({0, 0, 1}, {0, 0, 1}, {0, 0, -1}, f0, 0.5) == Rgb{});
}

TEST_CASE("layer compositing and transmission") {
    static_assert(effective_transmission(1.0, 0.0) == 1.0);
    static_assert(effective_transmission(1.0, 1.0) == 0.0);
    static_assert(effective_transmission(0.0, 0.3) == 0.0);
    CHECK(effective_transmission(1.0, 0.25) == doctest::Approx(0.75));
    const Rgb base{0.2, 0.4, 0.6}, coat{0.9, 0.1, 0.0};
    CHECK(layer_composite(base, coat, 0.3, 0.0) == base);
    CHECK(layer_composite(base, coat, 1.0, 1.0) == base);
    CHECK(length(layer_composite(base, coat, 0.0, 1.0) - coat) < 1e-12);
    const Rgb half = layer_composite(base, coat, 0.5, 1.0);
    CHECK(half.x == doctest::Approx(0.55));
}

TEST_CASE("shading normal interpolation") {
    const Vec3 detail = normalize(Vec3{0.3, 0.1, 1.0});
    const Vec3 smooth{0, 0, 1};
    CHECK(shading_normal(detail, smooth, 0.0) == detail);
    CHECK(shading_normal(detail, smooth, 1.0) == smooth);
    const Vec3 mid = shading_normal(detail, smooth, 0.5);
    CHECK(length(mid) == doctest::Approx(1.0));
    CHECK(dot(mid, smooth) > dot(detail, smooth));
    CHECK_THROWS_AS(shading_normal({0, 0, 1}, {0, 0, -1}, 0.5), DegenerateNormal);
}

TEST_CASE("coated render invariants") {
    const SceneSpec scene = small_reference(96);
    const ChannelStack plain = render_uncoated(scene);
    Rng rng(3);
    CoatingSpec coat;
    coat.mask = generate_mask(plain, rng, 0.5);
    coat.albedo = Rgb{0.8, 0.2, 0.2};

    SUBCASE("zero-thickness clear coat is a no-op up to the coat's specular") {
        coat.traits = {0.5, 0.0, 1.0, 0.0};
        const ChannelStack c = render_coated(scene, coat);
        CHECK(masked_psnr(c.image, plain.image, coat.mask) >= 40.0);
        for (std::size_t p = 0; p < coat.mask.pixel_count(); ++p) {
            if (coat.mask[p] == 0.0) CHECK(c.image.pixel(p) == plain.image.pixel(p));
        }
    }
    SUBCASE("geometry channels unchanged") {
        coat.traits = {0.3, 1.0, 0.0, 0.7};
        const ChannelStack c = render_coated(scene, coat);
        CHECK(c.object_mask == plain.object_mask);
        for (std::size_t p = 0; p < c.depth.pixel_count(); ++p) {
            CHECK((c.depth[p] == plain.depth[p] || (std::isinf(c.depth[p]) && std::isinf(plain.depth[p]))));
        }
        for (std::size_t p = 0; p < c.image.pixel_count(); ++p) {
            CHECK(c.residual.pixel(p) == c.image.pixel(p) - hadamard(c.albedo.pixel(p), c.shading.pixel(p)));
        }
    }
    SUBCASE("thick opaque coat smooths normals") {
        coat.traits = {0.5, 0.0, 0.0, 1.0};
        const ChannelStack c = render_coated(scene, coat);
        CHECK(local_normal_variance(c.normals, coat.mask) < local_normal_variance(plain.normals, coat.mask));
    }
    SUBCASE("thicker clear coat departs further from the substrate") {
        double last = -1.0;
        for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            coat.traits = {0.5, 0.0, 1.0, t};
            const double d = masked_mean_abs_diff(render_coated(scene, coat).image, plain.image, coat.mask);
            CHECK(d >= last);
            last = d;
        }
    }
    SUBCASE("mask size must match the camera") {
        coat.mask = ScalarMap(10, 10, 1.0);
        CHECK_THROWS_AS(render_coated(scene, coat), PreconditionError);
    }
}

TEST_CASE("mask generation") {
    const ChannelStack plain = render_uncoated(small_reference(96));
    std::size_t silhouette = 0;
    for (double v : plain.object_mask.data()) silhouette += v > 0.0;
    for (double target : {0.35, 0.5, 0.8}) {
        Rng rng(42);
        const ScalarMap m = generate_mask(plain, rng, target);
        std::size_t covered = 0;
        for (std::size_t p = 0; p < m.pixel_count(); ++p) {
            CHECK((m[p] == 0.0 || m[p] == 1.0));
            if (m[p] > 0.0) {
                CHECK(plain.object_mask[p] > 0.0);
                ++covered;
            }
        }
        const double frac = static_cast<double>(covered) / static_cast<double>(silhouette);
        CHECK(std::abs(frac - target) <= 0.1 * target);
    }
    Rng a(42), b(42);
    CHECK(generate_mask(plain, a, 0.5) == generate_mask(plain, b, 0.5));
    Rng full(1);
    CHECK(generate_mask(plain, full, 1.0) == plain.object_mask);
    Rng bad(1);
    CHECK_THROWS_AS(generate_mask(plain, bad, 0.0), InvalidArgument);
    ChannelStack empty = plain;
    empty.object_mask = ScalarMap(96, 96, 0.0);
    CHECK_THROWS_AS(generate_mask(empty, bad, 0.5), EmptySceneError);
}

TEST_CASE("albedo projection") {
    const ChannelStack plain = render_uncoated(small_reference(48));
    CoatingSpec coat;
    coat.mask = plain.object_mask;
    coat.albedo = Rgb{0.1, 0.7, 0.3};
    const ColorImage proj = project_albedo(coat, plain);
    for (std::size_t p = 0; p < proj.pixel_count(); ++p) {
        CHECK(proj.pixel(p) == (coat.mask[p] > 0.0 ? Rgb{0.1, 0.7, 0.3} : Rgb{}));
    }
}

TEST_CASE("mesh sphere matches the analytic sphere silhouette") {
    SceneSpec a = small_reference(64);
    a.floor.enabled = false;
    a.detail_amplitude = 0.0;
    SceneSpec b = a;
    b.object.kind = PrimitiveKind::Mesh;
    b.object.mesh_source = "icosphere";
    const ChannelStack sa = render_uncoated(a), sb = render_uncoated(b);
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < sa.object_mask.pixel_count(); ++p) {
        inter += sa.object_mask[p] > 0 && sb.object_mask[p] > 0;
        uni += sa.object_mask[p] > 0 || sb.object_mask[p] > 0;
    }
    CHECK(static_cast<double>(inter) / static_cast<double>(uni) > 0.97);
}

TEST_CASE("scene validation") {
    SceneSpec s = small_reference(16);
    s.lights.clear();
    CHECK_THROWS_AS(render_uncoated(s), ConfigError);
    s = small_reference(16);
    s.camera.vfov_deg = 180.0;
    CHECK_THROWS_AS(render_uncoated(s), ConfigError);
    s = small_reference(16);
    s.detail_amplitude = 1.5;
    CHECK_THROWS_AS(render_uncoated(s), ConfigError);
    CHECK_THROWS_AS(resolve_mesh("teapot"), ConfigError);
}

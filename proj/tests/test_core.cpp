#include <doctest.h>

#include <atomic>
#include <cmath>
#include <set>

#include "coatsynth/core.hpp"
#include "coatsynth/noise.hpp"
#include "coatsynth/rng.hpp"

using namespace coatsynth;

TEST_CASE("luminance weights") {
    CHECK(luminance({1, 0, 0}) == doctest::Approx(0.30));
    CHECK(luminance({0, 1, 0}) == doctest::Approx(0.59));
    CHECK(luminance({0, 0, 1}) == doctest::Approx(0.11));
    CHECK(luminance({1, 1, 1}) == doctest::Approx(1.0));
    static_assert(luminance({0, 0, 0}) == 0.0);
}

TEST_CASE("smoothstep") {
    CHECK(smoothstep(0.0, 1.0, -1.0) == 0.0);
    CHECK(smoothstep(0.0, 1.0, 2.0) == 1.0);
    CHECK(smoothstep(0.0, 1.0, 0.5) == doctest::Approx(0.5));
    // t = 0.25: 3t² - 2t³
    CHECK(smoothstep(0.0, 0.25, 0.0625) == doctest::Approx(3 * 0.0625 - 2 * 0.015625));
    CHECK_THROWS_AS(smoothstep(0.5, 0.5, 0.1), InvalidThreshold);
    CHECK_THROWS_AS(smoothstep(0.6, 0.5, 0.1), InvalidThreshold);
}

TEST_CASE("srgb round trip") {
    for (double v = 0.0; v <= 1.0; v += 0.01) CHECK(srgb_decode(srgb_encode(v)) == doctest::Approx(v).epsilon(1e-12));
    CHECK(srgb_encode(0.0) == 0.0);
    CHECK(srgb_encode(1.0) == doctest::Approx(1.0));
    // Linear segment below the knee.
    CHECK(srgb_encode(0.001) == doctest::Approx(0.001 * 12.92));
}

TEST_CASE("image accessors and bilinear sampling") {
    ColorImage img(2, 1);
    img.set(0, 0, {0, 0, 0});
    img.set(1, 0, {1, 1, 1});
    // Texel centers at u = 0.25 and 0.75.
    CHECK(img.sample_bilinear(0.25, 0.5).x == doctest::Approx(0.0));
    CHECK(img.sample_bilinear(0.75, 0.5).x == doctest::Approx(1.0));
    CHECK(img.sample_bilinear(0.5, 0.5).x == doctest::Approx(0.5));
    // Wrapping: u = 1.25 is the same as 0.25.
    CHECK(img.sample_bilinear(1.25, 0.5).x == doctest::Approx(0.0));

    ScalarMap a(3, 2), b(2, 3);
    CHECK_THROWS_AS(require_same_size(a, b, "test"), PreconditionError);
    CHECK_NOTHROW(require_same_size(a, ScalarMap(3, 2), "test"));
}

TEST_CASE("trait validation names the field") {
    TraitVector t;
    CHECK_NOTHROW(t.validate());
    t.thickness = 1.5;
    try {
        t.validate();
        FAIL("expected throw");
    } catch (const InvalidArgument& e) {
        CHECK(std::string(e.what()).find("thickness") != std::string::npos);
    }
}

TEST_CASE("coating albedo lookup") {
    CoatingSpec c;
    c.albedo = Rgb{0.2, 0.3, 0.4};
    CHECK(c.is_uniform());
    CHECK(c.albedo_at(0.9, 0.1) == Rgb{0.2, 0.3, 0.4});
    c.albedo = ColorImage(4, 4, Rgb{0.7, 0.1, 0.1});
    CHECK_FALSE(c.is_uniform());
    CHECK(c.albedo_at(0.3, 0.6).x == doctest::Approx(0.7));
}

TEST_CASE("rng determinism and streams") {
    Rng a(42, 3), b(42, 3), c(42, 4), d(43, 3);
    std::vector<std::uint64_t> va, vb, vc, vd;
    for (int i = 0; i < 100; ++i) {
        va.push_back(a.next_u64());
        vb.push_back(b.next_u64());
        vc.push_back(c.next_u64());
        vd.push_back(d.next_u64());
    }
    CHECK(va == vb);
    CHECK(va != vc);
    CHECK(va != vd);
    CHECK(a.counter() == 100);

    Rng p(1), q(1);
    CHECK(p.derive(5).next_u64() == q.derive(5).next_u64());
    CHECK(p.derive(5).next_u64() != p.derive(6).next_u64());
}

TEST_CASE("rng distributions") {
    Rng rng(7);
    const int n = 200000;
    double sum = 0, sum2 = 0, nsum = 0, nsum2 = 0;
    std::array<int, 5> counts{};
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
        sum2 += u * u;
        const double z = rng.normal();
        nsum += z;
        nsum2 += z * z;
        ++counts[rng.index(5)];
        REQUIRE(rng.uniform_open() > 0.0);
    }
    // Uniform: mean 1/2, variance 1/12; tolerance ~5 standard errors.
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(sum2 / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12.0).epsilon(0.02));
    CHECK(std::abs(nsum / n) < 5.0 / std::sqrt(n));
    CHECK(nsum2 / n == doctest::Approx(1.0).epsilon(0.02));
    for (int c : counts) CHECK(std::abs(c - n / 5.0) < 5.0 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("mix64 is a bijection on a sample") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(mix64(i));
    CHECK(seen.size() == 10000);
}

TEST_CASE("value noise range and determinism") {
    const ValueNoise a(9), b(9), c(10);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const double x = i * 0.137, y = i * 0.071;
        const double v = a(x, y);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(v == b(x, y));
        const double f = a.fractal(x, y, 3);
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        const double v3 = a(Vec3{x, y, 0.3 * x});
        CHECK(v3 >= 0.0);
        CHECK(v3 <= 1.0);
        differs = differs || v != c(x, y);
    }
    CHECK(differs);
}

TEST_CASE("parallel_rows visits every row once for any thread count") {
    for (unsigned threads : {1u, 2u, 5u, 0u}) {
        set_thread_count(threads);
        std::vector<std::atomic<int>> hits(97);
        parallel_rows(97, [&](int r) { hits[static_cast<std::size_t>(r)]++; });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
    set_thread_count(0);
}

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "coatsynth/mesh.hpp"
#include "coatsynth/rng.hpp"

using namespace coatsynth;

namespace {

/// Cube [-1,1]³ where every face is split along the diagonal joining its two corners with an
/// even count of +1 coordinates. Each corner then touches exactly one triangle per adjacent face.
TriangleMesh symmetric_cube() {
    std::vector<Vec3> v;
    for (int i = 0; i < 8; ++i) v.push_back({i & 1 ? 1.0 : -1.0, i & 2 ? 1.0 : -1.0, i & 4 ? 1.0 : -1.0});
    auto index_of = [](const Vec3& p) {
        return static_cast<std::uint32_t>((p.x > 0 ? 1 : 0) | (p.y > 0 ? 2 : 0) | (p.z > 0 ? 4 : 0));
    };
    auto even = [](const Vec3& p) { return ((p.x > 0) + (p.y > 0) + (p.z > 0)) % 2 == 0; };
    std::vector<Face> faces;
    for (int axis = 0; axis < 3; ++axis) {
        for (double s : {-1.0, 1.0}) {
            const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
            std::array<Vec3, 4> q;
            const double uv[4][2] = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
            for (int k = 0; k < 4; ++k) {
                Vec3 p;
                p[static_cast<std::size_t>(axis)] = s;
                p[static_cast<std::size_t>(a1)] = uv[k][0];
                p[static_cast<std::size_t>(a2)] = uv[k][1];
                q[static_cast<std::size_t>(k)] = p;
            }
            Vec3 outward;
            outward[static_cast<std::size_t>(axis)] = s;
            if (dot(cross(q[1] - q[0], q[2] - q[0]), outward) < 0) std::swap(q[1], q[3]);
            // Split along whichever diagonal joins the even corners.
            const int start = even(q[0]) ? 0 : 1;
            const Vec3& d0 = q[static_cast<std::size_t>(start)];
            const Vec3& d1 = q[static_cast<std::size_t>(start + 2)];
            const Vec3& o0 = q[static_cast<std::size_t>(start + 1)];
            const Vec3& o1 = q[static_cast<std::size_t>((start + 3) % 4)];
            faces.push_back({index_of(d0), index_of(o0), index_of(d1)});
            faces.push_back({index_of(d0), index_of(d1), index_of(o1)});
        }
    }
    return TriangleMesh(v, faces);
}

}  // namespace

TEST_CASE("cube corner normals point along the diagonals") {
    const TriangleMesh cube = compute_vertex_normals(symmetric_cube());
    REQUIRE(cube.face_count() == 12);
    for (std::size_t i = 0; i < cube.vertex_count(); ++i) {
        const Vec3 p = cube.vertices()[i];
        const Vec3 expected = p / std::sqrt(3.0);
        const Vec3 n = cube.vertex_normals()[i];
        CHECK(n.x == doctest::Approx(expected.x).epsilon(1e-12));
        CHECK(n.y == doctest::Approx(expected.y).epsilon(1e-12));
        CHECK(n.z == doctest::Approx(expected.z).epsilon(1e-12));
    }
}

TEST_CASE("face normal and area") {
    const TriangleMesh tri({{0, 0, 0}, {2, 0, 0}, {0, 3, 0}}, {{0, 1, 2}});
    CHECK(tri.face_area(0) == doctest::Approx(3.0));
    CHECK(tri.face_normal(0) == Vec3{0, 0, 1});
    CHECK(tri.centroid().x == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("mesh construction validation") {
    CHECK_THROWS_AS(TriangleMesh({{0, 0, 0}, {1, 0, 0}}, {{0, 1, 2}}), TopologyError);
    CHECK_THROWS_AS(TriangleMesh({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, {{0, 1, 2}}), TopologyError);
    // A vertex no face touches has no normal.
    const TriangleMesh loose({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {5, 5, 5}}, {{0, 1, 2}});
    CHECK_THROWS_AS(compute_vertex_normals(loose), TopologyError);
}

TEST_CASE("icosphere counts and radius") {
    for (int s = 0; s <= 3; ++s) {
        const TriangleMesh m = make_icosphere(s, 2.0);
        const std::size_t pow4 = std::size_t{1} << (2 * s);
        CHECK(m.vertex_count() == 10 * pow4 + 2);
        CHECK(m.face_count() == 20 * pow4);
        // Euler characteristic of a sphere: V - E + F = 2 with E = 3F/2.
        CHECK(static_cast<long>(m.vertex_count()) - static_cast<long>(3 * m.face_count() / 2) +
                  static_cast<long>(m.face_count()) ==
              2);
        for (const auto& p : m.vertices()) CHECK(length(p) == doctest::Approx(2.0).epsilon(1e-12));
        REQUIRE(m.has_normals());
        for (std::size_t i = 0; i < m.vertex_count(); ++i) {
            CHECK(dot(m.vertex_normals()[i], normalize(m.vertices()[i])) > 0.99);
        }
    }
}

TEST_CASE("cover extrusion on the unit icosphere") {
    const TriangleMesh sphere = make_icosphere(3);
    const TriangleMesh cover = extrude_cover(sphere, 0.0004, 1.0005);
    // Every vertex moves out by epsilon, then scales about the origin-centered centroid.
    const double expected = (1.0 + 0.0004) * 1.0005;
    CHECK(expected == doctest::Approx(1.00090).epsilon(1e-6));
    CHECK(cover.faces() == sphere.faces());
    CHECK(cover.vertex_count() == sphere.vertex_count());
    for (const auto& p : cover.vertices()) CHECK(std::abs(length(p) - expected) < 1e-6);
    CHECK(kCoverEpsilon == 0.0004);
    CHECK(kCoverScale == 1.0005);
}

TEST_CASE("identity extrusion leaves vertices untouched") {
    const TriangleMesh m = make_torus(12, 8, 1.0, 0.3, {0.5, -0.2, 0.1});
    const TriangleMesh same = extrude_cover(m, 0.0, 1.0);
    for (std::size_t i = 0; i < m.vertex_count(); ++i) CHECK(length(same.vertices()[i] - m.vertices()[i]) < 1e-12);
}

TEST_CASE("extrusion moves each vertex along its normal then scales") {
    Rng rng(5);
    const TriangleMesh m = make_cylinder(16, 0.7, 1.6, {0.3, 0.1, -0.4});
    const double eps = 0.01, scale = 1.1;
    const TriangleMesh out = extrude_cover(m, eps, scale);
    const Vec3 c = m.centroid();
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        const Vec3 want = c + ((m.vertices()[i] + m.vertex_normals()[i] * eps) - c) * scale;
        CHECK(length(out.vertices()[i] - want) < 1e-12);
    }
}

TEST_CASE("obj loading") {
    SUBCASE("quad fan, slash forms and negative indices") {
        std::istringstream in(
            "# square\n"
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
            "vt 0 0\n"
            "f 1/1 2/1 3/1 4/1\n"
            "f -4//1 -2//1 -1//1\n");
        const TriangleMesh m = load_obj(in);
        CHECK(m.vertex_count() == 4);
        CHECK(m.face_count() == 3);
        for (const auto& n : m.vertex_normals()) CHECK(n.z == doctest::Approx(1.0));
    }
    SUBCASE("degenerate faces and unreferenced vertices are dropped") {
        std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 2 0 0\nv 9 9 9\nf 1 2 3\nf 1 2 4\n");
        const TriangleMesh m = load_obj(in);
        CHECK(m.face_count() == 1);
        CHECK(m.vertex_count() == 3);
    }
    SUBCASE("aligned vn are used") {
        std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 2\nvn 0 1 1\nvn 0 0 1\nf 1//1 2//2 3//3\n");
        const TriangleMesh m = load_obj(in);
        CHECK(m.vertex_normals()[1].y == doctest::Approx(std::sqrt(0.5)));
    }
    SUBCASE("errors") {
        std::istringstream bad_index("v 0 0 0\nf 1 2 3\n");
        CHECK_THROWS_AS(load_obj(bad_index), ConfigError);
        std::istringstream empty("v 0 0 0\n");
        CHECK_THROWS_AS(load_obj(empty), TopologyError);
        CHECK_THROWS_AS(load_obj(std::filesystem::path("/nonexistent/x.obj")), ConfigError);
    }
}

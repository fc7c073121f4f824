#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "coatsynth/core.hpp"

namespace coatsynth {

using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Construction validates indices and rejects zero-area faces.
class TriangleMesh {
public:
    TriangleMesh() = default;
    TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<Vec3> normals = {});

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<Face>& faces() const { return faces_; }
    /// Empty until normals are computed or supplied.
    const std::vector<Vec3>& vertex_normals() const { return normals_; }
    bool has_normals() const { return !normals_.empty(); }

    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t face_count() const { return faces_.size(); }

    Vec3 centroid() const;
    Vec3 face_normal(std::size_t f) const;
    double face_area(std::size_t f) const;

private:
    std::vector<Vec3> vertices_;
    std::vector<Face> faces_;
    std::vector<Vec3> normals_;
};

/// Area-weighted vertex normals. Throws TopologyError for a vertex with no incident face.
TriangleMesh compute_vertex_normals(const TriangleMesh& mesh);

/// Cover mesh: every vertex pushed by `epsilon` along its normal, then scaled by `scale`
/// about the mesh centroid. Topology is unchanged.
TriangleMesh extrude_cover(const TriangleMesh& mesh, double epsilon, double scale);

/// Default cover parameters used for coating shells.
inline constexpr double kCoverEpsilon = 0.0004;
inline constexpr double kCoverScale = 1.0005;

/// OBJ subset: `v`, `vn`, `f` (triangles and polygon fans, v, v/t, v//n, v/t/n, negative indices).
/// Supplied `vn` are used when every face corner references normal index == vertex index;
/// otherwise normals are recomputed. Zero-area faces are dropped.
TriangleMesh load_obj(std::istream& in);
TriangleMesh load_obj(const std::filesystem::path& path);

// Procedural shapes (normals computed).
TriangleMesh make_icosphere(int subdivisions, double radius = 1.0, Vec3 center = {});
TriangleMesh make_torus(int major_segments, int minor_segments, double major_radius, double minor_radius,
                        Vec3 center = {});
TriangleMesh make_cylinder(int segments, double radius, double height, Vec3 center = {});

}  // namespace coatsynth

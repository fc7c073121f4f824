#include "coatsynth/mesh.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

namespace coatsynth {

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces, std::vector<Vec3> normals)
    : vertices_(std::move(vertices)), faces_(std::move(faces)), normals_(std::move(normals)) {
    for (std::size_t f = 0; f < faces_.size(); ++f) {
        for (auto idx : faces_[f]) {
            if (idx >= vertices_.size()) {
                throw TopologyError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                                    " but mesh has " + std::to_string(vertices_.size()) + " vertices");
            }
        }
        if (!(face_area(f) > 0.0)) throw TopologyError("face " + std::to_string(f) + " has zero area");
    }
    for (const auto& v : vertices_) {
        if (!std::isfinite(v.x) || !std::isfinite(v.y) || !std::isfinite(v.z)) {
            throw TopologyError("non-finite vertex position");
        }
    }
    if (!normals_.empty()) {
        if (normals_.size() != vertices_.size()) throw TopologyError("normal count != vertex count");
        for (const auto& n : normals_) {
            if (std::abs(length(n) - 1.0) > 1e-6) throw TopologyError("vertex normal is not unit length");
        }
    }
}

Vec3 TriangleMesh::centroid() const {
    Vec3 sum;
    for (const auto& v : vertices_) sum += v;
    return vertices_.empty() ? sum : sum / static_cast<double>(vertices_.size());
}

Vec3 TriangleMesh::face_normal(std::size_t f) const {
    const auto& [a, b, c] = faces_[f];
    return normalize(cross(vertices_[b] - vertices_[a], vertices_[c] - vertices_[a]));
}

double TriangleMesh::face_area(std::size_t f) const {
    const auto& [a, b, c] = faces_[f];
    return 0.5 * length(cross(vertices_[b] - vertices_[a], vertices_[c] - vertices_[a]));
}

TriangleMesh compute_vertex_normals(const TriangleMesh& mesh) {
    if (mesh.face_count() == 0) throw TopologyError("compute_vertex_normals: mesh has no faces");
    const auto& verts = mesh.vertices();
    std::vector<Vec3> acc(verts.size());
    std::vector<bool> touched(verts.size(), false);
    for (const auto& face : mesh.faces()) {
        // |cross| is twice the area, so the raw cross product is already area-weighted.
        const Vec3 weighted = cross(verts[face[1]] - verts[face[0]], verts[face[2]] - verts[face[0]]);
        for (auto idx : face) {
            acc[idx] += weighted;
            touched[idx] = true;
        }
    }
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (!touched[i]) throw TopologyError("vertex " + std::to_string(i) + " has no incident face");
        const double len = length(acc[i]);
        if (!(len > 0.0)) throw TopologyError("vertex " + std::to_string(i) + " has cancelling face normals");
        acc[i] = acc[i] / len;
    }
    return TriangleMesh(verts, mesh.faces(), std::move(acc));
}

TriangleMesh extrude_cover(const TriangleMesh& mesh, double epsilon, double scale) {
    if (!(epsilon >= 0.0)) throw InvalidArgument("extrude_cover: epsilon must be >= 0");
    if (!(scale > 0.0)) throw InvalidArgument("extrude_cover: scale must be > 0");
    if (!mesh.has_normals()) throw PreconditionError("extrude_cover: mesh has no vertex normals");

    const Vec3 c = mesh.centroid();
    const auto& verts = mesh.vertices();
    const auto& normals = mesh.vertex_normals();
    std::vector<Vec3> out(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) {
        out[i] = c + ((verts[i] + normals[i] * epsilon) - c) * scale;
    }
    // Uniform scaling about a point and a small offset keep face orientation; normals carry over.
    return TriangleMesh(std::move(out), mesh.faces(), normals);
}

namespace {

long resolve_index(long idx, std::size_t count, std::size_t line) {
    if (idx > 0) return idx - 1;
    if (idx < 0) return static_cast<long>(count) + idx;
    throw ConfigError("OBJ line " + std::to_string(line) + ": index 0 is invalid");
}

struct Corner {
    long v = -1;
    long n = -1;
};

Corner parse_corner(const std::string& tok, std::size_t nv, std::size_t nn, std::size_t line) {
    Corner c;
    const auto s1 = tok.find('/');
    c.v = resolve_index(std::stol(tok.substr(0, s1)), nv, line);
    if (s1 != std::string::npos) {
        const auto s2 = tok.find('/', s1 + 1);
        if (s2 != std::string::npos && s2 + 1 < tok.size()) {
            c.n = resolve_index(std::stol(tok.substr(s2 + 1)), nn, line);
        }
    }
    return c;
}

}  // namespace

TriangleMesh load_obj(std::istream& in) {
    std::vector<Vec3> positions;
    std::vector<Vec3> obj_normals;
    std::vector<Face> faces;
    bool normals_aligned = true;
    bool any_normal_ref = false;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag) || tag[0] == '#') continue;
        try {
            if (tag == "v") {
                Vec3 p;
                if (!(ss >> p.x >> p.y >> p.z)) throw ConfigError("malformed vertex");
                positions.push_back(p);
            } else if (tag == "vn") {
                Vec3 n;
                if (!(ss >> n.x >> n.y >> n.z)) throw ConfigError("malformed normal");
                obj_normals.push_back(n);
            } else if (tag == "f") {
                std::vector<Corner> corners;
                std::string tok;
                while (ss >> tok) corners.push_back(parse_corner(tok, positions.size(), obj_normals.size(), line_no));
                if (corners.size() < 3) throw ConfigError("face with fewer than 3 vertices");
                for (const auto& c : corners) {
                    if (c.v < 0 || static_cast<std::size_t>(c.v) >= positions.size()) {
                        throw ConfigError("vertex index out of range");
                    }
                    if (c.n >= 0) {
                        any_normal_ref = true;
                        if (c.n != c.v) normals_aligned = false;
                    } else {
                        normals_aligned = false;
                    }
                }
                for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
                    faces.push_back({static_cast<std::uint32_t>(corners[0].v), static_cast<std::uint32_t>(corners[k].v),
                                     static_cast<std::uint32_t>(corners[k + 1].v)});
                }
            }
        } catch (const std::invalid_argument&) {
            throw ConfigError("OBJ line " + std::to_string(line_no) + ": unparsable number");
        } catch (const ConfigError& e) {
            throw ConfigError("OBJ line " + std::to_string(line_no) + ": " + e.what());
        }
    }

    std::vector<Face> kept;
    kept.reserve(faces.size());
    for (const auto& f : faces) {
        const double twice_area = length(cross(positions[f[1]] - positions[f[0]], positions[f[2]] - positions[f[0]]));
        if (twice_area > 0.0) kept.push_back(f);
    }
    if (kept.empty()) throw TopologyError("OBJ contains no non-degenerate faces");

    // Drop vertices that no face references so normal computation sees no isolated vertices.
    std::vector<long> remap(positions.size(), -1);
    std::vector<Vec3> used_pos;
    std::vector<Vec3> used_nrm;
    const bool use_supplied = any_normal_ref && normals_aligned && obj_normals.size() >= positions.size();
    for (auto& f : kept) {
        for (auto& idx : f) {
            if (remap[idx] < 0) {
                remap[idx] = static_cast<long>(used_pos.size());
                used_pos.push_back(positions[idx]);
                if (use_supplied) used_nrm.push_back(normalize(obj_normals[idx]));
            }
            idx = static_cast<std::uint32_t>(remap[idx]);
        }
    }
    if (use_supplied) return TriangleMesh(std::move(used_pos), std::move(kept), std::move(used_nrm));
    return compute_vertex_normals(TriangleMesh(std::move(used_pos), std::move(kept)));
}

TriangleMesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open OBJ file: " + path.string());
    return load_obj(in);
}

TriangleMesh make_icosphere(int subdivisions, double radius, Vec3 center) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                           {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& p : v) p = normalize(p);
    std::vector<Face> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                           {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                           {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
        auto mid = [&](std::uint32_t a, std::uint32_t b) {
            const auto key = std::minmax(a, b);
            if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
            v.push_back(normalize((v[a] + v[b]) * 0.5));
            const auto idx = static_cast<std::uint32_t>(v.size() - 1);
            midpoint.emplace(key, idx);
            return idx;
        };
        std::vector<Face> next;
        next.reserve(f.size() * 4);
        for (const auto& [a, b, c] : f) {
            const auto ab = mid(a, b);
            const auto bc = mid(b, c);
            const auto ca = mid(c, a);
            next.push_back({a, ab, ca});
            next.push_back({b, bc, ab});
            next.push_back({c, ca, bc});
            next.push_back({ab, bc, ca});
        }
        f = std::move(next);
    }
    for (auto& p : v) p = center + p * radius;
    return compute_vertex_normals(TriangleMesh(std::move(v), std::move(f)));
}

TriangleMesh make_torus(int major_segments, int minor_segments, double major_radius, double minor_radius,
                        Vec3 center) {
    if (major_segments < 3 || minor_segments < 3) throw InvalidArgument("make_torus: need >= 3 segments");
    std::vector<Vec3> v;
    std::vector<Face> f;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int i = 0; i < major_segments; ++i) {
        const double u = two_pi * i / major_segments;
        for (int j = 0; j < minor_segments; ++j) {
            const double w = two_pi * j / minor_segments;
            const double r = major_radius + minor_radius * std::cos(w);
            v.push_back(center + Vec3{r * std::cos(u), minor_radius * std::sin(w), r * std::sin(u)});
        }
    }
    auto idx = [&](int i, int j) {
        return static_cast<std::uint32_t>((i % major_segments) * minor_segments + (j % minor_segments));
    };
    for (int i = 0; i < major_segments; ++i) {
        for (int j = 0; j < minor_segments; ++j) {
            f.push_back({idx(i, j), idx(i, j + 1), idx(i + 1, j)});
            f.push_back({idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)});
        }
    }
    return compute_vertex_normals(TriangleMesh(std::move(v), std::move(f)));
}

TriangleMesh make_cylinder(int segments, double radius, double height, Vec3 center) {
    if (segments < 3) throw InvalidArgument("make_cylinder: need >= 3 segments");
    std::vector<Vec3> v;
    std::vector<Face> f;
    const double two_pi = 2.0 * std::numbers::pi;
    const double h = 0.5 * height;
    // Side ring vertices are kept separate from the cap vertices so the rim stays crisp.
    for (int i = 0; i < segments; ++i) {
        const double a = two_pi * i / segments;
        v.push_back(center + Vec3{radius * std::cos(a), -h, radius * std::sin(a)});
        v.push_back(center + Vec3{radius * std::cos(a), h, radius * std::sin(a)});
    }
    const auto n = static_cast<std::uint32_t>(segments);
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t j = (i + 1) % n;
        f.push_back({2 * i, 2 * i + 1, 2 * j});
        f.push_back({2 * j, 2 * i + 1, 2 * j + 1});
    }
    const auto cap_start = static_cast<std::uint32_t>(v.size());
    for (int i = 0; i < segments; ++i) {
        const double a = two_pi * i / segments;
        v.push_back(center + Vec3{radius * std::cos(a), -h, radius * std::sin(a)});
        v.push_back(center + Vec3{radius * std::cos(a), h, radius * std::sin(a)});
    }
    const auto bottom_c = static_cast<std::uint32_t>(v.size());
    v.push_back(center + Vec3{0, -h, 0});
    const auto top_c = static_cast<std::uint32_t>(v.size());
    v.push_back(center + Vec3{0, h, 0});
    for (std::uint32_t i = 0; i < n; ++i) {
        const std::uint32_t j = (i + 1) % n;
        f.push_back({bottom_c, cap_start + 2 * i, cap_start + 2 * j});
        f.push_back({top_c, cap_start + 2 * j + 1, cap_start + 2 * i + 1});
    }
    return compute_vertex_normals(TriangleMesh(std::move(v), std::move(f)));
}

}  // namespace coatsynth

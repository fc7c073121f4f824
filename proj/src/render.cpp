#include "coatsynth/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "coatsynth/noise.hpp"

namespace coatsynth {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinAlpha = 1e-3;
constexpr double kRayOffset = 1e-4;

struct Mat3 {
    std::array<Vec3, 3> rows{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};

    Vec3 operator*(const Vec3& v) const { return {dot(rows[0], v), dot(rows[1], v), dot(rows[2], v)}; }
    Mat3 transposed() const {
        Mat3 t;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) t.rows[i][j] = rows[j][i];
        return t;
    }
    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        const Mat3 ot = o.transposed();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r.rows[i][j] = dot(rows[i], ot.rows[j]);
        return r;
    }
};

Mat3 euler_rotation(const Vec3& deg) {
    const double k = std::numbers::pi / 180.0;
    const double cx = std::cos(deg.x * k), sx = std::sin(deg.x * k);
    const double cy = std::cos(deg.y * k), sy = std::sin(deg.y * k);
    const double cz = std::cos(deg.z * k), sz = std::sin(deg.z * k);
    Mat3 rx{{Vec3{1, 0, 0}, Vec3{0, cx, -sx}, Vec3{0, sx, cx}}};
    Mat3 ry{{Vec3{cy, 0, sy}, Vec3{0, 1, 0}, Vec3{-sy, 0, cy}}};
    Mat3 rz{{Vec3{cz, -sz, 0}, Vec3{sz, cz, 0}, Vec3{0, 0, 1}}};
    return rz * (ry * rx);
}

struct Aabb {
    Vec3 lo{kInf, kInf, kInf};
    Vec3 hi{-kInf, -kInf, -kInf};

    void grow(const Vec3& p) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    void grow(const Aabb& b) {
        grow(b.lo);
        grow(b.hi);
    }
    bool hit(const Vec3& o, const Vec3& inv_d, double t_max) const {
        double t0 = 0.0, t1 = t_max;
        for (int a = 0; a < 3; ++a) {
            double tn = (lo[a] - o[a]) * inv_d[a];
            double tf = (hi[a] - o[a]) * inv_d[a];
            if (tn > tf) std::swap(tn, tf);
            // NaN from 0*inf keeps the previous bounds.
            t0 = tn > t0 ? tn : t0;
            t1 = tf < t1 ? tf : t1;
            if (t0 > t1) return false;
        }
        return true;
    }
};

/// Median-split BVH over a triangle mesh.
class MeshBvh {
public:
    struct TriHit {
        double t;
        std::size_t face;
        double u;
        double v;
    };

    explicit MeshBvh(const TriangleMesh& mesh) : mesh_(mesh) {
        order_.resize(mesh.face_count());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
        centroids_.resize(mesh.face_count());
        for (std::size_t f = 0; f < mesh.face_count(); ++f) {
            const auto& [a, b, c] = mesh.faces()[f];
            centroids_[f] = (mesh.vertices()[a] + mesh.vertices()[b] + mesh.vertices()[c]) / 3.0;
        }
        build(0, order_.size());
    }

    std::optional<TriHit> intersect(const Vec3& o, const Vec3& d, double t_max) const {
        const Vec3 inv{1.0 / d.x, 1.0 / d.y, 1.0 / d.z};
        std::optional<TriHit> best;
        std::array<std::size_t, 64> stack{};
        std::size_t sp = 0;
        stack[sp++] = 0;
        while (sp > 0) {
            const Node& node = nodes_[stack[--sp]];
            const double limit = best ? best->t : t_max;
            if (!node.box.hit(o, inv, limit)) continue;
            if (node.count > 0) {
                for (std::size_t i = node.start; i < node.start + node.count; ++i) {
                    if (auto h = intersect_tri(order_[i], o, d); h && h->t < (best ? best->t : t_max)) best = h;
                }
            } else {
                stack[sp++] = node.left;
                stack[sp++] = node.right;
            }
        }
        return best;
    }

private:
    struct Node {
        Aabb box;
        std::size_t left = 0;
        std::size_t right = 0;
        std::size_t start = 0;
        std::size_t count = 0;
    };

    std::size_t build(std::size_t start, std::size_t end) {
        const std::size_t id = nodes_.size();
        nodes_.emplace_back();
        Aabb box, cbox;
        for (std::size_t i = start; i < end; ++i) {
            const auto& f = mesh_.faces()[order_[i]];
            for (auto v : f) box.grow(mesh_.vertices()[v]);
            cbox.grow(centroids_[order_[i]]);
        }
        nodes_[id].box = box;
        if (end - start <= 4) {
            nodes_[id].start = start;
            nodes_[id].count = end - start;
            return id;
        }
        const Vec3 ext = cbox.hi - cbox.lo;
        const int axis = ext.x > ext.y ? (ext.x > ext.z ? 0 : 2) : (ext.y > ext.z ? 1 : 2);
        const std::size_t mid = (start + end) / 2;
        std::nth_element(order_.begin() + static_cast<long>(start), order_.begin() + static_cast<long>(mid),
                         order_.begin() + static_cast<long>(end), [&](std::size_t a, std::size_t b) {
                             if (centroids_[a][axis] != centroids_[b][axis]) {
                                 return centroids_[a][axis] < centroids_[b][axis];
                             }
                             return a < b;
                         });
        const std::size_t left = build(start, mid);
        const std::size_t right = build(mid, end);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    std::optional<TriHit> intersect_tri(std::size_t f, const Vec3& o, const Vec3& d) const {
        const auto& [a, b, c] = mesh_.faces()[f];
        const Vec3& p0 = mesh_.vertices()[a];
        const Vec3 e1 = mesh_.vertices()[b] - p0;
        const Vec3 e2 = mesh_.vertices()[c] - p0;
        const Vec3 pv = cross(d, e2);
        const double det = dot(e1, pv);
        if (std::abs(det) < 1e-14) return std::nullopt;
        const double inv_det = 1.0 / det;
        const Vec3 tv = o - p0;
        const double u = dot(tv, pv) * inv_det;
        if (u < 0.0 || u > 1.0) return std::nullopt;
        const Vec3 qv = cross(tv, e1);
        const double v = dot(d, qv) * inv_det;
        if (v < 0.0 || u + v > 1.0) return std::nullopt;
        const double t = dot(e2, qv) * inv_det;
        if (t <= kRayOffset) return std::nullopt;
        return TriHit{t, f, u, v};
    }

    const TriangleMesh& mesh_;
    std::vector<std::size_t> order_;
    std::vector<Vec3> centroids_;
    std::vector<Node> nodes_;
};

enum class Surface { None, Object, Floor };

struct Hit {
    Surface surface = Surface::None;
    double t = kInf;
    Vec3 position;
    Vec3 geometric_normal;  // world, facing the incoming ray
    Vec3 smooth_normal;     // world, interpolated
    Vec3 local_position;    // object-local (texture and detail noise lookups)
};

class Tracer {
public:
    explicit Tracer(const SceneSpec& scene)
        : scene_(scene),
          rot_(euler_rotation(scene.object.rotation_deg)),
          inv_rot_(rot_.transposed()),
          detail_{ValueNoise(scene.detail_seed * 3 + 0), ValueNoise(scene.detail_seed * 3 + 1),
                  ValueNoise(scene.detail_seed * 3 + 2)} {
        if (scene.object.kind == PrimitiveKind::Mesh) {
            mesh_ = scene.object.mesh ? scene.object.mesh : resolve_mesh(scene.object.mesh_source);
            if (!mesh_->has_normals()) mesh_ = std::make_shared<TriangleMesh>(compute_vertex_normals(*mesh_));
            bvh_.emplace(*mesh_);
        }
    }

    Hit intersect(const Vec3& o, const Vec3& d, double t_max = kInf) const {
        Hit best;
        if (auto h = intersect_object(o, d, t_max)) best = *h;
        if (scene_.floor.enabled && std::abs(d.y) > 1e-12) {
            const double t = (scene_.floor.height - o.y) / d.y;
            if (t > kRayOffset && t < best.t && t < t_max) {
                best.surface = Surface::Floor;
                best.t = t;
                best.position = o + d * t;
                const Vec3 up{0.0, 1.0, 0.0};
                best.geometric_normal = d.y < 0.0 ? up : -up;
                best.smooth_normal = best.geometric_normal;
                best.local_position = best.position;
            }
        }
        return best;
    }

    bool occluded(const Vec3& o, const Vec3& d, double dist) const {
        return intersect(o, d, dist).surface != Surface::None;
    }

    /// Micro-normal perturbation of the smooth normal at an object-local position.
    Vec3 detail_normal(const Vec3& n, const Vec3& local) const {
        if (scene_.detail_amplitude <= 0.0) return n;
        const Vec3 p = local * scene_.detail_frequency;
        const Vec3 g{2.0 * detail_[0](p) - 1.0, 2.0 * detail_[1](p) - 1.0, 2.0 * detail_[2](p) - 1.0};
        const Vec3 tangential = g - n * dot(g, n);
        return normalize(n + tangential * scene_.detail_amplitude);
    }

private:
    std::optional<Hit> intersect_object(const Vec3& o, const Vec3& d, double t_max) const {
        const auto& obj = scene_.object;
        const Vec3 lo = inv_rot_ * ((o - obj.center) / obj.size);
        const Vec3 ld = inv_rot_ * (d / obj.size);
        double t = kInf;
        Vec3 n_geo, n_smooth;

        switch (obj.kind) {
            case PrimitiveKind::Sphere: {
                const double a = dot(ld, ld);
                const double b = dot(lo, ld);
                const double c = dot(lo, lo) - 1.0;
                const double disc = b * b - a * c;
                if (disc < 0.0) return std::nullopt;
                const double sq = std::sqrt(disc);
                double root = (-b - sq) / a;
                if (root <= kRayOffset) root = (-b + sq) / a;
                if (root <= kRayOffset) return std::nullopt;
                t = root;
                n_geo = n_smooth = normalize(lo + ld * t);
                break;
            }
            case PrimitiveKind::Cube: {
                double t0 = -kInf, t1 = kInf;
                int axis0 = 0, axis1 = 0;
                for (int ax = 0; ax < 3; ++ax) {
                    if (std::abs(ld[ax]) < 1e-15) {
                        if (lo[ax] < -1.0 || lo[ax] > 1.0) return std::nullopt;
                        continue;
                    }
                    double tn = (-1.0 - lo[ax]) / ld[ax];
                    double tf = (1.0 - lo[ax]) / ld[ax];
                    if (tn > tf) std::swap(tn, tf);
                    if (tn > t0) {
                        t0 = tn;
                        axis0 = ax;
                    }
                    if (tf < t1) {
                        t1 = tf;
                        axis1 = ax;
                    }
                }
                if (t0 > t1) return std::nullopt;
                int axis = axis0;
                t = t0;
                if (t <= kRayOffset) {
                    t = t1;
                    axis = axis1;
                }
                if (t <= kRayOffset) return std::nullopt;
                const Vec3 p = lo + ld * t;
                Vec3 n{};
                n[static_cast<std::size_t>(axis)] = p[static_cast<std::size_t>(axis)] > 0.0 ? 1.0 : -1.0;
                n_geo = n_smooth = n;
                break;
            }
            case PrimitiveKind::Plane: {
                if (std::abs(ld.y) < 1e-15) return std::nullopt;
                const double root = -lo.y / ld.y;
                if (root <= kRayOffset) return std::nullopt;
                const Vec3 p = lo + ld * root;
                if (std::abs(p.x) > 1.0 || std::abs(p.z) > 1.0) return std::nullopt;
                t = root;
                n_geo = n_smooth = Vec3{0.0, 1.0, 0.0};
                break;
            }
            case PrimitiveKind::Mesh: {
                const auto h = bvh_->intersect(lo, ld, t_max);
                if (!h) return std::nullopt;
                t = h->t;
                n_geo = mesh_->face_normal(h->face);
                const auto& [a, b, c] = mesh_->faces()[h->face];
                const auto& vn = mesh_->vertex_normals();
                n_smooth = normalize(vn[a] * (1.0 - h->u - h->v) + vn[b] * h->u + vn[c] * h->v);
                break;
            }
        }
        if (!(t < t_max)) return std::nullopt;

        Hit hit;
        hit.surface = Surface::Object;
        hit.t = t;
        hit.position = o + d * t;
        hit.local_position = lo + ld * t;
        hit.geometric_normal = normalize(rot_ * n_geo);
        hit.smooth_normal = normalize(rot_ * n_smooth);
        if (dot(hit.geometric_normal, d) > 0.0) {
            hit.geometric_normal = -hit.geometric_normal;
            hit.smooth_normal = -hit.smooth_normal;
        }
        return hit;
    }

    const SceneSpec& scene_;
    Mat3 rot_;
    Mat3 inv_rot_;
    std::array<ValueNoise, 3> detail_;
    std::shared_ptr<const TriangleMesh> mesh_;
    std::optional<MeshBvh> bvh_;
};

struct CameraBasis {
    Vec3 origin, forward, right, up;
    double tan_half = 0.0;
    double aspect = 1.0;

    explicit CameraBasis(const Camera& cam) {
        origin = cam.position;
        forward = normalize(cam.look_at - cam.position);
        Vec3 world_up{0.0, 1.0, 0.0};
        if (std::abs(dot(forward, world_up)) > 0.999) world_up = {0.0, 0.0, -1.0};
        right = normalize(cross(forward, world_up));
        up = cross(right, forward);
        tan_half = std::tan(0.5 * cam.vfov_deg * std::numbers::pi / 180.0);
        aspect = static_cast<double>(cam.width) / cam.height;
    }

    Vec3 ray(int x, int y, int w, int h) const {
        const double sx = (2.0 * (x + 0.5) / w - 1.0) * aspect * tan_half;
        const double sy = (1.0 - 2.0 * (y + 0.5) / h) * tan_half;
        return normalize(forward + right * sx + up * sy);
    }

    Vec3 to_camera(const Vec3& n) const { return {dot(n, right), dot(n, up), -dot(n, forward)}; }
};

Rgb sample_material_albedo(const BaseMaterial& m, const Hit& hit) {
    if (const auto* c = std::get_if<Rgb>(&m.albedo)) return *c;
    const auto& tex = std::get<SurfaceTexture>(m.albedo);
    if (hit.surface == Surface::Floor) {
        return tex.image.sample_bilinear(hit.position.x * tex.scale, hit.position.z * tex.scale);
    }
    const Vec3 p = hit.local_position;
    const double r = length(p);
    const double u = 0.5 + std::atan2(p.z, p.x) / (2.0 * std::numbers::pi);
    const double v = r > 0.0 ? std::acos(std::clamp(p.y / r, -1.0, 1.0)) / std::numbers::pi : 0.5;
    return tex.image.sample_bilinear(u * tex.scale, v * tex.scale);
}

/// Incident light at a hit point after visibility.
struct LightSample {
    Vec3 dir;
    Rgb radiance;  // irradiance at normal incidence, already multiplied by visibility
};

struct ShadedLobe {
    Rgb irradiance;
    Rgb specular;
};

ShadedLobe shade_lobe(const std::vector<LightSample>& lights, const Rgb& ambient, const Vec3& n, const Vec3& v,
                      const Rgb& f0, double roughness) {
    ShadedLobe out{ambient, Rgb{}};
    for (const auto& ls : lights) {
        const double ndl = dot(n, ls.dir);
        if (ndl <= 0.0) continue;
        out.irradiance += ls.radiance * ndl;
        out.specular += hadamard(specular_brdf(n, v, ls.dir, f0, roughness), ls.radiance) * ndl;
    }
    return out;
}

Rgb f0_for(const Rgb& albedo, double metalness) { return lerp(Rgb{0.04, 0.04, 0.04}, albedo, metalness); }

/// Shared per-pixel renderer; coat == nullptr renders the uncoated scene.
ChannelStack render_impl(const SceneSpec& scene, const CoatingSpec* coat) {
    scene.validate();
    const int w = scene.camera.width;
    const int h = scene.camera.height;
    if (coat) {
        require_same_size(coat->mask, ScalarMap(w, h), "render_coated: coat mask vs camera");
        coat->validate();
    }

    const Tracer tracer(scene);
    const CameraBasis cam(scene.camera);

    ChannelStack out;
    out.image = ColorImage(w, h);
    out.albedo = ColorImage(w, h);
    out.normals = VectorMap(w, h);
    out.depth = ScalarMap(w, h, kInf);
    out.shading = ColorImage(w, h);
    out.residual = VectorMap(w, h);
    out.object_mask = ScalarMap(w, h, 0.0);

    parallel_rows(h, [&](int y) {
        for (int x = 0; x < w; ++x) {
            const Vec3 dir = cam.ray(x, y, w, h);
            const Hit hit = tracer.intersect(cam.origin, dir);
            Rgb image, albedo, shading, normal;
            if (hit.surface == Surface::None) {
                image = scene.ambient;
                albedo = Rgb{1.0, 1.0, 1.0};
                shading = scene.ambient;
            } else {
                const bool on_object = hit.surface == Surface::Object;
                const BaseMaterial& mat = on_object ? scene.object.material : scene.floor.material;
                const Vec3 view = -dir;
                const Vec3 origin = hit.position + hit.geometric_normal * kRayOffset;

                std::vector<LightSample> lights;
                lights.reserve(scene.lights.size());
                for (const auto& light : scene.lights) {
                    Vec3 l;
                    Rgb radiance = light.intensity;
                    double dist = kInf;
                    if (light.kind == Light::Kind::Directional) {
                        l = normalize(light.vector);
                    } else {
                        const Vec3 to = light.vector - hit.position;
                        dist = length(to);
                        l = to / dist;
                        radiance = radiance / (dist * dist);
                    }
                    if (dot(hit.geometric_normal, l) <= 0.0) continue;
                    if (tracer.occluded(origin, l, dist)) continue;
                    lights.push_back({l, radiance});
                }

                const Vec3 n_detail =
                    on_object ? tracer.detail_normal(hit.smooth_normal, hit.local_position) : hit.smooth_normal;
                const Rgb base_albedo = sample_material_albedo(mat, hit);
                const Rgb base_diffuse = base_albedo * (1.0 - mat.metalness);
                const Rgb base_f0 = f0_for(base_albedo, mat.metalness);

                const std::size_t p = static_cast<std::size_t>(y) * w + x;
                const double m = (coat && on_object) ? coat->mask[p] : 0.0;
                if (m > 0.0) {
                    const auto& tr = coat->traits;
                    Vec3 n_s;
                    try {
                        n_s = shading_normal(n_detail, hit.smooth_normal, tr.thickness);
                    } catch (const DegenerateNormal&) {
                        n_s = hit.smooth_normal;
                    }
                    const double t_eff = effective_transmission(tr.transmission, tr.thickness);
                    const Rgb coat_albedo = coat->albedo_at((x + 0.5) / w, (y + 0.5) / h);
                    const Rgb coat_diffuse = coat_albedo * (1.0 - tr.metalness);

                    const ShadedLobe base = shade_lobe(lights, scene.ambient, n_s, view, base_f0, mat.roughness);
                    const ShadedLobe top =
                        shade_lobe(lights, scene.ambient, n_s, view, f0_for(coat_albedo, tr.metalness), tr.roughness);
                    const Rgb base_rgb = hadamard(base_diffuse, base.irradiance) + base.specular;
                    const Rgb coat_rgb = hadamard(coat_diffuse, top.irradiance) + top.specular;

                    image = layer_composite(base_rgb, coat_rgb, t_eff, m);
                    albedo = layer_composite(base_diffuse, coat_diffuse, t_eff, m);
                    shading = base.irradiance;
                    normal = n_s;
                } else {
                    const ShadedLobe lobe = shade_lobe(lights, scene.ambient, n_detail, view, base_f0, mat.roughness);
                    image = hadamard(base_diffuse, lobe.irradiance) + lobe.specular;
                    albedo = base_diffuse;
                    shading = lobe.irradiance;
                    normal = n_detail;
                }
                out.depth[p] = hit.t;
                out.object_mask[p] = on_object ? 1.0 : 0.0;
                out.normals.set(x, y, cam.to_camera(normal));
            }
            out.image.set(x, y, image);
            out.albedo.set(x, y, albedo);
            out.shading.set(x, y, shading);
            out.residual.set(x, y, image - hadamard(albedo, shading));
        }
    });
    return out;
}

}  // namespace

void BaseMaterial::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(roughness) || !in01(metalness)) throw ConfigError("material roughness/metalness must be in [0,1]");
    if (const auto* c = std::get_if<Rgb>(&albedo)) {
        if (!in01(c->x) || !in01(c->y) || !in01(c->z)) throw ConfigError("material albedo must be in [0,1]");
    } else if (std::get<SurfaceTexture>(albedo).image.empty()) {
        throw ConfigError("material texture is empty");
    }
}

void SceneSpec::validate() const {
    if (lights.empty()) throw ConfigError("scene needs at least one light");
    if (!(camera.vfov_deg > 0.0 && camera.vfov_deg < 180.0)) throw ConfigError("camera fov must be in (0,180)");
    if (camera.width <= 0 || camera.height <= 0) throw ConfigError("camera image has zero pixels");
    if (!(detail_amplitude >= 0.0 && detail_amplitude <= 1.0)) throw ConfigError("detail_amplitude must be in [0,1]");
    if (!(object.size > 0.0)) throw ConfigError("object size must be > 0");
    if (object.kind == PrimitiveKind::Mesh && !object.mesh && object.mesh_source.empty()) {
        throw ConfigError("mesh object needs a mesh or mesh_source");
    }
    if (length(camera.look_at - camera.position) <= 0.0) throw ConfigError("camera look_at equals position");
    object.material.validate();
    if (floor.enabled) floor.material.validate();
}

std::shared_ptr<const TriangleMesh> resolve_mesh(const std::string& source) {
    if (source == "icosphere") return std::make_shared<TriangleMesh>(make_icosphere(3));
    if (source == "torus") return std::make_shared<TriangleMesh>(make_torus(48, 24, 0.7, 0.3));
    if (source == "cylinder") return std::make_shared<TriangleMesh>(make_cylinder(48, 0.7, 1.6));
    if (source.rfind("obj:", 0) == 0) return std::make_shared<TriangleMesh>(load_obj(std::filesystem::path(source.substr(4))));
    throw ConfigError("unknown mesh source '" + source + "'");
}

ChannelStack render_uncoated(const SceneSpec& scene) { return render_impl(scene, nullptr); }

ChannelStack render_coated(const SceneSpec& scene, const CoatingSpec& coat) { return render_impl(scene, &coat); }

Vec3 shading_normal(const Vec3& n_detail, const Vec3& n_smooth, double thickness) {
    if (thickness <= 0.0) return n_detail;
    if (thickness >= 1.0) return n_smooth;
    const Vec3 blend = n_detail * (1.0 - thickness) + n_smooth * thickness;
    const double len = length(blend);
    if (len < 1e-9) throw DegenerateNormal("shading_normal: detail and smooth normals cancel");
    return blend / len;
}

double ggx_distribution(double n_dot_h, double roughness) {
    const double alpha = std::max(roughness * roughness, kMinAlpha);
    const double a2 = alpha * alpha;
    const double c = std::max(n_dot_h, 0.0);
    const double denom = c * c * (a2 - 1.0) + 1.0;
    return a2 / (std::numbers::pi * denom * denom);
}

double smith_g1(double n_dot_x, double roughness) {
    const double alpha = std::max(roughness * roughness, kMinAlpha);
    const double a2 = alpha * alpha;
    const double c = std::max(n_dot_x, 1e-6);
    return 2.0 * c / (c + std::sqrt(a2 + (1.0 - a2) * c * c));
}

Rgb fresnel_schlick(const Rgb& f0, double cos_theta) {
    const double k = std::pow(1.0 - std::clamp(cos_theta, 0.0, 1.0), 5.0);
    return f0 + (Rgb{1.0, 1.0, 1.0} - f0) * k;
}

Rgb specular_brdf(const Vec3& n, const Vec3& v, const Vec3& l, const Rgb& f0, double roughness) {
    const double ndl = dot(n, l);
    const double ndv = std::max(dot(n, v), 1e-4);
    if (ndl <= 0.0) return {};
    const Vec3 hv = v + l;
    const double hl = length(hv);
    if (hl <= 0.0) return {};
    const Vec3 hn = hv / hl;
    const double d = ggx_distribution(dot(n, hn), roughness);
    const double g = smith_g1(ndl, roughness) * smith_g1(ndv, roughness);
    const Rgb f = fresnel_schlick(f0, dot(v, hn));
    return f * (d * g / (4.0 * ndl * ndv));
}

ScalarMap generate_mask(const ChannelStack& scene_stack, Rng& rng, double coverage_target) {
    if (!(coverage_target > 0.0 && coverage_target <= 1.0)) {
        throw InvalidArgument("generate_mask: coverage_target must be in (0,1]");
    }
    const auto& obj = scene_stack.object_mask;
    const int w = obj.width();
    const int h = obj.height();
    std::size_t object_pixels = 0;
    for (double v : obj.data()) object_pixels += v > 0.0 ? 1 : 0;
    if (object_pixels == 0) throw EmptySceneError("generate_mask: object silhouette is empty");

    // Draw the noise seed even for full coverage so the stream position does not depend on the target.
    const ValueNoise noise(rng.next_u64());
    const double offset_x = rng.uniform(0.0, 64.0);
    const double offset_y = rng.uniform(0.0, 64.0);
    if (coverage_target >= 1.0) {
        ScalarMap full(w, h, 0.0);
        for (std::size_t p = 0; p < full.pixel_count(); ++p) full[p] = obj[p] > 0.0 ? 1.0 : 0.0;
        return full;
    }

    const double cells = 3.0;
    const double inv_side = cells / std::max(w, h);
    std::vector<double> field(obj.pixel_count(), 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            field[static_cast<std::size_t>(y) * w + x] =
                noise.fractal((x + 0.5) * inv_side + offset_x, (y + 0.5) * inv_side + offset_y, 3);
        }
    }
    auto covered_fraction = [&](double threshold) {
        std::size_t n = 0;
        for (std::size_t p = 0; p < field.size(); ++p) n += (obj[p] > 0.0 && field[p] > threshold) ? 1 : 0;
        return static_cast<double>(n) / static_cast<double>(object_pixels);
    };
    // Covered fraction is non-increasing in the threshold.
    double lo = -1e-9, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (covered_fraction(mid) > coverage_target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double threshold =
        std::abs(covered_fraction(lo) - coverage_target) < std::abs(covered_fraction(hi) - coverage_target) ? lo : hi;

    ScalarMap mask(w, h, 0.0);
    for (std::size_t p = 0; p < field.size(); ++p) mask[p] = (obj[p] > 0.0 && field[p] > threshold) ? 1.0 : 0.0;
    return mask;
}

ColorImage project_albedo(const CoatingSpec& coat, const ChannelStack& scene_stack) {
    const int w = scene_stack.width();
    const int h = scene_stack.height();
    require_same_size(coat.mask, scene_stack.image, "project_albedo");
    ColorImage out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (coat.mask.at(x, y) > 0.0) out.set(x, y, coat.albedo_at((x + 0.5) / w, (y + 0.5) / h));
        }
    }
    return out;
}

}  // namespace coatsynth

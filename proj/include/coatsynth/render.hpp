#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "coatsynth/core.hpp"
#include "coatsynth/mesh.hpp"
#include "coatsynth/rng.hpp"
#include "coatsynth/textures.hpp"

namespace coatsynth {

// ---------------------------------------------------------------------------
// Scene description
// ---------------------------------------------------------------------------

/// Texture mapped onto a surface. Objects use a spherical projection about the object center,
/// the floor a planar xz projection; `scale` is repeats per unit (floor) or per wrap (object).
struct SurfaceTexture {
    ColorImage image;
    double scale = 1.0;
    /// Set when `image` was generated procedurally; serialization stores the spec instead of pixels.
    std::optional<PatternSpec> pattern;
    bool operator==(const SurfaceTexture&) const = default;
};

struct BaseMaterial {
    std::variant<Rgb, SurfaceTexture> albedo = Rgb{0.8, 0.8, 0.8};
    double roughness = 0.5;
    double metalness = 0.0;

    void validate() const;
};

enum class PrimitiveKind { Sphere, Cube, Plane, Mesh };

struct SceneObject {
    PrimitiveKind kind = PrimitiveKind::Sphere;
    Vec3 center{0.0, 0.0, 0.0};
    /// Radius (sphere), half extent (cube, plane) or uniform mesh scale.
    double size = 1.0;
    /// Euler rotation in degrees, applied X then Y then Z.
    Vec3 rotation_deg{};
    /// Procedural mesh name ("icosphere", "torus", "cylinder") or "obj:<path>"; only for kind == Mesh.
    std::string mesh_source;
    std::shared_ptr<const TriangleMesh> mesh;
    BaseMaterial material;
};

struct FloorSpec {
    bool enabled = true;
    double height = -1.0;
    BaseMaterial material;
};

struct Light {
    enum class Kind { Directional, Point };
    Kind kind = Kind::Directional;
    /// Direction *towards* the light (directional) or world position (point).
    Vec3 vector{0.0, 1.0, 0.0};
    /// Irradiance at normal incidence (directional) or intensity with 1/d² falloff (point).
    Rgb intensity{1.0, 1.0, 1.0};
};

struct Camera {
    Vec3 position{0.0, 0.0, 4.0};
    Vec3 look_at{0.0, 0.0, 0.0};
    double vfov_deg = 40.0;
    int width = 256;
    int height = 256;
};

struct SceneSpec {
    SceneObject object;
    FloorSpec floor;
    std::vector<Light> lights;
    Rgb ambient{0.1, 0.1, 0.1};
    Camera camera;
    /// Strength of the procedural micro-normal perturbation on the object, in [0,1].
    double detail_amplitude = 0.0;
    /// Spatial frequency of the micro-normal noise in object-local units.
    double detail_frequency = 24.0;
    std::uint64_t detail_seed = 1;

    /// Throws ConfigError on violated invariants.
    void validate() const;
};

/// Builds the mesh named by `source` (see SceneObject::mesh_source).
std::shared_ptr<const TriangleMesh> resolve_mesh(const std::string& source);

// ---------------------------------------------------------------------------
// Render output
// ---------------------------------------------------------------------------

/// Per-pixel 3-vectors stored in a ColorImage raster; components may be negative.
using VectorMap = ColorImage;

/// Intrinsic decomposition of a render. residual == image - albedo ⊙ shading exactly.
struct ChannelStack {
    ColorImage image;
    ColorImage albedo;
    VectorMap normals;
    ScalarMap depth;
    ColorImage shading;
    VectorMap residual;
    ScalarMap object_mask;

    int width() const { return image.width(); }
    int height() const { return image.height(); }
};

ChannelStack render_uncoated(const SceneSpec& scene);
ChannelStack render_coated(const SceneSpec& scene, const CoatingSpec& coat);

// ---------------------------------------------------------------------------
// Shading building blocks
// ---------------------------------------------------------------------------

/// Transparency left after a coat of the given thickness; linear in thickness.
constexpr double effective_transmission(double transmission, double thickness) {
    return transmission * (1.0 - thickness);
}

/// Blend of detail and smooth normals; thickness 1 fully fills micro-crevasses.
/// Throws DegenerateNormal when the blend cancels out.
Vec3 shading_normal(const Vec3& n_detail, const Vec3& n_smooth, double thickness);

/// lerp(base, lerp(coat, base, t_eff), mask_value).
constexpr Rgb layer_composite(const Rgb& base, const Rgb& coat, double t_eff, double mask_value) {
    return base + ((coat * (1.0 - t_eff) + base * t_eff) - base) * mask_value;
}

/// GGX normal distribution with alpha = roughness².
double ggx_distribution(double n_dot_h, double roughness);
/// Smith masking term for one direction (GGX).
double smith_g1(double n_dot_x, double roughness);
Rgb fresnel_schlick(const Rgb& f0, double cos_theta);
/// Cook-Torrance specular BRDF value (without the n·l factor).
Rgb specular_brdf(const Vec3& n, const Vec3& v, const Vec3& l, const Rgb& f0, double roughness);

// ---------------------------------------------------------------------------
// Coat masks and albedo projection
// ---------------------------------------------------------------------------

/// Noise-shaped binary mask restricted to the object silhouette, covering ~coverage_target of it.
ScalarMap generate_mask(const ChannelStack& scene_stack, Rng& rng, double coverage_target);

/// Screen-space projection of the coat albedo into the masked region; black elsewhere.
ColorImage project_albedo(const CoatingSpec& coat, const ChannelStack& scene_stack);

}  // namespace coatsynth

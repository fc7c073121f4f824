#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coatsynth/core.hpp"
#include "coatsynth/render.hpp"
#include "coatsynth/rng.hpp"
#include "coatsynth/textures.hpp"

namespace coatsynth {

/// Dataset generation settings. JSON field names match member names.
struct DatasetConfig {
    int groups = 24;
    int variants = 8;
    int width = 128;
    int height = 128;
    std::vector<std::string> objects{"sphere", "cube", "icosphere", "torus", "cylinder", "plane"};
    int viewpoints = 4;
    double camera_distance = 3.6;
    double camera_elevation_deg = 25.0;
    double vfov_deg = 38.0;
    int floor_materials = 20;
    double light_distance_min = 3.0;
    double light_distance_max = 5.0;
    double light_elevation_min_deg = 30.0;
    double light_elevation_max_deg = 70.0;
    /// Irradiance each light delivers at the object center.
    double light_irradiance_min = 0.45;
    double light_irradiance_max = 0.9;
    double ambient_min = 0.05;
    double ambient_max = 0.15;
    double detail_amplitude_min = 0.1;
    double detail_amplitude_max = 0.4;
    double coverage_min = 0.35;
    double coverage_max = 1.0;
    int albedo_pool_size = 16;
    /// Fraction of pool textures with visible structure; must be >= 0.2.
    double patterned_fraction = 0.8;

    void validate() const;
    nlohmann::json to_json() const;
    static DatasetConfig from_json(const nlohmann::json& j);
};

struct ObjectAsset {
    std::string name;
    SceneObject prototype;  // geometry only; the material is sampled per scene
};

struct AssetCatalog {
    std::vector<ObjectAsset> objects;
    std::vector<BaseMaterial> floor_materials;
    std::vector<Camera> viewpoints;
};

AssetCatalog make_default_catalog(const DatasetConfig& config);

/// Coat albedo textures to draw from.
struct AlbedoPool {
    std::vector<PatternSpec> textures;

    double patterned_fraction() const;
};

AlbedoPool make_albedo_pool(const DatasetConfig& config, std::uint64_t seed);

/// Fixed scene for reproducible checks: a textured, bumpy sphere on a floor under two lights.
SceneSpec make_reference_scene(int side = 256);

/// Random object, floor, ambient, two point lights and one viewpoint.
SceneSpec sample_scene(Rng& rng, const AssetCatalog& assets, const DatasetConfig& config);
/// Same as sample_scene with the object and viewpoint fixed.
SceneSpec sample_scene_at(Rng& rng, const AssetCatalog& assets, const DatasetConfig& config, std::size_t object_index,
                          std::size_t viewpoint_index);

struct SampledCoating {
    CoatingSpec coating;
    /// Present when the albedo is a pool texture.
    std::optional<PatternSpec> pattern;
};

/// Traits: roughness and thickness uniform in [0,1]; metalness and transmission in {0,1}.
/// Albedo: uniform color or pool texture, each with probability 1/2.
SampledCoating sample_coating(Rng& rng, const AlbedoPool& pool, const ScalarMap& mask);

struct CoatedVariant {
    CoatingSpec coating;
    std::optional<PatternSpec> pattern;
    ChannelStack render;
    ColorImage projected_albedo;
};

struct SceneGroup {
    std::string scene_id;
    std::uint64_t seed = 0;
    SceneSpec scene;
    ScalarMap mask;
    ChannelStack original;
    std::vector<CoatedVariant> variants;
};

struct GroupOptions {
    double coverage_min = 0.35;
    double coverage_max = 1.0;
};

/// Renders the original, draws one shared mask, and renders k coated variants.
SceneGroup build_scene_group(const SceneSpec& scene, Rng& rng, int k, const AlbedoPool& pool,
                             const GroupOptions& options = {});

/// Scene id for group index i.
std::string scene_id_for(std::size_t index);

/// All groups for a config and master seed, in scene-id order. Group i uses its own
/// stream (master_seed, i), so any subset can be regenerated independently.
std::vector<SceneGroup> build_groups(const DatasetConfig& config, std::uint64_t master_seed);
SceneGroup build_group(const DatasetConfig& config, std::uint64_t master_seed, std::size_t index,
                       const AssetCatalog& assets, const AlbedoPool& pool);

// ---------------------------------------------------------------------------
// Training samples
// ---------------------------------------------------------------------------

enum class EditTask { Add, Replace, Remove };
/// Conditioning task; Add splits by the target's albedo kind.
enum class TaskKind { AddTextured, AddUniform, Replace, Remove };

const char* task_name(TaskKind task);
const char* task_name(EditTask task);

struct TrainingSample {
    TaskKind task = TaskKind::AddUniform;
    ColorImage input_image;
    ColorImage target_image;
    ScalarMap mask;
    ColorImage projected_albedo;
    std::optional<TraitVector> traits;
    int input_variant = -1;   // -1 = original
    int target_variant = -1;  // -1 = original
};

TrainingSample build_training_sample(const SceneGroup& group, EditTask task, Rng& rng);

inline constexpr double kAddWeight = 0.34;
inline constexpr double kReplaceWeight = 0.33;
inline constexpr double kRemoveWeight = 0.33;

/// i.i.d. draws with add:replace:remove = 34:33:33.
std::vector<EditTask> sample_task_mixture(Rng& rng, std::size_t n);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct VariantRecord {
    int index = 0;
    TraitVector traits;
    /// "uniform" or "texture".
    std::string albedo_kind;
    Rgb color;
    std::optional<PatternSpec> pattern;
    std::map<std::string, std::string> files;  // channel -> path relative to root
    std::string projected_albedo;
    std::string mask_hash;

    bool operator==(const VariantRecord&) const = default;
};

struct GroupRecord {
    std::string scene_id;
    std::uint64_t seed = 0;
    std::string scene_file;
    std::string mask_file;
    std::string mask_hash;
    std::map<std::string, std::string> original;
    std::vector<VariantRecord> variants;

    bool operator==(const GroupRecord&) const = default;
};

struct Manifest {
    std::filesystem::path root;
    std::uint64_t master_seed = 0;
    nlohmann::json config;
    std::vector<GroupRecord> groups;

    bool operator==(const Manifest&) const = default;
};

nlohmann::json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& root);

void write_manifest(const std::filesystem::path& path, const Manifest& m);
/// Reads the manifest; `root` becomes the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);
/// Throws Error if a referenced file is missing or mask hashes disagree within a group.
void validate_manifest(const Manifest& m);

/// Writes one group under root/<scene_id>/ and returns its record.
GroupRecord write_group(const std::filesystem::path& root, const SceneGroup& group);
/// Reloads a group written by write_group.
SceneGroup load_group(const Manifest& m, std::size_t index);

/// Generates the full dataset on disk and writes root/manifest.json.
Manifest generate_dataset(const DatasetConfig& config, std::uint64_t master_seed, const std::filesystem::path& root);

}  // namespace coatsynth

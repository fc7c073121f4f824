#include "coatsynth/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "coatsynth/io.hpp"

namespace coatsynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

Rgb random_color(Rng& rng, double lo, double hi) {
    // Three explicit draws keep the evaluation order fixed.
    const double r = rng.uniform(lo, hi);
    const double g = rng.uniform(lo, hi);
    const double b = rng.uniform(lo, hi);
    return {r, g, b};
}

BaseMaterial sample_substrate(Rng& rng) {
    BaseMaterial m;
    if (rng.bernoulli(0.5)) {
        m.albedo = random_color(rng, 0.15, 0.85);
    } else {
        static const char* kinds[] = {"checker", "stripes", "dots", "noise"};
        PatternSpec p;
        p.kind = kinds[rng.index(4)];
        p.size = 64;
        p.cells = 4 + static_cast<int>(rng.index(6));
        p.color_a = random_color(rng, 0.15, 0.85);
        p.color_b = random_color(rng, 0.15, 0.85);
        p.seed = rng.next_u64();
        SurfaceTexture tex;
        tex.image = render_pattern(p);
        tex.pattern = p;
        tex.scale = 1.0 + static_cast<double>(rng.index(3));
        m.albedo = std::move(tex);
    }
    m.roughness = rng.uniform(0.2, 0.9);
    m.metalness = rng.bernoulli(0.15) ? 1.0 : 0.0;
    return m;
}

ObjectAsset make_object(const std::string& name) {
    ObjectAsset a;
    a.name = name;
    auto& o = a.prototype;
    if (name == "sphere") {
        o.kind = PrimitiveKind::Sphere;
        o.size = 1.0;
    } else if (name == "cube") {
        o.kind = PrimitiveKind::Cube;
        o.size = 0.75;
        o.center = {0.0, -0.25, 0.0};
        o.rotation_deg = {0.0, 30.0, 0.0};
    } else if (name == "plane") {
        o.kind = PrimitiveKind::Plane;
        o.size = 0.9;
        o.center = {0.0, -0.1, 0.0};
        o.rotation_deg = {60.0, 20.0, 0.0};
    } else if (name == "icosphere" || name == "torus" || name == "cylinder" || name.rfind("obj:", 0) == 0) {
        o.kind = PrimitiveKind::Mesh;
        o.mesh_source = name;
        o.mesh = resolve_mesh(name);
        if (name == "torus") {
            o.center = {0.0, -0.45, 0.0};
            o.rotation_deg = {35.0, 0.0, 0.0};
        } else if (name == "cylinder") {
            o.center = {0.0, -0.2, 0.0};
        }
    } else {
        throw ConfigError("unknown object asset '" + name + "'");
    }
    return a;
}

}  // namespace

void DatasetConfig::validate() const {
    if (groups < 1) throw ConfigError("groups must be >= 1");
    if (variants < 1) throw ConfigError("variants must be >= 1");
    if (width < 1 || height < 1) throw ConfigError("resolution must be positive");
    if (objects.empty()) throw ConfigError("asset catalog has no objects");
    if (viewpoints < 1) throw ConfigError("viewpoints must be >= 1");
    if (floor_materials < 1) throw ConfigError("floor_materials must be >= 1");
    if (albedo_pool_size < 1) throw ConfigError("albedo pool is empty");
    if (patterned_fraction < 0.2 || patterned_fraction > 1.0) throw ConfigError("patterned_fraction must be in [0.2,1]");
    if (!(coverage_min > 0.0 && coverage_min <= coverage_max && coverage_max <= 1.0)) {
        throw ConfigError("coverage range must satisfy 0 < min <= max <= 1");
    }
    if (!(light_distance_min > 0.0 && light_distance_min <= light_distance_max)) throw ConfigError("bad light distances");
    if (!(light_irradiance_min >= 0.0 && light_irradiance_min <= light_irradiance_max)) {
        throw ConfigError("bad light irradiance range");
    }
    if (!(detail_amplitude_min >= 0.0 && detail_amplitude_min <= detail_amplitude_max && detail_amplitude_max <= 1.0)) {
        throw ConfigError("bad detail amplitude range");
    }
}

json DatasetConfig::to_json() const {
    return {{"groups", groups},
            {"variants", variants},
            {"width", width},
            {"height", height},
            {"objects", objects},
            {"viewpoints", viewpoints},
            {"camera_distance", camera_distance},
            {"camera_elevation_deg", camera_elevation_deg},
            {"vfov_deg", vfov_deg},
            {"floor_materials", floor_materials},
            {"light_distance_min", light_distance_min},
            {"light_distance_max", light_distance_max},
            {"light_elevation_min_deg", light_elevation_min_deg},
            {"light_elevation_max_deg", light_elevation_max_deg},
            {"light_irradiance_min", light_irradiance_min},
            {"light_irradiance_max", light_irradiance_max},
            {"ambient_min", ambient_min},
            {"ambient_max", ambient_max},
            {"detail_amplitude_min", detail_amplitude_min},
            {"detail_amplitude_max", detail_amplitude_max},
            {"coverage_min", coverage_min},
            {"coverage_max", coverage_max},
            {"albedo_pool_size", albedo_pool_size},
            {"patterned_fraction", patterned_fraction}};
}

DatasetConfig DatasetConfig::from_json(const json& j) {
    DatasetConfig c;
    try {
        const json defaults = c.to_json();
        for (const auto& [key, value] : j.items()) {
            if (!defaults.contains(key)) throw ConfigError("unknown dataset config field '" + key + "'");
        }
        c.groups = j.value("groups", c.groups);
        c.variants = j.value("variants", c.variants);
        c.width = j.value("width", c.width);
        c.height = j.value("height", c.height);
        c.objects = j.value("objects", c.objects);
        c.viewpoints = j.value("viewpoints", c.viewpoints);
        c.camera_distance = j.value("camera_distance", c.camera_distance);
        c.camera_elevation_deg = j.value("camera_elevation_deg", c.camera_elevation_deg);
        c.vfov_deg = j.value("vfov_deg", c.vfov_deg);
        c.floor_materials = j.value("floor_materials", c.floor_materials);
        c.light_distance_min = j.value("light_distance_min", c.light_distance_min);
        c.light_distance_max = j.value("light_distance_max", c.light_distance_max);
        c.light_elevation_min_deg = j.value("light_elevation_min_deg", c.light_elevation_min_deg);
        c.light_elevation_max_deg = j.value("light_elevation_max_deg", c.light_elevation_max_deg);
        c.light_irradiance_min = j.value("light_irradiance_min", c.light_irradiance_min);
        c.light_irradiance_max = j.value("light_irradiance_max", c.light_irradiance_max);
        c.ambient_min = j.value("ambient_min", c.ambient_min);
        c.ambient_max = j.value("ambient_max", c.ambient_max);
        c.detail_amplitude_min = j.value("detail_amplitude_min", c.detail_amplitude_min);
        c.detail_amplitude_max = j.value("detail_amplitude_max", c.detail_amplitude_max);
        c.coverage_min = j.value("coverage_min", c.coverage_min);
        c.coverage_max = j.value("coverage_max", c.coverage_max);
        c.albedo_pool_size = j.value("albedo_pool_size", c.albedo_pool_size);
        c.patterned_fraction = j.value("patterned_fraction", c.patterned_fraction);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid dataset config: ") + e.what());
    }
    c.validate();
    return c;
}

AssetCatalog make_default_catalog(const DatasetConfig& config) {
    config.validate();
    AssetCatalog cat;
    for (const auto& name : config.objects) cat.objects.push_back(make_object(name));

    Rng rng(0xF100Full, 0);
    for (int i = 0; i < config.floor_materials; ++i) {
        BaseMaterial m;
        const Rgb a = random_color(rng, 0.25, 0.75);
        if (i % 2 == 0) {
            m.albedo = a;
        } else {
            PatternSpec p;
            p.kind = i % 4 == 1 ? "checker" : "stripes";
            p.size = 32;
            p.cells = 2;
            p.color_a = a;
            p.color_b = a * 0.6;
            SurfaceTexture tex;
            tex.image = render_pattern(p);
            tex.pattern = p;
            tex.scale = 0.5;
            m.albedo = std::move(tex);
        }
        m.roughness = rng.uniform(0.4, 1.0);
        m.metalness = 0.0;
        cat.floor_materials.push_back(std::move(m));
    }

    const Vec3 target{0.0, -0.2, 0.0};
    for (int v = 0; v < config.viewpoints; ++v) {
        const double az = (20.0 + 360.0 * v / config.viewpoints) * kDegToRad;
        const double el = config.camera_elevation_deg * kDegToRad;
        Camera cam;
        cam.look_at = target;
        cam.position = target + Vec3{std::cos(el) * std::sin(az), std::sin(el), std::cos(el) * std::cos(az)} *
                                    config.camera_distance;
        cam.vfov_deg = config.vfov_deg;
        cam.width = config.width;
        cam.height = config.height;
        cat.viewpoints.push_back(cam);
    }
    return cat;
}

double AlbedoPool::patterned_fraction() const {
    if (textures.empty()) return 0.0;
    std::size_t n = 0;
    for (const auto& t : textures) n += is_patterned(t.kind) ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(textures.size());
}

AlbedoPool make_albedo_pool(const DatasetConfig& config, std::uint64_t seed) {
    config.validate();
    static const char* patterned[] = {"checker", "stripes", "dots", "noise"};
    Rng rng(seed, 0xA1BED0ull);
    AlbedoPool pool;
    const int n = config.albedo_pool_size;
    const int n_patterned = std::max(1, static_cast<int>(std::ceil(config.patterned_fraction * n)));
    for (int i = 0; i < n; ++i) {
        PatternSpec p;
        p.kind = i < n_patterned ? patterned[i % 4] : "gradient";
        p.size = 64;
        p.cells = 3 + static_cast<int>(rng.index(6));
        p.color_a = random_color(rng, 0.0, 1.0);
        p.color_b = random_color(rng, 0.0, 1.0);
        p.seed = rng.next_u64();
        pool.textures.push_back(p);
    }
    return pool;
}

SceneSpec make_reference_scene(int side) {
    SceneSpec s;
    s.object.kind = PrimitiveKind::Sphere;
    s.object.size = 1.0;
    s.object.material.albedo = SurfaceTexture{render_pattern({"checker", 64, 8, {0.75, 0.55, 0.35}, {0.35, 0.25, 0.2}, 3}),
                                              2.0, PatternSpec{"checker", 64, 8, {0.75, 0.55, 0.35}, {0.35, 0.25, 0.2}, 3}};
    s.object.material.roughness = 0.6;
    s.floor.material.albedo = Rgb{0.4, 0.45, 0.5};
    s.floor.material.roughness = 0.9;
    s.lights.push_back({Light::Kind::Point, {3.0, 4.0, 3.0}, Rgb{1.0, 1.0, 1.0} * 0.6 * 34.0});
    s.lights.push_back({Light::Kind::Point, {-3.5, 2.5, 1.0}, Rgb{1.0, 0.95, 0.9} * 0.3 * 20.5});
    s.ambient = {0.08, 0.08, 0.08};
    s.camera = {{0.0, 1.2, 3.8}, {0.0, -0.1, 0.0}, 38.0, side, side};
    s.detail_amplitude = 0.35;
    s.detail_seed = 11;
    return s;
}

SceneSpec sample_scene(Rng& rng, const AssetCatalog& assets, const DatasetConfig& config) {
    if (assets.objects.empty() || assets.viewpoints.empty() || assets.floor_materials.empty()) {
        throw ConfigError("asset catalog is empty");
    }
    const std::size_t obj = rng.index(assets.objects.size());
    const std::size_t view = rng.index(assets.viewpoints.size());
    return sample_scene_at(rng, assets, config, obj, view);
}

SceneSpec sample_scene_at(Rng& rng, const AssetCatalog& assets, const DatasetConfig& config, std::size_t object_index,
                          std::size_t viewpoint_index) {
    if (assets.objects.empty() || assets.viewpoints.empty() || assets.floor_materials.empty()) {
        throw ConfigError("asset catalog is empty");
    }
    SceneSpec s;
    s.object = assets.objects.at(object_index).prototype;
    s.object.material = sample_substrate(rng);
    s.floor.enabled = true;
    s.floor.height = -1.0;
    s.floor.material = assets.floor_materials[rng.index(assets.floor_materials.size())];
    s.camera = assets.viewpoints.at(viewpoint_index);

    const double amb = rng.uniform(config.ambient_min, config.ambient_max);
    s.ambient = Rgb{amb, amb, amb};
    const Vec3 target = s.object.center;
    for (int i = 0; i < 2; ++i) {
        // Lights are spread to different halves of the horizon so both contribute.
        const double az = (rng.uniform(0.0, 0.5) + 0.5 * i) * 2.0 * std::numbers::pi;
        const double el = rng.uniform(config.light_elevation_min_deg, config.light_elevation_max_deg) * kDegToRad;
        const double dist = rng.uniform(config.light_distance_min, config.light_distance_max);
        const double irr = rng.uniform(config.light_irradiance_min, config.light_irradiance_max);
        const Rgb tint{rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1)};
        Light light;
        light.kind = Light::Kind::Point;
        light.vector = target + Vec3{std::cos(el) * std::cos(az), std::sin(el), std::cos(el) * std::sin(az)} * dist;
        light.intensity = tint * (irr * dist * dist);
        s.lights.push_back(light);
    }
    s.detail_amplitude = rng.uniform(config.detail_amplitude_min, config.detail_amplitude_max);
    s.detail_seed = rng.next_u64();
    return s;
}

SampledCoating sample_coating(Rng& rng, const AlbedoPool& pool, const ScalarMap& mask) {
    if (pool.textures.empty()) throw ConfigError("albedo pool is empty");
    bool any = false;
    for (double v : mask.data()) any = any || v > 0.0;
    if (!any) throw PreconditionError("sample_coating: mask is empty");

    SampledCoating out;
    auto& t = out.coating.traits;
    t.roughness = rng.uniform();
    t.metalness = rng.bernoulli(0.5) ? 1.0 : 0.0;
    t.transmission = rng.bernoulli(0.5) ? 1.0 : 0.0;
    t.thickness = rng.uniform();
    if (rng.bernoulli(0.5)) {
        out.coating.albedo = random_color(rng, 0.0, 1.0);
    } else {
        const PatternSpec& p = pool.textures[rng.index(pool.textures.size())];
        out.coating.albedo = render_pattern(p);
        out.pattern = p;
    }
    out.coating.mask = mask;
    return out;
}

SceneGroup build_scene_group(const SceneSpec& scene, Rng& rng, int k, const AlbedoPool& pool,
                             const GroupOptions& options) {
    if (k < 1) throw InvalidArgument("build_scene_group: k must be >= 1");
    SceneGroup g;
    g.scene = scene;
    g.original = render_uncoated(scene);

    double coverage = rng.uniform(options.coverage_min, options.coverage_max);
    if (coverage > 0.95) coverage = 1.0;
    Rng mask_rng = rng.derive(0x3A5C);
    g.mask = generate_mask(g.original, mask_rng, coverage);

    for (int i = 0; i < k; ++i) {
        CoatedVariant v;
        auto sampled = sample_coating(rng, pool, g.mask);
        v.coating = std::move(sampled.coating);
        v.pattern = std::move(sampled.pattern);
        v.render = render_coated(scene, v.coating);
        v.projected_albedo = project_albedo(v.coating, v.render);
        g.variants.push_back(std::move(v));
    }
    return g;
}

std::string scene_id_for(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%04zu", index);
    return buf;
}

SceneGroup build_group(const DatasetConfig& config, std::uint64_t master_seed, std::size_t index,
                       const AssetCatalog& assets, const AlbedoPool& pool) {
    const std::size_t views = assets.viewpoints.size();
    const std::size_t combos = assets.objects.size() * views;
    const std::size_t combo = index % combos;
    // Past one full sweep, later sweeps reuse the grid with fresh random draws.
    const std::uint64_t group_seed = mix64(master_seed ^ mix64(index + 1));
    Rng rng(group_seed, 0);
    SceneSpec scene = sample_scene_at(rng, assets, config, combo / views, combo % views);
    SceneGroup g = build_scene_group(scene, rng, config.variants, pool, {config.coverage_min, config.coverage_max});
    g.scene_id = scene_id_for(index);
    g.seed = group_seed;
    return g;
}

std::vector<SceneGroup> build_groups(const DatasetConfig& config, std::uint64_t master_seed) {
    config.validate();
    const AssetCatalog assets = make_default_catalog(config);
    const AlbedoPool pool = make_albedo_pool(config, master_seed);
    std::vector<SceneGroup> groups;
    groups.reserve(static_cast<std::size_t>(config.groups));
    for (int i = 0; i < config.groups; ++i) {
        groups.push_back(build_group(config, master_seed, static_cast<std::size_t>(i), assets, pool));
    }
    return groups;
}

const char* task_name(TaskKind task) {
    switch (task) {
        case TaskKind::AddTextured: return "add_textured";
        case TaskKind::AddUniform: return "add_uniform";
        case TaskKind::Replace: return "replace";
        case TaskKind::Remove: return "remove";
    }
    return "?";
}

const char* task_name(EditTask task) {
    switch (task) {
        case EditTask::Add: return "add";
        case EditTask::Replace: return "replace";
        case EditTask::Remove: return "remove";
    }
    return "?";
}

TrainingSample build_training_sample(const SceneGroup& group, EditTask task, Rng& rng) {
    const int k = static_cast<int>(group.variants.size());
    if (k < 1) throw InsufficientVariants("scene group has no coated variants");
    TrainingSample s;
    s.mask = group.mask;
    switch (task) {
        case EditTask::Add: {
            const int j = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
            const auto& v = group.variants[static_cast<std::size_t>(j)];
            s.task = v.coating.is_uniform() ? TaskKind::AddUniform : TaskKind::AddTextured;
            s.input_image = group.original.image;
            s.target_image = v.render.image;
            s.projected_albedo = v.projected_albedo;
            s.traits = v.coating.traits;
            s.target_variant = j;
            break;
        }
        case EditTask::Replace: {
            if (k < 2) throw InsufficientVariants("replace task needs at least 2 variants");
            const int i = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
            int j = static_cast<int>(rng.index(static_cast<std::size_t>(k - 1)));
            if (j >= i) ++j;
            const auto& target = group.variants[static_cast<std::size_t>(j)];
            s.task = TaskKind::Replace;
            s.input_image = group.variants[static_cast<std::size_t>(i)].render.image;
            s.target_image = target.render.image;
            s.projected_albedo = target.projected_albedo;
            s.traits = target.coating.traits;
            s.input_variant = i;
            s.target_variant = j;
            break;
        }
        case EditTask::Remove: {
            const int i = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
            s.task = TaskKind::Remove;
            s.input_image = group.variants[static_cast<std::size_t>(i)].render.image;
            s.target_image = group.original.image;
            s.projected_albedo = ColorImage(group.mask.width(), group.mask.height());
            s.input_variant = i;
            break;
        }
    }
    return s;
}

std::vector<EditTask> sample_task_mixture(Rng& rng, std::size_t n) {
    std::vector<EditTask> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.uniform();
        if (u < kAddWeight) out.push_back(EditTask::Add);
        else if (u < kAddWeight + kReplaceWeight) out.push_back(EditTask::Replace);
        else out.push_back(EditTask::Remove);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

json pattern_to_json(const PatternSpec& p) {
    return {{"kind", p.kind}, {"size", p.size}, {"cells", p.cells},
            {"color_a", {p.color_a.x, p.color_a.y, p.color_a.z}},
            {"color_b", {p.color_b.x, p.color_b.y, p.color_b.z}}, {"seed", p.seed}};
}

Rgb rgb_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

PatternSpec pattern_from_json(const json& j) {
    PatternSpec p;
    p.kind = j.at("kind").get<std::string>();
    p.size = j.at("size").get<int>();
    p.cells = j.at("cells").get<int>();
    p.color_a = rgb_from(j.at("color_a"));
    p.color_b = rgb_from(j.at("color_b"));
    p.seed = j.at("seed").get<std::uint64_t>();
    return p;
}

}  // namespace

json manifest_to_json(const Manifest& m) {
    json groups = json::array();
    for (const auto& g : m.groups) {
        json variants = json::array();
        for (const auto& v : g.variants) {
            json albedo{{"kind", v.albedo_kind}};
            if (v.albedo_kind == "uniform") albedo["color"] = {v.color.x, v.color.y, v.color.z};
            if (v.pattern) albedo["pattern"] = pattern_to_json(*v.pattern);
            variants.push_back({{"index", v.index},
                                {"traits", io::to_json(v.traits)},
                                {"albedo", albedo},
                                {"files", v.files},
                                {"projected_albedo", v.projected_albedo},
                                {"mask_hash", v.mask_hash}});
        }
        groups.push_back({{"scene_id", g.scene_id},
                          {"seed", g.seed},
                          {"scene_file", g.scene_file},
                          {"mask_file", g.mask_file},
                          {"mask_hash", g.mask_hash},
                          {"original", g.original},
                          {"variants", variants}});
    }
    return {{"format", "coatsynth-manifest"},
            {"version", 1},
            {"root", "."},
            {"master_seed", m.master_seed},
            {"config", m.config},
            {"groups", groups}};
}

Manifest manifest_from_json(const json& j, const fs::path& root) {
    try {
        if (j.at("format").get<std::string>() != "coatsynth-manifest") throw Error("not a coatsynth manifest");
        Manifest m;
        m.root = root;
        m.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.config = j.at("config");
        for (const auto& gj : j.at("groups")) {
            GroupRecord g;
            g.scene_id = gj.at("scene_id").get<std::string>();
            g.seed = gj.at("seed").get<std::uint64_t>();
            g.scene_file = gj.at("scene_file").get<std::string>();
            g.mask_file = gj.at("mask_file").get<std::string>();
            g.mask_hash = gj.at("mask_hash").get<std::string>();
            g.original = gj.at("original").get<std::map<std::string, std::string>>();
            for (const auto& vj : gj.at("variants")) {
                VariantRecord v;
                v.index = vj.at("index").get<int>();
                v.traits = io::traits_from_json(vj.at("traits"));
                const auto& a = vj.at("albedo");
                v.albedo_kind = a.at("kind").get<std::string>();
                if (a.contains("color")) v.color = rgb_from(a["color"]);
                if (a.contains("pattern")) v.pattern = pattern_from_json(a["pattern"]);
                v.files = vj.at("files").get<std::map<std::string, std::string>>();
                v.projected_albedo = vj.at("projected_albedo").get<std::string>();
                v.mask_hash = vj.at("mask_hash").get<std::string>();
                g.variants.push_back(std::move(v));
            }
            m.groups.push_back(std::move(g));
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(std::string("malformed manifest: ") + e.what());
    }
}

void write_manifest(const fs::path& path, const Manifest& m) {
    io::write_text(path, manifest_to_json(m).dump(2) + "\n");
}

Manifest read_manifest(const fs::path& path) {
    json j;
    try {
        j = json::parse(io::read_text(path));
    } catch (const json::parse_error& e) {
        throw Error("manifest is not valid JSON: " + std::string(e.what()));
    }
    return manifest_from_json(j, path.parent_path());
}

void validate_manifest(const Manifest& m) {
    auto need = [&](const std::string& rel) {
        if (!fs::exists(m.root / rel)) throw Error("manifest references missing file " + rel);
    };
    for (std::size_t i = 0; i < m.groups.size(); ++i) {
        const auto& g = m.groups[i];
        if (i > 0 && !(m.groups[i - 1].scene_id < g.scene_id)) throw Error("manifest groups not sorted by scene_id");
        need(g.scene_file);
        need(g.mask_file);
        for (const auto& [_, f] : g.original) need(f);
        for (const auto& v : g.variants) {
            if (v.mask_hash != g.mask_hash) throw Error("mask hash mismatch in " + g.scene_id);
            for (const auto& [_, f] : v.files) need(f);
            need(v.projected_albedo);
        }
        const auto mask = io::scalar_from_channel(io::read_channel(m.root / g.mask_file));
        if (io::mask_hash(mask) != g.mask_hash) throw Error("stored mask does not match hash in " + g.scene_id);
    }
}

GroupRecord write_group(const fs::path& root, const SceneGroup& group) {
    GroupRecord rec;
    rec.scene_id = group.scene_id;
    rec.seed = group.seed;
    const fs::path dir = root / group.scene_id;
    fs::create_directories(dir);

    io::write_text(dir / "scene.json", io::to_json(group.scene).dump(2) + "\n");
    rec.scene_file = group.scene_id + "/scene.json";
    io::write_channel(dir / "mask.f32", io::to_channel(group.mask, "mask"));
    io::write_png(dir / "mask.png", group.mask);
    rec.mask_file = group.scene_id + "/mask.f32";
    rec.mask_hash = io::mask_hash(group.mask);

    for (const auto& [name, file] : io::write_stack(dir / "original", group.original)) {
        rec.original[name] = group.scene_id + "/original/" + file;
    }
    for (std::size_t i = 0; i < group.variants.size(); ++i) {
        const auto& v = group.variants[i];
        VariantRecord vr;
        vr.index = static_cast<int>(i);
        vr.traits = v.coating.traits;
        const std::string sub = "variant_" + std::to_string(i);
        const std::string prefix = group.scene_id + "/" + sub + "/";
        if (const auto* c = std::get_if<Rgb>(&v.coating.albedo)) {
            vr.albedo_kind = "uniform";
            vr.color = *c;
        } else {
            vr.albedo_kind = "texture";
            vr.pattern = v.pattern;
        }
        for (const auto& [name, file] : io::write_stack(dir / sub, v.render)) vr.files[name] = prefix + file;
        io::write_channel(dir / sub / "projected_albedo.f32", io::to_channel(v.projected_albedo, "projected_albedo"));
        vr.projected_albedo = prefix + "projected_albedo.f32";
        vr.mask_hash = io::mask_hash(v.coating.mask);
        rec.variants.push_back(std::move(vr));
    }
    return rec;
}

SceneGroup load_group(const Manifest& m, std::size_t index) {
    const GroupRecord& rec = m.groups.at(index);
    SceneGroup g;
    g.scene_id = rec.scene_id;
    g.seed = rec.seed;
    g.scene = io::scene_from_json(json::parse(io::read_text(m.root / rec.scene_file)), m.root);
    g.mask = io::scalar_from_channel(io::read_channel(m.root / rec.mask_file));
    g.original = io::read_stack((m.root / rec.original.at("image")).parent_path());
    for (const auto& vr : rec.variants) {
        CoatedVariant v;
        v.coating.traits = vr.traits;
        v.coating.mask = g.mask;
        if (vr.albedo_kind == "uniform") {
            v.coating.albedo = vr.color;
        } else {
            if (!vr.pattern) throw Error("texture variant without pattern in " + rec.scene_id);
            v.coating.albedo = render_pattern(*vr.pattern);
            v.pattern = vr.pattern;
        }
        v.render = io::read_stack((m.root / vr.files.at("image")).parent_path());
        v.projected_albedo = io::color_from_channel(io::read_channel(m.root / vr.projected_albedo));
        g.variants.push_back(std::move(v));
    }
    return g;
}

Manifest generate_dataset(const DatasetConfig& config, std::uint64_t master_seed, const fs::path& root) {
    config.validate();
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec || !fs::is_directory(root)) throw Error("cannot create output directory " + root.string());

    const AssetCatalog assets = make_default_catalog(config);
    const AlbedoPool pool = make_albedo_pool(config, master_seed);
    Manifest m;
    m.root = root;
    m.master_seed = master_seed;
    m.config = config.to_json();
    for (int i = 0; i < config.groups; ++i) {
        const SceneGroup g = build_group(config, master_seed, static_cast<std::size_t>(i), assets, pool);
        m.groups.push_back(write_group(root, g));
    }
    write_manifest(root / "manifest.json", m);
    return m;
}

}  // namespace coatsynth

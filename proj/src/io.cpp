#include "coatsynth/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <openssl/evp.h>
#include <png.h>

namespace coatsynth::io {

using nlohmann::json;

namespace {

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(clamp01(v) * 255.0)); }

void write_png_raw(const fs::path& path, int w, int h, bool color, const std::vector<std::uint8_t>& bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(w);
    image.height = static_cast<png_uint_32>(h);
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, bytes.data(), 0, nullptr)) {
        throw Error("cannot write PNG " + path.string() + ": " + image.message);
    }
}

std::vector<std::uint8_t> read_png_raw(const fs::path& path, bool color, int& w, int& h) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        throw Error("cannot read PNG " + path.string() + ": " + image.message);
    }
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error("cannot decode PNG " + path.string() + ": " + image.message);
    }
    w = static_cast<int>(image.width);
    h = static_cast<int>(image.height);
    return bytes;
}

void append_le(std::string& out, float v) {
    auto bits = std::bit_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
}

float read_le(const unsigned char* p) {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return std::bit_cast<float>(bits);
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json pattern_json(const PatternSpec& p) {
    return {{"kind", p.kind}, {"size", p.size}, {"cells", p.cells}, {"color_a", vec_json(p.color_a)},
            {"color_b", vec_json(p.color_b)}, {"seed", p.seed}};
}

PatternSpec pattern_from(const json& j) {
    PatternSpec p;
    p.kind = j.at("kind").get<std::string>();
    p.size = j.value("size", p.size);
    p.cells = j.value("cells", p.cells);
    if (j.contains("color_a")) p.color_a = vec_from(j["color_a"]);
    if (j.contains("color_b")) p.color_b = vec_from(j["color_b"]);
    p.seed = j.value("seed", p.seed);
    return p;
}

json material_json(const BaseMaterial& m) {
    json j{{"roughness", m.roughness}, {"metalness", m.metalness}};
    if (const auto* c = std::get_if<Rgb>(&m.albedo)) {
        j["albedo"] = vec_json(*c);
    } else {
        const auto& tex = std::get<SurfaceTexture>(m.albedo);
        json t{{"scale", tex.scale}};
        if (tex.pattern) {
            t["pattern"] = pattern_json(*tex.pattern);
        } else {
            t["width"] = tex.image.width();
            t["height"] = tex.image.height();
            t["data"] = std::vector<double>(tex.image.data().begin(), tex.image.data().end());
        }
        j["texture"] = std::move(t);
    }
    return j;
}

BaseMaterial material_from(const json& j) {
    BaseMaterial m;
    m.roughness = j.value("roughness", m.roughness);
    m.metalness = j.value("metalness", m.metalness);
    if (j.contains("texture")) {
        const auto& t = j["texture"];
        SurfaceTexture tex;
        tex.scale = t.value("scale", 1.0);
        if (t.contains("pattern")) {
            tex.pattern = pattern_from(t["pattern"]);
            tex.image = render_pattern(*tex.pattern);
        } else {
            tex.image = ColorImage(t.at("width").get<int>(), t.at("height").get<int>(),
                                   t.at("data").get<std::vector<double>>());
        }
        m.albedo = std::move(tex);
    } else if (j.contains("albedo")) {
        m.albedo = vec_from(j["albedo"]);
    }
    return m;
}

const char* kind_name(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Sphere: return "sphere";
        case PrimitiveKind::Cube: return "cube";
        case PrimitiveKind::Plane: return "plane";
        case PrimitiveKind::Mesh: return "mesh";
    }
    return "sphere";
}

PrimitiveKind kind_from(const std::string& s) {
    if (s == "sphere") return PrimitiveKind::Sphere;
    if (s == "cube") return PrimitiveKind::Cube;
    if (s == "plane") return PrimitiveKind::Plane;
    if (s == "mesh") return PrimitiveKind::Mesh;
    throw ConfigError("unknown object kind '" + s + "'");
}

}  // namespace

void write_png(const fs::path& path, const ColorImage& linear) {
    std::vector<std::uint8_t> bytes(linear.pixel_count() * 3);
    const auto d = linear.data();
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(srgb_encode(d[i]));
    write_png_raw(path, linear.width(), linear.height(), true, bytes);
}

void write_png(const fs::path& path, const ScalarMap& gray) {
    std::vector<std::uint8_t> bytes(gray.pixel_count());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = to_byte(gray[i]);
    write_png_raw(path, gray.width(), gray.height(), false, bytes);
}

ColorImage read_png_color(const fs::path& path) {
    int w = 0, h = 0;
    const auto bytes = read_png_raw(path, true, w, h);
    std::vector<double> data(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = srgb_decode(bytes[i] / 255.0);
    return ColorImage(w, h, std::move(data));
}

ScalarMap read_png_gray(const fs::path& path) {
    int w = 0, h = 0;
    const auto bytes = read_png_raw(path, false, w, h);
    std::vector<double> data(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) data[i] = bytes[i] / 255.0;
    return ScalarMap(w, h, std::move(data));
}

void write_channel(const fs::path& path, const FloatChannel& ch) {
    std::string blob;
    blob.reserve(ch.planar.size() * 4);
    for (float v : ch.planar) append_le(blob, v);
    write_text(path, blob);
    std::ostringstream hdr;
    hdr << "width " << ch.width << "\nheight " << ch.height << "\nchannels " << ch.channels << "\nname " << ch.name
        << "\n";
    write_text(fs::path(path.string() + ".txt"), hdr.str());
}

FloatChannel read_channel(const fs::path& path) {
    FloatChannel ch;
    std::istringstream hdr(read_text(fs::path(path.string() + ".txt")));
    std::string key;
    while (hdr >> key) {
        if (key == "width") hdr >> ch.width;
        else if (key == "height") hdr >> ch.height;
        else if (key == "channels") hdr >> ch.channels;
        else if (key == "name") hdr >> ch.name;
        else throw Error("unknown sidecar key '" + key + "' in " + path.string());
    }
    const std::string blob = read_text(path);
    const std::size_t n = static_cast<std::size_t>(ch.width) * ch.height * ch.channels;
    if (blob.size() != n * 4) throw Error("channel file size does not match sidecar: " + path.string());
    ch.planar.resize(n);
    const auto* p = reinterpret_cast<const unsigned char*>(blob.data());
    for (std::size_t i = 0; i < n; ++i) ch.planar[i] = read_le(p + 4 * i);
    return ch;
}

FloatChannel to_channel(const ColorImage& img, const std::string& name) {
    FloatChannel ch{img.width(), img.height(), 3, name, {}};
    const std::size_t n = img.pixel_count();
    ch.planar.resize(3 * n);
    for (std::size_t p = 0; p < n; ++p) {
        const Rgb c = img.pixel(p);
        ch.planar[p] = static_cast<float>(c.x);
        ch.planar[n + p] = static_cast<float>(c.y);
        ch.planar[2 * n + p] = static_cast<float>(c.z);
    }
    return ch;
}

FloatChannel to_channel(const ScalarMap& map, const std::string& name) {
    FloatChannel ch{map.width(), map.height(), 1, name, {}};
    ch.planar.resize(map.pixel_count());
    for (std::size_t p = 0; p < map.pixel_count(); ++p) ch.planar[p] = static_cast<float>(map[p]);
    return ch;
}

ColorImage color_from_channel(const FloatChannel& ch) {
    if (ch.channels != 3) throw Error("channel '" + ch.name + "' is not 3-channel");
    ColorImage img(ch.width, ch.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t p = 0; p < n; ++p) img.set_pixel(p, {ch.planar[p], ch.planar[n + p], ch.planar[2 * n + p]});
    return img;
}

ScalarMap scalar_from_channel(const FloatChannel& ch) {
    if (ch.channels != 1) throw Error("channel '" + ch.name + "' is not 1-channel");
    return ScalarMap(ch.width, ch.height, std::vector<double>(ch.planar.begin(), ch.planar.end()));
}

std::map<std::string, std::string> write_stack(const fs::path& dir, const ChannelStack& s) {
    fs::create_directories(dir);
    std::map<std::string, std::string> files;
    auto put = [&](const std::string& name, const FloatChannel& ch) {
        const std::string file = name + ".f32";
        write_channel(dir / file, ch);
        files[name] = file;
    };
    put("image", to_channel(s.image, "image"));
    put("albedo", to_channel(s.albedo, "albedo"));
    put("normals", to_channel(s.normals, "normals"));
    put("depth", to_channel(s.depth, "depth"));
    put("shading", to_channel(s.shading, "shading"));
    put("residual", to_channel(s.residual, "residual"));
    put("object_mask", to_channel(s.object_mask, "object_mask"));
    write_png(dir / "image.png", s.image);
    files["preview"] = "image.png";
    return files;
}

ChannelStack read_stack(const fs::path& dir) {
    ChannelStack s;
    s.image = color_from_channel(read_channel(dir / "image.f32"));
    s.albedo = color_from_channel(read_channel(dir / "albedo.f32"));
    s.normals = color_from_channel(read_channel(dir / "normals.f32"));
    s.depth = scalar_from_channel(read_channel(dir / "depth.f32"));
    s.shading = color_from_channel(read_channel(dir / "shading.f32"));
    s.residual = color_from_channel(read_channel(dir / "residual.f32"));
    s.object_mask = scalar_from_channel(read_channel(dir / "object_mask.f32"));
    return s;
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw Error("SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string mask_hash(const ScalarMap& mask) {
    std::string blob;
    blob.reserve(mask.pixel_count() * 4);
    for (double v : mask.data()) append_le(blob, static_cast<float>(v));
    return sha256_hex({reinterpret_cast<const unsigned char*>(blob.data()), blob.size()});
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed for " + path.string());
}

json to_json(const TraitVector& t) {
    return {{"roughness", t.roughness}, {"metalness", t.metalness}, {"transmission", t.transmission},
            {"thickness", t.thickness}};
}

TraitVector traits_from_json(const json& j) {
    TraitVector t;
    try {
        t.roughness = j.value("roughness", t.roughness);
        t.metalness = j.value("metalness", t.metalness);
        t.transmission = j.value("transmission", t.transmission);
        t.thickness = j.value("thickness", t.thickness);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid traits JSON: ") + e.what());
    }
    t.validate();
    return t;
}

json to_json(const SceneSpec& s) {
    json obj{{"kind", kind_name(s.object.kind)},
             {"center", vec_json(s.object.center)},
             {"size", s.object.size},
             {"rotation_deg", vec_json(s.object.rotation_deg)},
             {"material", material_json(s.object.material)}};
    if (s.object.kind == PrimitiveKind::Mesh) obj["mesh"] = s.object.mesh_source;
    json lights = json::array();
    for (const auto& l : s.lights) {
        lights.push_back({{"kind", l.kind == Light::Kind::Point ? "point" : "directional"},
                          {"vector", vec_json(l.vector)},
                          {"intensity", vec_json(l.intensity)}});
    }
    return {{"object", obj},
            {"floor",
             {{"enabled", s.floor.enabled}, {"height", s.floor.height}, {"material", material_json(s.floor.material)}}},
            {"lights", lights},
            {"ambient", vec_json(s.ambient)},
            {"camera",
             {{"position", vec_json(s.camera.position)},
              {"look_at", vec_json(s.camera.look_at)},
              {"vfov_deg", s.camera.vfov_deg},
              {"width", s.camera.width},
              {"height", s.camera.height}}},
            {"detail_amplitude", s.detail_amplitude},
            {"detail_frequency", s.detail_frequency},
            {"detail_seed", s.detail_seed}};
}

SceneSpec scene_from_json(const json& j, const fs::path& base_dir) {
    try {
        SceneSpec s;
        const auto& o = j.at("object");
        s.object.kind = kind_from(o.at("kind").get<std::string>());
        if (o.contains("center")) s.object.center = vec_from(o["center"]);
        s.object.size = o.value("size", 1.0);
        if (o.contains("rotation_deg")) s.object.rotation_deg = vec_from(o["rotation_deg"]);
        if (o.contains("material")) s.object.material = material_from(o["material"]);
        if (s.object.kind == PrimitiveKind::Mesh) {
            std::string src = o.at("mesh").get<std::string>();
            if (src.rfind("obj:", 0) == 0) {
                fs::path p = src.substr(4);
                if (p.is_relative() && !base_dir.empty()) src = "obj:" + (base_dir / p).string();
            }
            s.object.mesh_source = src;
            s.object.mesh = resolve_mesh(src);
        }
        if (j.contains("floor")) {
            const auto& f = j["floor"];
            s.floor.enabled = f.value("enabled", true);
            s.floor.height = f.value("height", -1.0);
            if (f.contains("material")) s.floor.material = material_from(f["material"]);
        }
        for (const auto& l : j.at("lights")) {
            Light light;
            const std::string kind = l.value("kind", std::string("directional"));
            if (kind == "point") light.kind = Light::Kind::Point;
            else if (kind != "directional") throw ConfigError("unknown light kind '" + kind + "'");
            light.vector = vec_from(l.at("vector"));
            light.intensity = vec_from(l.at("intensity"));
            s.lights.push_back(light);
        }
        if (j.contains("ambient")) s.ambient = vec_from(j["ambient"]);
        if (j.contains("camera")) {
            const auto& c = j["camera"];
            if (c.contains("position")) s.camera.position = vec_from(c["position"]);
            if (c.contains("look_at")) s.camera.look_at = vec_from(c["look_at"]);
            s.camera.vfov_deg = c.value("vfov_deg", s.camera.vfov_deg);
            s.camera.width = c.value("width", s.camera.width);
            s.camera.height = c.value("height", s.camera.height);
        }
        s.detail_amplitude = j.value("detail_amplitude", 0.0);
        s.detail_frequency = j.value("detail_frequency", s.detail_frequency);
        s.detail_seed = j.value("detail_seed", s.detail_seed);
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid scene JSON: ") + e.what());
    }
}

}  // namespace coatsynth::io

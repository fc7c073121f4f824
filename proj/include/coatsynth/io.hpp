#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "coatsynth/core.hpp"
#include "coatsynth/render.hpp"

namespace coatsynth::io {

namespace fs = std::filesystem;

// 8-bit previews. Color images are sRGB-encoded on write and decoded on read;
// masks are written and read as linear gray.
void write_png(const fs::path& path, const ColorImage& linear);
void write_png(const fs::path& path, const ScalarMap& gray);
ColorImage read_png_color(const fs::path& path);
ScalarMap read_png_gray(const fs::path& path);

/// Raw float channel: `<path>` holds planar little-endian float32 data, `<path>.txt`
/// the sidecar header (width, height, channels, name). +inf is stored as the IEEE bit pattern.
struct FloatChannel {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::string name;
    std::vector<float> planar;  // channel-major
};

void write_channel(const fs::path& path, const FloatChannel& channel);
FloatChannel read_channel(const fs::path& path);

FloatChannel to_channel(const ColorImage& img, const std::string& name);
FloatChannel to_channel(const ScalarMap& map, const std::string& name);
ColorImage color_from_channel(const FloatChannel& ch);
ScalarMap scalar_from_channel(const FloatChannel& ch);

/// Writes every channel of a stack (plus an image.png preview) into `dir`.
/// Returns channel name -> file name relative to `dir`.
std::map<std::string, std::string> write_stack(const fs::path& dir, const ChannelStack& stack);
ChannelStack read_stack(const fs::path& dir);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const unsigned char> bytes);
/// Hash of the mask as stored on disk (little-endian float32 values).
std::string mask_hash(const ScalarMap& mask);

std::string read_text(const fs::path& path);
/// Writes atomically enough for our purposes; throws Error when the file cannot be opened.
void write_text(const fs::path& path, const std::string& text);

// JSON conversions.
nlohmann::json to_json(const TraitVector& t);
TraitVector traits_from_json(const nlohmann::json& j);

/// Scene JSON. Textures are stored as procedural descriptors ({"pattern":..}) or embedded
/// pixel arrays; `base_dir` resolves relative "obj:" mesh paths.
nlohmann::json to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& j, const fs::path& base_dir = {});

}  // namespace coatsynth::io

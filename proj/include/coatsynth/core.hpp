#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace coatsynth {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments supplied by the caller (maps to CLI exit code 2).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InvalidThreshold : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

class DegenerateNormal : public Error {
public:
    using Error::Error;
};

class EmptySceneError : public Error {
public:
    using Error::Error;
};

class InsufficientVariants : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Small vector type
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    constexpr double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    constexpr Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }
    constexpr Vec3& operator-=(const Vec3& o) {
        x -= o.x;
        y -= o.y;
        z -= o.z;
        return *this;
    }
    constexpr Vec3& operator*=(double s) {
        x *= s;
        y *= s;
        z *= s;
        return *this;
    }
    constexpr bool operator==(const Vec3&) const = default;
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
/// Component-wise product.
constexpr Vec3 hadamard(const Vec3& a, const Vec3& b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalize(const Vec3& v) { return v / length(v); }
constexpr Vec3 lerp(const Vec3& a, const Vec3& b, double t) { return a + (b - a) * t; }

using Rgb = Vec3;

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

/// Interleaved RGB image of linear radiance (or reflectance) values.
class ColorImage {
public:
    ColorImage() = default;
    ColorImage(int width, int height, Rgb fill = {});
    ColorImage(int width, int height, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return pixel_count() == 0; }

    Rgb at(int x, int y) const {
        const auto i = index(x, y);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set(int x, int y, const Rgb& c) {
        const auto i = index(x, y);
        data_[i] = c.x;
        data_[i + 1] = c.y;
        data_[i + 2] = c.z;
    }
    Rgb pixel(std::size_t p) const { return {data_[3 * p], data_[3 * p + 1], data_[3 * p + 2]}; }
    void set_pixel(std::size_t p, const Rgb& c) {
        data_[3 * p] = c.x;
        data_[3 * p + 1] = c.y;
        data_[3 * p + 2] = c.z;
    }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    /// Bilinear lookup at normalized coordinates (u,v) in [0,1]², texel centers at (i+0.5)/w.
    /// Coordinates outside [0,1] wrap.
    Rgb sample_bilinear(double u, double v) const;

    bool operator==(const ColorImage&) const = default;

private:
    std::size_t index(int x, int y) const { return 3 * (static_cast<std::size_t>(y) * width_ + x); }

    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

class ScalarMap {
public:
    ScalarMap() = default;
    ScalarMap(int width, int height, double fill = 0.0);
    ScalarMap(int width, int height, std::vector<double> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return pixel_count() == 0; }

    double at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator[](std::size_t p) const { return data_[p]; }
    double& operator[](std::size_t p) { return data_[p]; }

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool operator==(const ScalarMap&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// Throws PreconditionError unless the two rasters have equal dimensions.
template <class A, class B>
void require_same_size(const A& a, const B& b, const char* what) {
    if (a.width() != b.width() || a.height() != b.height()) {
        throw PreconditionError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                                std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                std::to_string(b.height()) + ")");
    }
}

// ---------------------------------------------------------------------------
// Coating description
// ---------------------------------------------------------------------------

struct TraitVector {
    double roughness = 0.5;
    double metalness = 0.0;
    double transmission = 0.0;
    double thickness = 0.0;

    /// Throws InvalidArgument naming the first component outside [0,1].
    void validate() const;
    bool operator==(const TraitVector&) const = default;
};

/// Coat albedo: either one uniform color or a texture projected from view.
using CoatAlbedo = std::variant<Rgb, ColorImage>;

struct CoatingSpec {
    TraitVector traits;
    CoatAlbedo albedo = Rgb{0.5, 0.5, 0.5};
    ScalarMap mask;

    bool is_uniform() const { return std::holds_alternative<Rgb>(albedo); }
    /// Albedo at normalized screen coordinates.
    Rgb albedo_at(double u, double v) const;
    void validate() const;
};

// ---------------------------------------------------------------------------
// Color utilities
// ---------------------------------------------------------------------------

inline constexpr double kLumaR = 0.30;
inline constexpr double kLumaG = 0.59;
inline constexpr double kLumaB = 0.11;

constexpr double luminance(const Rgb& c) { return kLumaR * c.x + kLumaG * c.y + kLumaB * c.z; }

/// Hermite smoothstep on [a,b]; throws InvalidThreshold unless a < b.
double smoothstep(double a, double b, double x);

constexpr double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double srgb_encode(double linear);
double srgb_decode(double encoded);

// ---------------------------------------------------------------------------
// Threading
// ---------------------------------------------------------------------------

/// Worker count used by row-parallel loops; 0 selects hardware concurrency.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs fn(row) for every row in [0, rows). Each row must write a disjoint output slice.
void parallel_rows(int rows, const std::function<void(int)>& fn);

}  // namespace coatsynth

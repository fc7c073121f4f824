#include "coatsynth/core.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace coatsynth {

ColorImage::ColorImage(int width, int height, Rgb fill) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw InvalidArgument("ColorImage: negative dimensions");
    data_.resize(pixel_count() * 3);
    for (std::size_t p = 0; p < pixel_count(); ++p) set_pixel(p, fill);
}

ColorImage::ColorImage(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw InvalidArgument("ColorImage: negative dimensions");
    if (data_.size() != pixel_count() * 3) throw InvalidArgument("ColorImage: data length != width*height*3");
}

Rgb ColorImage::sample_bilinear(double u, double v) const {
    if (empty()) return {};
    const double fx = u * width_ - 0.5;
    const double fy = v * height_ - 0.5;
    const double x0f = std::floor(fx);
    const double y0f = std::floor(fy);
    const double tx = fx - x0f;
    const double ty = fy - y0f;
    auto wrap = [](long i, int n) { return static_cast<int>(((i % n) + n) % n); };
    const int x0 = wrap(static_cast<long>(x0f), width_);
    const int y0 = wrap(static_cast<long>(y0f), height_);
    const int x1 = wrap(static_cast<long>(x0f) + 1, width_);
    const int y1 = wrap(static_cast<long>(y0f) + 1, height_);
    const Rgb top = lerp(at(x0, y0), at(x1, y0), tx);
    const Rgb bottom = lerp(at(x0, y1), at(x1, y1), tx);
    return lerp(top, bottom, ty);
}

ScalarMap::ScalarMap(int width, int height, double fill)
    : width_(width), height_(height), data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
    if (width < 0 || height < 0) throw InvalidArgument("ScalarMap: negative dimensions");
}

ScalarMap::ScalarMap(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0) throw InvalidArgument("ScalarMap: negative dimensions");
    if (data_.size() != pixel_count()) throw InvalidArgument("ScalarMap: data length != width*height");
}

void TraitVector::validate() const {
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw InvalidArgument(std::string("trait '") + name + "' must be in [0,1], got " + std::to_string(v));
        }
    };
    check(roughness, "roughness");
    check(metalness, "metalness");
    check(transmission, "transmission");
    check(thickness, "thickness");
}

Rgb CoatingSpec::albedo_at(double u, double v) const {
    if (const auto* c = std::get_if<Rgb>(&albedo)) return *c;
    return std::get<ColorImage>(albedo).sample_bilinear(u, v);
}

void CoatingSpec::validate() const {
    traits.validate();
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (const auto* c = std::get_if<Rgb>(&albedo)) {
        if (!in01(c->x) || !in01(c->y) || !in01(c->z)) throw InvalidArgument("coat color components must be in [0,1]");
    } else {
        const auto& tex = std::get<ColorImage>(albedo);
        if (tex.empty()) throw InvalidArgument("coat albedo texture is empty");
        for (double v : tex.data()) {
            if (!in01(v)) throw InvalidArgument("coat albedo texture values must be in [0,1]");
        }
    }
    for (double m : mask.data()) {
        if (!in01(m)) throw InvalidArgument("coat mask values must be in [0,1]");
    }
}

double smoothstep(double a, double b, double x) {
    if (!(a < b)) {
        throw InvalidThreshold("smoothstep requires a < b (got a=" + std::to_string(a) + ", b=" + std::to_string(b) + ")");
    }
    const double t = clamp01((x - a) / (b - a));
    return t * t * (3.0 - 2.0 * t);
}

double srgb_encode(double linear) {
    const double v = clamp01(linear);
    return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double encoded) {
    const double v = clamp01(encoded);
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

namespace {
std::atomic<unsigned> g_threads{0};
}

void set_thread_count(unsigned threads) { g_threads = threads; }

unsigned thread_count() {
    const unsigned t = g_threads.load();
    if (t != 0) return t;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_rows(int rows, const std::function<void(int)>& fn) {
    const unsigned workers = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max(rows, 1)));
    if (workers <= 1) {
        for (int r = 0; r < rows; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (int r = next++; r < rows; r = next++) fn(r);
        });
    }
}

}  // namespace coatsynth

#include "coatsynth/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace coatsynth {

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::Image: return "image";
        case Channel::Depth: return "depth";
        case Channel::Normals: return "normals";
        case Channel::Albedo: return "albedo";
        case Channel::Shading: return "shading";
        case Channel::Residual: return "residual";
    }
    return "?";
}

double psnr(std::span<const double> a, std::span<const double> b, double peak, double cap) {
    if (a.size() != b.size()) throw PreconditionError("psnr: inputs differ in size");
    if (!(peak > 0.0)) throw InvalidArgument("psnr: peak must be > 0");
    if (a.empty()) return cap;
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    const double mse = sum / static_cast<double>(a.size());
    if (mse <= 0.0) return cap;
    return std::min(cap, 10.0 * std::log10(peak * peak / mse));
}

double psnr_depth(const ScalarMap& prediction, const ScalarMap& ground_truth, double cap) {
    require_same_size(prediction, ground_truth, "psnr_depth");
    double max_depth = 0.0;
    for (double d : ground_truth.data()) {
        if (std::isfinite(d)) max_depth = std::max(max_depth, d);
    }
    std::vector<double> a, b;
    for (std::size_t p = 0; p < ground_truth.pixel_count(); ++p) {
        if (!std::isfinite(ground_truth[p])) continue;
        const double pred = prediction[p];
        // A prediction that misses geometry the ground truth has counts as the far plane.
        a.push_back((std::isfinite(pred) ? pred : max_depth) / (max_depth > 0.0 ? max_depth : 1.0));
        b.push_back(ground_truth[p] / (max_depth > 0.0 ? max_depth : 1.0));
    }
    return psnr(a, b, 1.0, cap);
}

ChannelScores evaluate_sample(const Prediction& prediction, const ChannelStack& gt) {
    ChannelScores s;
    if (const auto* rgb = std::get_if<ColorImage>(&prediction)) {
        require_same_size(*rgb, gt.image, "evaluate_sample");
        s[static_cast<std::size_t>(Channel::Image)] = psnr(rgb->data(), gt.image.data());
        return s;
    }
    const auto& p = std::get<ChannelStack>(prediction);
    require_same_size(p.image, gt.image, "evaluate_sample");
    s[static_cast<std::size_t>(Channel::Image)] = psnr(p.image.data(), gt.image.data());
    s[static_cast<std::size_t>(Channel::Depth)] = psnr_depth(p.depth, gt.depth);
    s[static_cast<std::size_t>(Channel::Normals)] = psnr(p.normals.data(), gt.normals.data(), 2.0);
    s[static_cast<std::size_t>(Channel::Albedo)] = psnr(p.albedo.data(), gt.albedo.data());
    s[static_cast<std::size_t>(Channel::Shading)] = psnr(p.shading.data(), gt.shading.data());
    s[static_cast<std::size_t>(Channel::Residual)] = psnr(p.residual.data(), gt.residual.data());
    return s;
}

Report aggregate_report(const std::vector<MethodResult>& results) {
    if (results.empty()) throw InvalidArgument("aggregate_report: no results");
    Report r;
    for (const auto& m : results) {
        ReportRow row{m.method, {}};
        for (std::size_t c = 0; c < kAllChannels.size(); ++c) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& s : m.samples) {
                if (s[c]) {
                    sum += *s[c];
                    ++n;
                }
            }
            if (n > 0) row.means[c] = sum / static_cast<double>(n);
        }
        r.rows.push_back(std::move(row));
    }
    std::stable_sort(r.rows.begin(), r.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        const double ia = a.means[0].value_or(-1.0);
        const double ib = b.means[0].value_or(-1.0);
        return ia < ib;
    });
    return r;
}

namespace {
std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}
}  // namespace

std::string Report::to_csv() const {
    std::ostringstream out;
    out << "method,image,depth,normals,albedo,shading,residual\n";
    for (const auto& row : rows) {
        out << row.method;
        for (const auto& m : row.means) out << ',' << (m ? fixed2(*m) : "");
        out << '\n';
    }
    return out.str();
}

std::string Report::to_text() const {
    std::size_t name_w = 6;
    for (const auto& row : rows) name_w = std::max(name_w, row.method.size());
    std::ostringstream out;
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
    auto lpad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
    out << pad("Method", name_w);
    for (const char* h : {"Image", "Depth", "Normals", "Albedo", "Shading", "Residual"}) out << "  " << lpad(h, 8);
    out << '\n';
    for (const auto& row : rows) {
        out << pad(row.method, name_w);
        for (const auto& m : row.means) out << "  " << lpad(m ? fixed2(*m) : "-", 8);
        out << '\n';
    }
    return out.str();
}

}  // namespace coatsynth

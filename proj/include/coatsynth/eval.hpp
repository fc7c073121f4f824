#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "coatsynth/core.hpp"
#include "coatsynth/render.hpp"

namespace coatsynth {

inline constexpr double kPsnrCap = 99.0;

enum class Channel { Image, Depth, Normals, Albedo, Shading, Residual };
inline constexpr std::array<Channel, 6> kAllChannels{Channel::Image,  Channel::Depth,   Channel::Normals,
                                                     Channel::Albedo, Channel::Shading, Channel::Residual};
const char* channel_name(Channel c);

/// 10·log10(peak² / MSE), clamped to `cap`. Throws PreconditionError on length mismatch.
double psnr(std::span<const double> a, std::span<const double> b, double peak = 1.0, double cap = kPsnrCap);

/// Depth PSNR: pixels where the ground truth is +inf are dropped and both maps are divided by
/// the ground truth's finite maximum.
double psnr_depth(const ScalarMap& prediction, const ScalarMap& ground_truth, double cap = kPsnrCap);

/// Scores for one sample; absent channels stay nullopt.
using ChannelScores = std::array<std::optional<double>, 6>;

using Prediction = std::variant<ColorImage, ChannelStack>;

/// Full stacks get all six channels; RGB-only predictions get Image only.
ChannelScores evaluate_sample(const Prediction& prediction, const ChannelStack& ground_truth);

struct MethodResult {
    std::string method;
    std::vector<ChannelScores> samples;
};

struct ReportRow {
    std::string method;
    ChannelScores means;
};

struct Report {
    std::vector<ReportRow> rows;  // ascending mean Image PSNR

    std::string to_csv() const;
    std::string to_text() const;
};

/// Per-method channel means. Throws InvalidArgument on empty input.
Report aggregate_report(const std::vector<MethodResult>& results);

}  // namespace coatsynth

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "coatsynth/baselines.hpp"
#include "coatsynth/dataset.hpp"
#include "coatsynth/eval.hpp"
#include "coatsynth/toyflow.hpp"

namespace coatsynth {

/// One add-task evaluation case: the uncoated input, the coating that was applied, and its render.
struct BenchmarkCase {
    std::string scene_id;
    SceneSpec scene;
    CoatingSpec coating;
    ChannelStack original;
    ChannelStack target;
    ColorImage projected_albedo;
};

/// Variant 0 of every group, in manifest order.
std::vector<BenchmarkCase> load_benchmark(const Manifest& manifest);
std::vector<BenchmarkCase> benchmark_from_groups(const std::vector<SceneGroup>& groups);

inline const std::vector<std::string> kBenchmarkMethods{"oracle", "identity", "blend_if", "color_blend", "toy"};

struct BenchmarkOptions {
    BlendIfThresholds thresholds;
    /// Required by the "toy" method.
    std::optional<flow::Checkpoint> checkpoint;
    int sample_steps = 16;
    std::uint64_t seed = 0;
};

/// Prediction of a named method for one case. Throws InvalidArgument for an unknown method
/// and ConfigError when "toy" has no checkpoint.
Prediction run_method(const std::string& method, const BenchmarkCase& c, std::size_t case_index,
                      const BenchmarkOptions& options);

/// Scores every method on every case.
Report run_benchmark(const std::vector<BenchmarkCase>& cases, const std::vector<std::string>& methods,
                     const BenchmarkOptions& options);

/// Toy-model prediction at full resolution: condition at the model's side, sample, upsample.
ColorImage toy_predict(const flow::Checkpoint& checkpoint, const ColorImage& input, const ColorImage& projected_albedo,
                       const ScalarMap& mask, const flow::GlobalConditioning& global, int steps, Rng& rng);

}  // namespace coatsynth

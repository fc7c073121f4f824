#include "coatsynth/benchmark.hpp"

#include <algorithm>

namespace coatsynth {

std::vector<BenchmarkCase> benchmark_from_groups(const std::vector<SceneGroup>& groups) {
    std::vector<BenchmarkCase> cases;
    for (const auto& g : groups) {
        if (g.variants.empty()) throw InsufficientVariants("benchmark group " + g.scene_id + " has no variants");
        const CoatedVariant& v = g.variants.front();
        cases.push_back({g.scene_id, g.scene, v.coating, g.original, v.render, v.projected_albedo});
    }
    return cases;
}

std::vector<BenchmarkCase> load_benchmark(const Manifest& manifest) {
    std::vector<SceneGroup> groups;
    for (std::size_t i = 0; i < manifest.groups.size(); ++i) groups.push_back(load_group(manifest, i));
    return benchmark_from_groups(groups);
}

ColorImage toy_predict(const flow::Checkpoint& checkpoint, const ColorImage& input, const ColorImage& projected_albedo,
                       const ScalarMap& mask, const flow::GlobalConditioning& global, int steps, Rng& rng) {
    const int side = checkpoint.config.side;
    const int patch = checkpoint.config.patch;
    const flow::TokenSequence cond = flow::build_conditioning(
        flow::planes_from(flow::resize_to(input, side)), flow::planes_from(flow::resize_to(projected_albedo, side)),
        flow::planes_from(flow::resize_to(mask, side)), patch);
    const ColorImage small = flow::sample(checkpoint.params, cond, global, steps, rng, side, patch);
    return flow::upsample_to(small, input.width(), input.height());
}

Prediction run_method(const std::string& method, const BenchmarkCase& c, std::size_t case_index,
                      const BenchmarkOptions& options) {
    if (method == "oracle") return render_coated(c.scene, c.coating);
    if (method == "identity") return c.original.image;
    if (method == "blend_if") return blend_if(c.original.image, c.projected_albedo, c.coating.mask, options.thresholds);
    if (method == "color_blend") return color_blend(c.original.image, c.projected_albedo, c.coating.mask);
    if (method == "toy") {
        if (!options.checkpoint) throw ConfigError("method 'toy' requires a checkpoint");
        Rng rng(options.seed, case_index);
        const flow::GlobalConditioning global{c.coating.traits,
                                              c.coating.is_uniform() ? TaskKind::AddUniform : TaskKind::AddTextured};
        return toy_predict(*options.checkpoint, c.original.image, c.projected_albedo, c.coating.mask, global,
                           options.sample_steps, rng);
    }
    std::string valid;
    for (const auto& m : kBenchmarkMethods) valid += (valid.empty() ? "" : ", ") + m;
    throw InvalidArgument("unknown method '" + method + "' (valid: " + valid + ")");
}

Report run_benchmark(const std::vector<BenchmarkCase>& cases, const std::vector<std::string>& methods,
                     const BenchmarkOptions& options) {
    if (methods.empty()) throw InvalidArgument("no methods given");
    if (cases.empty()) throw InvalidArgument("benchmark has no cases");
    std::vector<MethodResult> results;
    for (const auto& method : methods) {
        MethodResult r{method, {}};
        for (std::size_t i = 0; i < cases.size(); ++i) {
            r.samples.push_back(evaluate_sample(run_method(method, cases[i], i, options), cases[i].target));
        }
        results.push_back(std::move(r));
    }
    return aggregate_report(results);
}

}  // namespace coatsynth

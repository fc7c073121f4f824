#include <doctest.h>

#include "coatsynth/benchmark.hpp"

using namespace coatsynth;

namespace {
std::vector<SceneGroup> tiny_groups() {
    DatasetConfig c;
    c.groups = 3;
    c.variants = 2;
    c.width = c.height = 32;
    return build_groups(c, 21);
}
}  // namespace

TEST_CASE("benchmark cases come from variant 0") {
    const auto groups = tiny_groups();
    const auto cases = benchmark_from_groups(groups);
    REQUIRE(cases.size() == 3);
    CHECK(cases[1].scene_id == groups[1].scene_id);
    CHECK(cases[1].target.image == groups[1].variants[0].render.image);
    CHECK(cases[1].original.image == groups[1].original.image);
    SceneGroup empty = groups[0];
    empty.variants.clear();
    CHECK_THROWS_AS(benchmark_from_groups({empty}), InsufficientVariants);
}

TEST_CASE("methods") {
    const auto cases = benchmark_from_groups(tiny_groups());
    const BenchmarkOptions opt;
    const ChannelScores oracle = evaluate_sample(run_method("oracle", cases[0], 0, opt), cases[0].target);
    for (const auto& s : oracle) CHECK(s.value_or(0.0) == kPsnrCap);

    const Prediction identity = run_method("identity", cases[0], 0, opt);
    CHECK(std::get<ColorImage>(identity) == cases[0].original.image);

    const auto& bi = std::get<ColorImage>(run_method("blend_if", cases[0], 0, opt));
    CHECK(bi == blend_if(cases[0].original.image, cases[0].projected_albedo, cases[0].coating.mask));

    CHECK_THROWS_AS(run_method("magic", cases[0], 0, opt), InvalidArgument);
    CHECK_THROWS_AS(run_method("toy", cases[0], 0, opt), ConfigError);
}

TEST_CASE("toy method with a checkpoint") {
    const auto groups = tiny_groups();
    flow::TrainConfig c;
    c.total_steps = 2;
    c.batch_size = 1;
    c.side = 16;
    c.hidden = 4;
    BenchmarkOptions opt;
    opt.checkpoint = flow::Checkpoint{c, flow::train(groups, c).params};
    opt.sample_steps = 2;
    const auto cases = benchmark_from_groups(groups);
    const auto& out = std::get<ColorImage>(run_method("toy", cases[0], 0, opt));
    CHECK(out.width() == 32);
    CHECK(std::get<ColorImage>(run_method("toy", cases[0], 0, opt)) == out);
}

TEST_CASE("benchmark report") {
    const auto cases = benchmark_from_groups(tiny_groups());
    const Report r = run_benchmark(cases, {"oracle", "identity", "color_blend"}, {});
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows.back().method == "oracle");
    CHECK_THROWS_AS(run_benchmark(cases, {}, {}), InvalidArgument);
    CHECK_THROWS_AS(run_benchmark({}, {"oracle"}, {}), InvalidArgument);
}

// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [--only <name>] [--list]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "coatsynth/baselines.hpp"
#include "coatsynth/benchmark.hpp"
#include "coatsynth/dataset.hpp"
#include "coatsynth/io.hpp"
#include "coatsynth/mesh.hpp"
#include "coatsynth/render.hpp"
#include "coatsynth/toyflow.hpp"
#include "test_support.hpp"

using namespace coatsynth;
using namespace coatsynth::testing;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome extrusion() {
    const auto start = Clock::now();
    const TriangleMesh sphere = make_icosphere(3, 1.0);
    const TriangleMesh cover = extrude_cover(sphere, 0.0004, 1.0005);
    const double elapsed = seconds_since(start);
    double worst = 0.0;
    for (const auto& p : cover.vertices()) worst = std::max(worst, std::abs(length(p) - 1.0009002));
    const bool topology = cover.faces() == sphere.faces() && cover.vertex_count() == sphere.vertex_count();
    return {worst <= 1e-6 && topology && elapsed < 1.0,
            fmt("max |r - 1.00090| = %.2e, topology %s, %.3f s", worst, topology ? "same" : "changed", elapsed)};
}

Outcome thickness_monotonicity() {
    const auto start = Clock::now();
    const SceneSpec scene = make_reference_scene(256);
    const ChannelStack plain = render_uncoated(scene);
    Rng rng(3);
    CoatingSpec coat;
    coat.mask = generate_mask(plain, rng, 0.5);
    coat.albedo = Rgb{0.8, 0.2, 0.2};
    const std::vector<double> sweep{0.0, 0.25, 0.5, 0.75, 1.0};

    std::vector<double> diffs, variances;
    for (double t : sweep) {
        coat.traits = {0.5, 0.0, 1.0, t};
        diffs.push_back(masked_mean_abs_diff(render_coated(scene, coat).image, plain.image, coat.mask));
        coat.traits = {0.5, 0.0, 0.0, t};
        variances.push_back(local_normal_variance(render_coated(scene, coat).normals, coat.mask));
    }
    const double elapsed = seconds_since(start);
    bool ok = elapsed < 30.0;
    for (std::size_t i = 1; i < sweep.size(); ++i) {
        ok = ok && diffs[i] >= diffs[i - 1] && variances[i] <= variances[i - 1];
    }
    return {ok, fmt("diff %.4f..%.4f, normal variance %.3e..%.3e, %.1f s", diffs.front(), diffs.back(),
                    variances.front(), variances.back(), elapsed)};
}

Outcome no_op_coat() {
    const auto start = Clock::now();
    const SceneSpec scene = make_reference_scene(256);
    const ChannelStack plain = render_uncoated(scene);
    Rng rng(5);
    CoatingSpec coat;
    coat.mask = generate_mask(plain, rng, 0.5);
    coat.albedo = Rgb{0.2, 0.7, 0.3};
    coat.traits = {0.5, 0.0, 1.0, 0.0};
    const ChannelStack c = render_coated(scene, coat);
    const double elapsed = seconds_since(start);
    const double db = psnr(c.image.data(), plain.image.data());
    std::size_t changed = 0;
    for (std::size_t p = 0; p < coat.mask.pixel_count(); ++p) {
        if (coat.mask[p] == 0.0 && !(c.image.pixel(p) == plain.image.pixel(p))) ++changed;
    }
    return {db >= 40.0 && changed == 0 && elapsed < 10.0,
            fmt("PSNR %.2f dB, %zu off-mask pixels changed, %.2f s", db, changed, elapsed)};
}

ColorImage random_image(Rng& rng, int w, int h) {
    ColorImage img(w, h);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

ScalarMap random_mask(Rng& rng, int w, int h) {
    ScalarMap m(w, h);
    for (std::size_t p = 0; p < m.pixel_count(); ++p) m[p] = rng.bernoulli(0.6) ? rng.uniform() : 0.0;
    return m;
}

Outcome color_blend_luminance() {
    const auto start = Clock::now();
    Rng rng(100);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const ColorImage base = random_image(rng, 64, 64), coat = random_image(rng, 64, 64);
        const ScalarMap mask = random_mask(rng, 64, 64);
        const ColorImage out = color_blend(base, coat, mask);
        for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
            if (mask[p] > 0.0) worst = std::max(worst, std::abs(luminance(out.pixel(p)) - luminance(base.pixel(p))));
        }
    }
    const double elapsed = seconds_since(start);
    return {worst < 1e-6 && elapsed < 5.0, fmt("max luminance error %.2e, %.2f s", worst, elapsed)};
}

Outcome blend_if_suppression() {
    Rng rng(17);
    std::size_t checked = 0, violations = 0;
    for (const BlendIfThresholds t : {BlendIfThresholds{}, BlendIfThresholds{0.1, 0.3, 0.6, 0.9}}) {
        for (int i = 0; i < 20; ++i) {
            ColorImage base = random_image(rng, 32, 32);
            // Push a share of pixels to the extremes so both boundaries are exercised.
            for (std::size_t p = 0; p < base.pixel_count(); ++p) {
                const double u = rng.uniform();
                if (u < 0.15) base.set_pixel(p, Rgb{0, 0, 0});
                else if (u < 0.3) base.set_pixel(p, Rgb{1, 1, 1});
            }
            const ColorImage coat = random_image(rng, 32, 32);
            const ColorImage out = blend_if(base, coat, ScalarMap(32, 32, 1.0), t);
            for (std::size_t p = 0; p < base.pixel_count(); ++p) {
                const double L = luminance(base.pixel(p));
                if (L <= t.lo0 || L >= t.hi1) {
                    ++checked;
                    if (!(out.pixel(p) == base.pixel(p))) ++violations;
                }
            }
        }
    }
    return {checked > 0 && violations == 0, fmt("%zu boundary pixels, %zu changed", checked, violations)};
}

Outcome conditioning_arithmetic() {
    const flow::Planes image(16, 128, 128), albedo(16, 128, 128), latent(16, 128, 128), mask(1, 1024, 1024);
    const flow::TokenSequence seq = flow::build_conditioning(image, albedo, mask, 2, 8, &latent);
    const bool ok = seq.size() == 4096 && seq.dim() == 448 && seq.layout == flow::TokenLayout{64, 64, 64, 256};
    return {ok, fmt("%ld tokens x %d (latent %d, image %d, albedo %d, mask %d)", static_cast<long>(seq.size()),
                    seq.dim(), seq.layout.latent, seq.layout.image, seq.layout.albedo, seq.layout.mask)};
}

Outcome trait_embedding_identity() {
    Rng rng(6);
    const flow::TraitEmbeddingTable table = flow::TraitEmbeddingTable::random(16, rng, 1.0);
    const auto tokens = flow::embed_traits(TraitVector{0.0, 0.0, 0.0, 0.0}, TaskKind::AddUniform, table);
    // At zero the roughness and thickness tokens are exactly their position embeddings.
    const bool zero_ok = tokens.size() == 5 && tokens[1] == table.position[0] && tokens[4] == table.position[3];
    const auto removed = flow::embed_traits(std::nullopt, TaskKind::Remove, table);
    const bool remove_ok = removed.size() == 1;
    return {zero_ok && remove_ok,
            fmt("zero traits -> position embeddings: %s; remove task tokens: %zu", zero_ok ? "exact" : "differ",
                removed.size())};
}

Outcome gradient_check() {
    const auto start = Clock::now();
    Rng rng(0);
    const flow::FlowModelParams model = flow::make_reference_model(rng);
    const flow::FlowInstance inst = flow::make_reference_instance(4, model.token_dim, model.cond_dim, rng);
    const double err = flow::grad_check(model, inst);
    const double elapsed = seconds_since(start);
    return {err < 1e-4 && model.parameter_count() <= 1000 && elapsed < 60.0,
            fmt("%zu parameters, max relative error %.2e, %.2f s", model.parameter_count(), err, elapsed)};
}

// Shared by the training and sensitivity criteria.
struct Trained {
    flow::TrainConfig config;
    flow::TrainResult result;
    double seconds = 0.0;
};

const Trained& trained_model() {
    static const Trained t = [] {
        DatasetConfig data;
        data.groups = 24;
        data.variants = 8;
        data.width = data.height = 32;
        const auto groups = build_groups(data, 7);
        Trained out;
        out.config.total_steps = 500;
        out.config.learning_rate = 3e-3;
        out.config.warmup_steps = 300;
        out.config.seed = 1;
        const auto start = Clock::now();
        out.result = flow::train(groups, out.config);
        out.seconds = seconds_since(start);
        return out;
    }();
    return t;
}

Outcome toy_training() {
    const Trained& t = trained_model();
    const auto smooth = flow::smooth_curve(t.result.loss_curve, 50);
    const double first = smooth[49], last = smooth.back();
    const double ratio = last / first;

    Rng rng(2024);
    std::array<int, 3> counts{};
    for (auto task : sample_task_mixture(rng, 100000)) ++counts[static_cast<std::size_t>(task)];
    const std::array<double, 3> expected{0.34, 0.33, 0.33};
    bool mixture = true;
    for (std::size_t i = 0; i < 3; ++i) mixture = mixture && std::abs(counts[i] / 1e5 - expected[i]) <= 0.01;

    return {ratio <= 0.5 && mixture && t.seconds < 600.0,
            fmt("smoothed loss %.4f -> %.4f (ratio %.3f), mixture %.4f/%.4f/%.4f, %.1f s", first, last, ratio,
                counts[0] / 1e5, counts[1] / 1e5, counts[2] / 1e5, t.seconds)};
}

double masked_red_minus_blue(const ColorImage& img, const ScalarMap& mask) {
    double sum = 0.0, w = 0.0;
    for (std::size_t p = 0; p < mask.pixel_count(); ++p) {
        const Rgb c = img.pixel(p);
        sum += mask[p] * (c.x - c.z);
        w += mask[p];
    }
    return w > 0.0 ? sum / w : 0.0;
}

Outcome conditioning_sensitivity() {
    const Trained& t = trained_model();
    const flow::Checkpoint ckpt{t.config, t.result.params};

    DatasetConfig data;
    data.groups = 8;
    data.variants = 1;
    data.width = data.height = 32;
    const auto held_out = build_groups(data, 1234);

    int matching = 0;
    for (std::size_t i = 0; i < held_out.size(); ++i) {
        const SceneGroup& g = held_out[i];
        auto predict = [&](Rgb color) {
            CoatingSpec coat;
            coat.mask = g.mask;
            coat.albedo = color;
            coat.traits = {0.5, 0.0, 0.0, 1.0};
            const ColorImage projected = project_albedo(coat, g.original);
            Rng noise(99, i);
            return toy_predict(ckpt, g.original.image, projected, g.mask,
                               flow::GlobalConditioning{coat.traits, TaskKind::AddUniform}, 16, noise);
        };
        const double red = masked_red_minus_blue(predict(Rgb{0.9, 0.1, 0.1}), g.mask);
        const double blue = masked_red_minus_blue(predict(Rgb{0.1, 0.1, 0.9}), g.mask);
        if (red > blue) ++matching;
    }
    return {matching >= 7, fmt("%d/8 held-out scenes shift toward the conditioning color", matching)};
}

// ---------------------------------------------------------------------------
// CLI-driven criteria

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + CLI_PATH + "\" " + args + " > /dev/null";
    return std::system(cmd.c_str());
}

std::map<std::string, double> image_psnr_by_method(const fs::path& csv) {
    std::map<std::string, double> out;
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string method, image;
        std::getline(ss, method, ',');
        std::getline(ss, image, ',');
        if (!image.empty()) out[method] = std::stod(image);
    }
    return out;
}

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d(WORK_DIR);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::optional<double> run_benchmark_once(const std::string& tag) {
    const fs::path dir = work_dir() / tag;
    fs::remove_all(dir);
    const std::string data = (dir / "data").string();
    const auto start = Clock::now();
    if (run_cli("gen --out \"" + data + "\" --groups 24 --variants 2 --size 64 --seed 1") != 0) return std::nullopt;
    if (run_cli("eval --manifest \"" + data + "/manifest.json\" --methods oracle,blend_if,identity,color_blend --out \"" +
                (dir / "report.csv").string() + "\"") != 0) {
        return std::nullopt;
    }
    return seconds_since(start);
}

Outcome evaluation_ordering() {
    const auto seconds = run_benchmark_once("ordering");
    if (!seconds) return {false, "gen/eval failed"};
    auto scores = image_psnr_by_method(work_dir() / "ordering" / "report.csv");
    const double oracle = scores["oracle"], bi = scores["blend_if"], id = scores["identity"];
    return {oracle >= bi && bi >= id && *seconds < 120.0,
            fmt("image PSNR oracle %.2f, blend_if %.2f, identity %.2f, color_blend %.2f, %.1f s", oracle, bi, id,
                scores["color_blend"], *seconds)};
}

std::string file_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome end_to_end_determinism() {
    if (!run_benchmark_once("run_a") || !run_benchmark_once("run_b")) return {false, "gen/eval failed"};
    const fs::path a = work_dir() / "run_a", b = work_dir() / "run_b";
    const bool manifest = file_bytes(a / "data" / "manifest.json") == file_bytes(b / "data" / "manifest.json");
    const bool report = file_bytes(a / "report.csv") == file_bytes(b / "report.csv");
    const bool nonempty = !file_bytes(a / "report.csv").empty();
    return {manifest && report && nonempty,
            fmt("manifest %s, report %s", manifest ? "identical" : "differs", report ? "identical" : "differs")};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
    static const std::vector<std::pair<std::string, std::function<Outcome()>>> list{
        {"extrusion_geometry", extrusion},
        {"thickness_monotonicity", thickness_monotonicity},
        {"no_op_coat", no_op_coat},
        {"color_blend_luminance", color_blend_luminance},
        {"blend_if_boundary", blend_if_suppression},
        {"conditioning_arithmetic", conditioning_arithmetic},
        {"trait_embedding_identity", trait_embedding_identity},
        {"gradient_check", gradient_check},
        {"toy_training", toy_training},
        {"conditioning_sensitivity", conditioning_sensitivity},
        {"evaluation_ordering", evaluation_ordering},
        {"end_to_end_determinism", end_to_end_determinism},
    };
    return list;
}

}  // namespace

int main(int argc, char** argv) {
    std::string only;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--list") {
            for (const auto& [name, fn] : criteria()) std::printf("%s\n", name.c_str());
            return 0;
        }
        if (a == "--only" && i + 1 < argc) {
            only = argv[++i];
        } else {
            std::fprintf(stderr, "usage: acceptance [--only <name>] [--list]\n");
            return 2;
        }
    }

    int failed = 0, ran = 0;
    for (const auto& [name, fn] : criteria()) {
        if (!only.empty() && name != only) continue;
        ++ran;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    if (ran == 0) {
        std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
        return 2;
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}

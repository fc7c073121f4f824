// coatsynth command-line tool.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "coatsynth/baselines.hpp"
#include "coatsynth/benchmark.hpp"
#include "coatsynth/dataset.hpp"
#include "coatsynth/eval.hpp"
#include "coatsynth/io.hpp"
#include "coatsynth/render.hpp"
#include "coatsynth/toyflow.hpp"

namespace fs = std::filesystem;
using namespace coatsynth;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text, std::size_t expected, const std::string& flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(flag + ": '" + item + "' is not a number");
        }
    }
    if (out.size() != expected) {
        throw UsageError(flag + ": expected " + std::to_string(expected) + " comma-separated values, got '" + text + "'");
    }
    return out;
}

Rgb parse_color(const std::string& text, const std::string& flag) {
    const auto v = parse_list(text, 3, flag);
    for (double c : v) {
        if (c < 0.0 || c > 1.0) throw UsageError(flag + ": components must be in [0,1]");
    }
    return {v[0], v[1], v[2]};
}

void check_unit(double v, const std::string& flag) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(flag + " must be in [0,1], got " + std::to_string(v));
}

ScalarMap load_mask(const fs::path& path) {
    if (path.extension() == ".png") return io::read_png_gray(path);
    return io::scalar_from_channel(io::read_channel(path));
}

ColorImage load_color(const fs::path& path) {
    if (path.extension() == ".png") return io::read_png_color(path);
    return io::color_from_channel(io::read_channel(path));
}

json load_json_file(const fs::path& path) {
    try {
        return json::parse(io::read_text(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<SceneGroup> load_all_groups(const Manifest& m) {
    std::vector<SceneGroup> groups;
    for (std::size_t i = 0; i < m.groups.size(); ++i) groups.push_back(load_group(m, i));
    return groups;
}

// ---------------------------------------------------------------------------

struct GenArgs {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    int groups = -1;
    int variants = -1;
    int size = -1;
};

int run_gen(const GenArgs& a) {
    DatasetConfig config = a.config.empty() ? DatasetConfig{} : DatasetConfig::from_json(load_json_file(a.config));
    if (a.groups >= 0) config.groups = a.groups;
    if (a.variants >= 0) config.variants = a.variants;
    if (a.size >= 0) config.width = config.height = a.size;
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const Manifest m = generate_dataset(config, a.seed, a.out);
    validate_manifest(m);
    std::printf("generated %zu groups x %d variants in %.2f s -> %s\n", m.groups.size(), config.variants,
                seconds_since(start), (fs::path(a.out) / "manifest.json").string().c_str());
    return kExitOk;
}

struct CoatArgs {
    std::string scene;
    std::string albedo;
    std::string color;
    std::string mask;
    double roughness = 0.5;
    double metalness = 0.0;
    double transmission = 0.0;
    double thickness = 0.0;
    std::string out;
    bool uncoated = false;
};

int run_coat(const CoatArgs& a) {
    check_unit(a.roughness, "--roughness");
    check_unit(a.metalness, "--metalness");
    check_unit(a.transmission, "--transmission");
    check_unit(a.thickness, "--thickness");
    if (!a.albedo.empty() && !a.color.empty()) throw UsageError("--albedo and --color are mutually exclusive");

    const SceneSpec scene = io::scene_from_json(load_json_file(a.scene), fs::path(a.scene).parent_path());
    const fs::path out(a.out);
    const fs::path channels = out.parent_path() / (out.stem().string() + "_channels");
    ChannelStack stack;
    if (a.uncoated) {
        stack = render_uncoated(scene);
    } else {
        CoatingSpec coat;
        coat.traits = {a.roughness, a.metalness, a.transmission, a.thickness};
        if (!a.albedo.empty()) coat.albedo = load_color(a.albedo);
        else if (!a.color.empty()) coat.albedo = parse_color(a.color, "--color");
        if (a.mask.empty()) {
            const ChannelStack plain = render_uncoated(scene);
            coat.mask = plain.object_mask;
        } else {
            coat.mask = load_mask(a.mask);
        }
        stack = render_coated(scene, coat);
    }
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    io::write_png(out, stack.image);
    io::write_stack(channels, stack);
    std::printf("wrote %s and channels in %s\n", out.string().c_str(), channels.string().c_str());
    return kExitOk;
}

struct BaselineArgs {
    std::string method;
    std::string base;
    std::string coat;
    std::string color;
    std::string mask;
    std::string thresholds = "0,0.25,0.75,1";
    std::string out;
};

int run_baseline(const BaselineArgs& a) {
    if (a.method != "blend_if" && a.method != "color_blend") {
        throw UsageError("unknown --method '" + a.method + "' (valid: blend_if, color_blend)");
    }
    if (a.coat.empty() == a.color.empty()) throw UsageError("give exactly one of --coat or --color");
    const auto t = parse_list(a.thresholds, 4, "--blend-if-thresholds");
    const BlendIfThresholds thresholds{t[0], t[1], t[2], t[3]};
    try {
        thresholds.validate();
    } catch (const InvalidThreshold& e) {
        throw UsageError(std::string("--blend-if-thresholds: ") + e.what());
    }
    const ColorImage base = load_color(a.base);
    const ScalarMap mask = a.mask.empty() ? ScalarMap(base.width(), base.height(), 1.0) : load_mask(a.mask);
    const ColorImage layer =
        a.coat.empty() ? ColorImage(base.width(), base.height(), parse_color(a.color, "--color")) : load_color(a.coat);
    const ColorImage out = a.method == "blend_if" ? blend_if(base, layer, mask, thresholds) : color_blend(base, layer, mask);
    const fs::path path(a.out);
    if (path.extension() == ".png") io::write_png(path, out);
    else io::write_channel(path, io::to_channel(out, "image"));
    std::printf("wrote %s\n", path.string().c_str());
    return kExitOk;
}

struct EvalArgs {
    std::string manifest;
    std::string methods;
    std::string out;
    std::string checkpoint;
    std::string thresholds = "0,0.25,0.75,1";
    int steps = 16;
    std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
    std::vector<std::string> methods;
    {
        std::stringstream ss(a.methods);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (item.empty()) continue;
            if (std::find(kBenchmarkMethods.begin(), kBenchmarkMethods.end(), item) == kBenchmarkMethods.end()) {
                throw UsageError("unknown method '" + item + "' (valid: oracle, identity, blend_if, color_blend, toy)");
            }
            methods.push_back(item);
        }
    }
    if (methods.empty()) throw UsageError("--methods must name at least one method");
    BenchmarkOptions options;
    const auto t = parse_list(a.thresholds, 4, "--blend-if-thresholds");
    options.thresholds = {t[0], t[1], t[2], t[3]};
    options.thresholds.validate();
    options.sample_steps = a.steps;
    options.seed = a.seed;
    if (std::find(methods.begin(), methods.end(), "toy") != methods.end()) {
        if (a.checkpoint.empty()) throw UsageError("method 'toy' requires --checkpoint");
        options.checkpoint = flow::read_checkpoint(a.checkpoint);
    }
    const Manifest m = read_manifest(a.manifest);
    validate_manifest(m);
    const Report report = run_benchmark(load_benchmark(m), methods, options);
    const fs::path out(a.out);
    if (!out.parent_path().empty()) fs::create_directories(out.parent_path());
    io::write_text(out, report.to_csv());
    fs::path text = out;
    text.replace_extension(".txt");
    io::write_text(text, report.to_text());
    std::fputs(report.to_text().c_str(), stdout);
    return kExitOk;
}

struct TrainArgs {
    std::string config;
    std::string manifest;
    std::string checkpoint;
    std::string loss_csv;
    int steps = -1;
    double lr = -1.0;
    std::uint64_t seed = 0;
    std::uint64_t data_seed = 7;
    int groups = 24;
    int variants = 8;
};

int run_train(const TrainArgs& a) {
    flow::TrainConfig config = a.config.empty() ? flow::TrainConfig{} : flow::TrainConfig::from_json(load_json_file(a.config));
    if (a.steps >= 0) config.total_steps = a.steps;
    if (a.lr > 0.0) config.learning_rate = a.lr;
    config.seed = a.seed;
    config.validate();

    std::vector<SceneGroup> groups;
    if (!a.manifest.empty()) {
        groups = load_all_groups(read_manifest(a.manifest));
    } else {
        DatasetConfig dc;
        dc.groups = a.groups;
        dc.variants = a.variants;
        groups = build_groups(dc, a.data_seed);
    }
    const auto start = std::chrono::steady_clock::now();
    const flow::TrainResult result = flow::train(groups, config);
    const fs::path ck(a.checkpoint);
    if (!ck.parent_path().empty()) fs::create_directories(ck.parent_path());
    flow::write_checkpoint(ck, result.params, config);
    const fs::path loss = a.loss_csv.empty() ? fs::path(a.checkpoint + ".loss.csv") : fs::path(a.loss_csv);
    std::string csv = "step,loss\n";
    char line[64];
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.9g\n", i, result.loss_curve[i]);
        csv += line;
    }
    io::write_text(loss, csv);
    if (!result.loss_curve.empty()) {
        const auto smooth = flow::smooth_curve(result.loss_curve, 50);
        std::printf("trained %d steps in %.1f s; smoothed loss %.4f -> %.4f\n", config.total_steps, seconds_since(start),
                    smooth[std::min<std::size_t>(49, smooth.size() - 1)], smooth.back());
    } else {
        std::printf("wrote initial checkpoint (0 steps)\n");
    }
    std::printf("checkpoint %s, loss curve %s\n", ck.string().c_str(), loss.string().c_str());
    return kExitOk;
}

struct SampleArgs {
    std::string checkpoint;
    std::string manifest;
    std::size_t group = 0;
    std::size_t variant = 0;
    std::string task = "add";
    std::string color;
    int steps = 16;
    std::uint64_t seed = 0;
    std::string out;
};

int run_sample(const SampleArgs& a) {
    if (a.task != "add" && a.task != "remove") throw UsageError("--task must be 'add' or 'remove'");
    const flow::Checkpoint ck = flow::read_checkpoint(a.checkpoint);
    const Manifest m = read_manifest(a.manifest);
    if (a.group >= m.groups.size()) throw UsageError("--group out of range (have " + std::to_string(m.groups.size()) + ")");
    const SceneGroup g = load_group(m, a.group);
    if (a.variant >= g.variants.size()) throw UsageError("--variant out of range");
    const CoatedVariant& v = g.variants[a.variant];

    Rng rng(a.seed, 0);
    ColorImage out;
    if (a.task == "remove") {
        const ColorImage black(g.original.width(), g.original.height());
        out = toy_predict(ck, v.render.image, black, g.mask, {std::nullopt, TaskKind::Remove}, a.steps, rng);
    } else {
        CoatingSpec coat = v.coating;
        if (!a.color.empty()) coat.albedo = parse_color(a.color, "--color");
        const ColorImage projected = project_albedo(coat, g.original);
        const TaskKind task = coat.is_uniform() ? TaskKind::AddUniform : TaskKind::AddTextured;
        out = toy_predict(ck, g.original.image, projected, g.mask, {coat.traits, task}, a.steps, rng);
    }
    io::write_png(a.out, out);
    std::printf("wrote %s\n", a.out.c_str());
    return kExitOk;
}

int run_gradcheck(std::uint64_t seed) {
    Rng rng(seed, 0);
    const flow::FlowModelParams model = flow::make_reference_model(rng);
    const flow::FlowInstance inst = flow::make_reference_instance(4, model.token_dim, model.cond_dim, rng);
    const double err = flow::grad_check(model, inst);
    std::printf("parameters %zu, max relative error %.3e\n", model.parameter_count(), err);
    return err < 1e-4 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"coatsynth: material-coating synthesis, baselines, evaluation and a toy flow model"};
    app.set_version_flag("--version", std::string("coatsynth ") + COATSYNTH_VERSION);
    app.require_subcommand(1);
    unsigned threads = 0;
    app.add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a dataset and manifest");
    gen_cmd->add_option("--config", gen.config, "Dataset config JSON")->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--seed", gen.seed, "Master seed");
    gen_cmd->add_option("--groups", gen.groups, "Override group count")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--variants", gen.variants, "Override variants per group")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--size", gen.size, "Override image side length")->check(CLI::PositiveNumber);

    CoatArgs coat;
    auto* coat_cmd = app.add_subcommand("coat", "Render a scene with a coating applied");
    coat_cmd->add_option("--scene", coat.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
    coat_cmd->add_option("--albedo", coat.albedo, "Coat albedo texture (.png or .f32)")->check(CLI::ExistingFile);
    coat_cmd->add_option("--color", coat.color, "Uniform coat albedo r,g,b in [0,1]");
    coat_cmd->add_option("--mask", coat.mask, "Coat mask (.png or .f32); default: whole object")->check(CLI::ExistingFile);
    coat_cmd->add_option("--roughness", coat.roughness, "Coat roughness in [0,1]");
    coat_cmd->add_option("--metalness", coat.metalness, "Coat metalness in [0,1]");
    coat_cmd->add_option("--transmission", coat.transmission, "Coat transmission in [0,1]");
    coat_cmd->add_option("--thickness", coat.thickness, "Coat thickness in [0,1]");
    coat_cmd->add_flag("--uncoated", coat.uncoated, "Render without any coat");
    coat_cmd->add_option("--out", coat.out, "Output PNG; channels go to <stem>_channels/")->required();

    BaselineArgs base;
    auto* base_cmd = app.add_subcommand("baseline", "Composite a coat layer with a classical blend mode");
    base_cmd->add_option("--method", base.method, "blend_if or color_blend")->required();
    base_cmd->add_option("--base", base.base, "Base image (.png or .f32)")->required()->check(CLI::ExistingFile);
    base_cmd->add_option("--coat", base.coat, "Coat layer image (.png or .f32)")->check(CLI::ExistingFile);
    base_cmd->add_option("--color", base.color, "Uniform coat layer r,g,b");
    base_cmd->add_option("--mask", base.mask, "Mask (.png or .f32); default: everywhere")->check(CLI::ExistingFile);
    base_cmd->add_option("--blend-if-thresholds", base.thresholds, "lo0,lo1,hi0,hi1");
    base_cmd->add_option("--out", base.out, "Output (.png or .f32)")->required();

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score methods on a dataset's benchmark split");
    eval_cmd->add_option("--manifest", ev.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--methods", ev.methods, "Comma list of oracle,identity,blend_if,color_blend,toy")->required();
    eval_cmd->add_option("--out", ev.out, "Report CSV (a .txt table is written alongside)")->required();
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Toy model checkpoint")->check(CLI::ExistingFile);
    eval_cmd->add_option("--blend-if-thresholds", ev.thresholds, "lo0,lo1,hi0,hi1");
    eval_cmd->add_option("--steps", ev.steps, "Sampling steps for the toy model")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--seed", ev.seed, "Sampling seed");

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train the toy flow model");
    train_cmd->add_option("--config", tr.config, "Train config JSON")->check(CLI::ExistingFile);
    train_cmd->add_option("--manifest", tr.manifest, "Training data; default: generate in memory")
        ->check(CLI::ExistingFile);
    train_cmd->add_option("--checkpoint", tr.checkpoint, "Output checkpoint")->required();
    train_cmd->add_option("--loss-csv", tr.loss_csv, "Loss curve CSV (default: <checkpoint>.loss.csv)");
    train_cmd->add_option("--steps", tr.steps, "Override total steps")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", tr.lr, "Override learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--seed", tr.seed, "Training seed");
    train_cmd->add_option("--data-seed", tr.data_seed, "Seed of the in-memory dataset");
    train_cmd->add_option("--groups", tr.groups, "Groups of the in-memory dataset")->check(CLI::PositiveNumber);
    train_cmd->add_option("--variants", tr.variants, "Variants of the in-memory dataset")->check(CLI::PositiveNumber);

    SampleArgs sa;
    auto* sample_cmd = app.add_subcommand("sample", "Sample the toy model on a dataset scene");
    sample_cmd->add_option("--checkpoint", sa.checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--manifest", sa.manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("--group", sa.group, "Group index");
    sample_cmd->add_option("--variant", sa.variant, "Variant supplying traits, albedo and (for remove) input");
    sample_cmd->add_option("--task", sa.task, "add or remove");
    sample_cmd->add_option("--color", sa.color, "Override with a uniform coat albedo r,g,b");
    sample_cmd->add_option("--steps", sa.steps, "Euler steps")->check(CLI::PositiveNumber);
    sample_cmd->add_option("--seed", sa.seed, "Noise seed");
    sample_cmd->add_option("--out", sa.out, "Output PNG")->required();

    std::uint64_t gc_seed = 0;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gc_cmd->add_option("--seed", gc_seed, "Seed of the reference model");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        set_thread_count(threads);
        if (*gen_cmd) return run_gen(gen);
        if (*coat_cmd) return run_coat(coat);
        if (*base_cmd) return run_baseline(base);
        if (*eval_cmd) return run_eval(ev);
        if (*train_cmd) return run_train(tr);
        if (*sample_cmd) return run_sample(sa);
        if (*gc_cmd) return run_gradcheck(gc_seed);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "coatsynth/core.hpp"
#include "coatsynth/dataset.hpp"
#include "coatsynth/rng.hpp"

namespace coatsynth::flow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

/// Channel-major C×H×W planes.
struct Planes {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Planes() = default;
    Planes(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
    bool operator==(const Planes&) const = default;
};

Planes planes_from(const ColorImage& img);
Planes planes_from(const ScalarMap& map);
ColorImage image_from(const Planes& planes);

/// (C, H, W) -> ((H/p)(W/p), C·p²). Token rows are row-major over the patch grid; features
/// are ordered (channel, row-in-patch, column-in-patch). Throws InvalidArgument unless p divides H and W.
Matrix pack(const Planes& planes, int p);
Planes unpack(const Matrix& tokens, int channels, int height, int width, int p);

/// (C, H·f, W·f) -> (C·f², H, W): moves each f×f pixel block into channels (mask-to-latent layout).
Planes space_to_depth(const Planes& planes, int factor);

// ---------------------------------------------------------------------------
// Conditioning layout
// ---------------------------------------------------------------------------

struct TokenLayout {
    int latent = 0;  // noisy-latent slice (0 when the sequence is conditioning only)
    int image = 0;
    int albedo = 0;
    int mask = 0;

    int total() const { return latent + image + albedo + mask; }
    bool operator==(const TokenLayout&) const = default;
};

struct TokenSequence {
    Matrix tokens;  // N × layout.total()
    TokenLayout layout;

    Eigen::Index size() const { return tokens.rows(); }
    int dim() const { return layout.total(); }
};

/// Packs (image | albedo | mask) per token in that order. `mask_factor` is the latent downsampling
/// of the image planes: the mask is given at full resolution and folded by space_to_depth first.
/// With `latent` the noisy latent tokens are prepended, giving the full model-input layout.
TokenSequence build_conditioning(const Planes& input, const Planes& albedo, const Planes& mask, int p,
                                 int mask_factor = 1, const Planes* latent = nullptr);

/// Per-token widths implied by the given plane shapes without materializing tokens.
TokenLayout conditioning_layout(int image_channels, int albedo_channels, int mask_channels, int p, int mask_factor,
                                int latent_channels = 0);

// ---------------------------------------------------------------------------
// Global trait and task embeddings
// ---------------------------------------------------------------------------

enum class Trait { Roughness = 0, Metalness = 1, Transmission = 2, Thickness = 3 };

struct TraitEmbeddingTable {
    std::array<Vector, 4> position;  // indexed by Trait
    Vector roughness_value;
    Vector metal_on, metal_off;
    Vector transmission_on, transmission_off;
    Vector thickness_solid, thickness_transmissive;
    std::array<Vector, 4> task;  // indexed by TaskKind

    static TraitEmbeddingTable random(int dim, Rng& rng, double scale);
    static TraitEmbeddingTable zeros(int dim);
    int dim() const { return static_cast<int>(roughness_value.size()); }

    /// Visits every vector in declaration order.
    template <class F>
    void for_each(F&& f) {
        for (auto& v : position) f(v);
        f(roughness_value);
        f(metal_on);
        f(metal_off);
        f(transmission_on);
        f(transmission_off);
        f(thickness_solid);
        f(thickness_transmissive);
        for (auto& v : task) f(v);
    }
    template <class F>
    void for_each(F&& f) const {
        const_cast<TraitEmbeddingTable*>(this)->for_each([&](Vector& v) { f(static_cast<const Vector&>(v)); });
    }
};

/// Task token first; the remove task carries no trait tokens.
/// Continuous traits: E_pos + x·E_val. Binary traits pick the on/off value at x >= 0.5.
/// Thickness scales the transmissive or solid value vector depending on the transmission trait.
std::vector<Vector> embed_traits(const std::optional<TraitVector>& traits, TaskKind task,
                                 const TraitEmbeddingTable& table);

// ---------------------------------------------------------------------------
// Velocity model
// ---------------------------------------------------------------------------

/// Per-token MLP: affine embedding (+ global conditioning) -> 2 SiLU layers -> affine output.
struct FlowModelParams {
    int token_dim = 0;  // latent width per token
    int cond_dim = 0;   // conditioning width per token
    int hidden = 0;
    Matrix w_in;  // hidden × (token_dim + cond_dim + 1)
    Vector b_in;
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    Matrix w_out;  // token_dim × hidden
    Vector b_out;
    TraitEmbeddingTable embeddings;
    /// A frozen model exposes no trainable parameters.
    bool frozen = false;

    static FlowModelParams init(int token_dim, int cond_dim, int hidden, Rng& rng);
    FlowModelParams zeros_like() const;

    std::size_t parameter_count() const;
    /// All parameters in declaration order (w_in, b_in, w1, b1, w2, b2, w_out, b_out, embeddings).
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> values);
};

/// Task and trait inputs for one sample.
struct GlobalConditioning {
    std::optional<TraitVector> traits;
    TaskKind task = TaskKind::AddUniform;
};

Matrix velocity(const FlowModelParams& params, const Matrix& z, double t, const Matrix& cond,
                const std::vector<Vector>& global_tokens);

/// z_t = (1 - t)·noise + t·x0, so dz/dt = x0 - noise.
Matrix interpolate(const Matrix& noise, const Matrix& x0, double t);

/// Mean squared error between a predicted velocity and x0 - noise.
double flow_matching_mse(const Matrix& predicted, const Matrix& x0, const Matrix& noise);

/// Conditional flow-matching loss of the model on one sample.
double cfm_loss(const FlowModelParams& params, const Matrix& x0, const Matrix& noise, double t, const Matrix& cond,
                const GlobalConditioning& global);

/// Loss plus gradient (same shape as params).
double cfm_loss_and_grad(const FlowModelParams& params, const Matrix& x0, const Matrix& noise, double t,
                         const Matrix& cond, const GlobalConditioning& global, FlowModelParams& grad);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 1e-4;
    int warmup_steps = 300;
    std::string schedule = "cosine";
    int batch_size = 8;
    int total_steps = 500;
    int side = 32;
    int patch = 2;
    int hidden = 64;
    double embedding_init_scale = 0.02;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

/// Linear warmup to the base rate, then cosine decay to zero at total_steps.
double learning_rate_at(const TrainConfig& config, int step);

/// Model-ready tensors for one training sample.
struct FlowExample {
    Matrix x0;
    Matrix cond;
    GlobalConditioning global;
};

FlowExample make_example(const TrainingSample& sample, int side, int patch);

struct TrainResult {
    FlowModelParams params;
    std::vector<double> loss_curve;
};

/// Adam on the CFM loss over batches drawn with the add/replace/remove mixture.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(const std::vector<SceneGroup>& groups, const TrainConfig& config);

/// Moving average with the given window (shorter at the start).
std::vector<double> smooth_curve(const std::vector<double>& curve, int window);

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

using VelocityField = std::function<Matrix(const Matrix& z, double t)>;

/// Euler steps from t = 0 to t = 1.
Matrix euler_integrate(const VelocityField& v, Matrix z0, int steps);

/// Draws noise from rng, integrates the learned field, unpacks and clamps to [0,1].
ColorImage sample(const FlowModelParams& params, const TokenSequence& cond, const GlobalConditioning& global,
                  int steps, Rng& rng, int side, int patch);

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

struct FlowInstance {
    Matrix x0;
    Matrix noise;
    double t = 0.5;
    Matrix cond;
    GlobalConditioning global;
};

/// Tiny deterministic instance for gradient checks.
FlowInstance make_reference_instance(int tokens, int token_dim, int cond_dim, Rng& rng);
/// Reference model for gradient checks (< 1000 parameters).
FlowModelParams make_reference_model(Rng& rng);

/// Central differences of the loss for every trainable parameter.
std::vector<double> finite_difference_gradient(const FlowModelParams& params, const FlowInstance& instance,
                                               double step = 1e-5);
/// max_i |a_i - b_i| / max(|a_i|, |b_i|, 1e-8); 0 for empty input.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);
/// Per-entry relative errors.
std::vector<double> relative_errors(std::span<const double> analytic, std::span<const double> numeric);

/// Analytic vs central-difference gradient; returns the max relative error.
double grad_check(const FlowModelParams& params, const FlowInstance& instance, double step = 1e-5);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const FlowModelParams& params, const TrainConfig& config);
struct Checkpoint {
    TrainConfig config;
    FlowModelParams params;
};
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Token width of an RGB latent and of the toy conditioning at the given patch size.
int rgb_token_dim(int patch);
int toy_cond_dim(int patch);

/// Box-filter downsampling by an integer factor; identity when the size already matches.
ColorImage resize_to(const ColorImage& img, int side);
ScalarMap resize_to(const ScalarMap& map, int side);
/// Nearest-neighbour upsampling by an integer factor.
ColorImage upsample_to(const ColorImage& img, int width, int height);

}  // namespace coatsynth::flow

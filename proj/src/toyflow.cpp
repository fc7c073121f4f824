#include "coatsynth/toyflow.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "coatsynth/io.hpp"

namespace coatsynth::flow {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Packing
// ---------------------------------------------------------------------------

Planes planes_from(const ColorImage& img) {
    Planes p(3, img.height(), img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const Rgb c = img.at(x, y);
            p.at(0, y, x) = c.x;
            p.at(1, y, x) = c.y;
            p.at(2, y, x) = c.z;
        }
    }
    return p;
}

Planes planes_from(const ScalarMap& map) {
    Planes p(1, map.height(), map.width());
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) p.at(0, y, x) = map.at(x, y);
    return p;
}

ColorImage image_from(const Planes& planes) {
    if (planes.channels != 3) throw InvalidArgument("image_from: expected 3 channels");
    ColorImage img(planes.width, planes.height);
    for (int y = 0; y < planes.height; ++y)
        for (int x = 0; x < planes.width; ++x)
            img.set(x, y, {planes.at(0, y, x), planes.at(1, y, x), planes.at(2, y, x)});
    return img;
}

Matrix pack(const Planes& planes, int p) {
    if (p <= 0 || planes.height % p != 0 || planes.width % p != 0) {
        throw InvalidArgument("pack: patch size " + std::to_string(p) + " must divide " + std::to_string(planes.height) +
                              "x" + std::to_string(planes.width));
    }
    const int gh = planes.height / p;
    const int gw = planes.width / p;
    Matrix out(static_cast<Eigen::Index>(gh) * gw, static_cast<Eigen::Index>(planes.channels) * p * p);
    for (int ty = 0; ty < gh; ++ty) {
        for (int tx = 0; tx < gw; ++tx) {
            const Eigen::Index row = static_cast<Eigen::Index>(ty) * gw + tx;
            Eigen::Index col = 0;
            for (int c = 0; c < planes.channels; ++c)
                for (int py = 0; py < p; ++py)
                    for (int px = 0; px < p; ++px) out(row, col++) = planes.at(c, ty * p + py, tx * p + px);
        }
    }
    return out;
}

Planes unpack(const Matrix& tokens, int channels, int height, int width, int p) {
    if (p <= 0 || height % p != 0 || width % p != 0) throw InvalidArgument("unpack: patch size must divide H and W");
    const int gh = height / p;
    const int gw = width / p;
    if (tokens.rows() != static_cast<Eigen::Index>(gh) * gw || tokens.cols() != static_cast<Eigen::Index>(channels) * p * p) {
        throw InvalidArgument("unpack: token matrix shape does not match the requested planes");
    }
    Planes out(channels, height, width);
    for (int ty = 0; ty < gh; ++ty) {
        for (int tx = 0; tx < gw; ++tx) {
            const Eigen::Index row = static_cast<Eigen::Index>(ty) * gw + tx;
            Eigen::Index col = 0;
            for (int c = 0; c < channels; ++c)
                for (int py = 0; py < p; ++py)
                    for (int px = 0; px < p; ++px) out.at(c, ty * p + py, tx * p + px) = tokens(row, col++);
        }
    }
    return out;
}

Planes space_to_depth(const Planes& planes, int f) {
    if (f <= 0 || planes.height % f != 0 || planes.width % f != 0) {
        throw InvalidArgument("space_to_depth: factor must divide H and W");
    }
    if (f == 1) return planes;
    Planes out(planes.channels * f * f, planes.height / f, planes.width / f);
    for (int c = 0; c < planes.channels; ++c)
        for (int fy = 0; fy < f; ++fy)
            for (int fx = 0; fx < f; ++fx) {
                const int oc = (c * f + fy) * f + fx;
                for (int y = 0; y < out.height; ++y)
                    for (int x = 0; x < out.width; ++x) out.at(oc, y, x) = planes.at(c, y * f + fy, x * f + fx);
            }
    return out;
}

TokenLayout conditioning_layout(int image_channels, int albedo_channels, int mask_channels, int p, int mask_factor,
                                int latent_channels) {
    const int pp = p * p;
    return {latent_channels * pp, image_channels * pp, albedo_channels * pp, mask_channels * mask_factor * mask_factor * pp};
}

TokenSequence build_conditioning(const Planes& input, const Planes& albedo, const Planes& mask, int p, int mask_factor,
                                 const Planes* latent) {
    if (input.height != albedo.height || input.width != albedo.width) {
        throw PreconditionError("build_conditioning: image and albedo planes differ in size");
    }
    if (mask.height != input.height * mask_factor || mask.width != input.width * mask_factor) {
        throw PreconditionError("build_conditioning: mask size does not match image size times mask_factor");
    }
    if (latent && (latent->height != input.height || latent->width != input.width)) {
        throw PreconditionError("build_conditioning: latent planes differ in size");
    }
    const Matrix img = pack(input, p);
    const Matrix alb = pack(albedo, p);
    const Matrix msk = pack(space_to_depth(mask, mask_factor), p);
    TokenSequence seq;
    seq.layout = {latent ? latent->channels * p * p : 0, static_cast<int>(img.cols()), static_cast<int>(alb.cols()),
                  static_cast<int>(msk.cols())};
    seq.tokens.resize(img.rows(), seq.layout.total());
    Eigen::Index col = 0;
    if (latent) {
        const Matrix lat = pack(*latent, p);
        seq.tokens.middleCols(col, lat.cols()) = lat;
        col += lat.cols();
    }
    seq.tokens.middleCols(col, img.cols()) = img;
    col += img.cols();
    seq.tokens.middleCols(col, alb.cols()) = alb;
    col += alb.cols();
    seq.tokens.middleCols(col, msk.cols()) = msk;
    return seq;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

TraitEmbeddingTable TraitEmbeddingTable::zeros(int dim) {
    TraitEmbeddingTable t;
    t.position.fill(Vector::Zero(dim));
    t.task.fill(Vector::Zero(dim));
    t.roughness_value = t.metal_on = t.metal_off = t.transmission_on = t.transmission_off = t.thickness_solid =
        t.thickness_transmissive = Vector::Zero(dim);
    return t;
}

TraitEmbeddingTable TraitEmbeddingTable::random(int dim, Rng& rng, double scale) {
    TraitEmbeddingTable t = zeros(dim);
    t.for_each([&](Vector& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
    });
    return t;
}

std::vector<Vector> embed_traits(const std::optional<TraitVector>& traits, TaskKind task,
                                 const TraitEmbeddingTable& table) {
    std::vector<Vector> out;
    out.push_back(table.task[static_cast<std::size_t>(task)]);
    if (task == TaskKind::Remove || !traits) return out;
    const auto& tr = *traits;
    const auto pos = [&](Trait t) -> const Vector& { return table.position[static_cast<std::size_t>(t)]; };
    out.push_back(pos(Trait::Roughness) + tr.roughness * table.roughness_value);
    out.push_back(pos(Trait::Metalness) + (tr.metalness >= 0.5 ? table.metal_on : table.metal_off));
    out.push_back(pos(Trait::Transmission) + (tr.transmission >= 0.5 ? table.transmission_on : table.transmission_off));
    const Vector& thick = tr.transmission >= 0.5 ? table.thickness_transmissive : table.thickness_solid;
    out.push_back(pos(Trait::Thickness) + tr.thickness * thick);
    return out;
}

namespace {

/// Adds d/d(table) of g = mean(embed_traits(...)) given dL/dg.
void accumulate_embedding_grad(const std::optional<TraitVector>& traits, TaskKind task, const Vector& d_global,
                               TraitEmbeddingTable& grad) {
    const bool with_traits = task != TaskKind::Remove && traits.has_value();
    const double k = with_traits ? 5.0 : 1.0;
    const Vector d = d_global / k;
    grad.task[static_cast<std::size_t>(task)] += d;
    if (!with_traits) return;
    const auto& tr = *traits;
    for (auto& p : grad.position) p += d;
    grad.roughness_value += tr.roughness * d;
    (tr.metalness >= 0.5 ? grad.metal_on : grad.metal_off) += d;
    (tr.transmission >= 0.5 ? grad.transmission_on : grad.transmission_off) += d;
    (tr.transmission >= 0.5 ? grad.thickness_transmissive : grad.thickness_solid) += tr.thickness * d;
}

Vector mean_of(const std::vector<Vector>& tokens, int dim) {
    Vector g = Vector::Zero(dim);
    for (const auto& v : tokens) g += v;
    if (!tokens.empty()) g /= static_cast<double>(tokens.size());
    return g;
}

Matrix silu(const Matrix& a) { return a.array() / (1.0 + (-a.array()).exp()); }

Matrix silu_grad(const Matrix& a) {
    const Eigen::ArrayXXd s = 1.0 / (1.0 + (-a.array()).exp());
    return (s * (1.0 + a.array() * (1.0 - s))).matrix();
}

Matrix model_input(const Matrix& z, double t, const Matrix& cond) {
    if (z.rows() != cond.rows()) throw PreconditionError("latent and conditioning token counts differ");
    Matrix x(z.rows(), z.cols() + cond.cols() + 1);
    x << z, cond, Matrix::Constant(z.rows(), 1, t);
    return x;
}

struct Forward {
    Matrix x, h0, a1, s1, a2, s2, out;
};

Forward forward(const FlowModelParams& p, const Matrix& z, double t, const Matrix& cond, const Vector& global) {
    if (z.cols() != p.token_dim || cond.cols() != p.cond_dim) {
        throw PreconditionError("token widths do not match the model (" + std::to_string(z.cols()) + "/" +
                                std::to_string(cond.cols()) + " vs " + std::to_string(p.token_dim) + "/" +
                                std::to_string(p.cond_dim) + ")");
    }
    Forward f;
    f.x = model_input(z, t, cond);
    f.h0 = (f.x * p.w_in.transpose()).rowwise() + (p.b_in + global).transpose();
    f.a1 = (f.h0 * p.w1.transpose()).rowwise() + p.b1.transpose();
    f.s1 = silu(f.a1);
    f.a2 = (f.s1 * p.w2.transpose()).rowwise() + p.b2.transpose();
    f.s2 = silu(f.a2);
    f.out = (f.s2 * p.w_out.transpose()).rowwise() + p.b_out.transpose();
    return f;
}

void fill_normal(Matrix& m, Rng& rng, double scale) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = scale * rng.normal();
}

}  // namespace

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

FlowModelParams FlowModelParams::init(int token_dim, int cond_dim, int hidden, Rng& rng) {
    FlowModelParams p;
    p.token_dim = token_dim;
    p.cond_dim = cond_dim;
    p.hidden = hidden;
    const int in = token_dim + cond_dim + 1;
    p.w_in = Matrix(hidden, in);
    fill_normal(p.w_in, rng, 1.0 / std::sqrt(in));
    p.b_in = Vector::Zero(hidden);
    p.w1 = Matrix(hidden, hidden);
    fill_normal(p.w1, rng, 1.0 / std::sqrt(hidden));
    p.b1 = Vector::Zero(hidden);
    p.w2 = Matrix(hidden, hidden);
    fill_normal(p.w2, rng, 1.0 / std::sqrt(hidden));
    p.b2 = Vector::Zero(hidden);
    p.w_out = Matrix(token_dim, hidden);
    fill_normal(p.w_out, rng, 1.0 / std::sqrt(hidden));
    p.b_out = Vector::Zero(token_dim);
    p.embeddings = TraitEmbeddingTable::random(hidden, rng, 0.02);
    return p;
}

FlowModelParams FlowModelParams::zeros_like() const {
    FlowModelParams g;
    g.token_dim = token_dim;
    g.cond_dim = cond_dim;
    g.hidden = hidden;
    g.w_in = Matrix::Zero(w_in.rows(), w_in.cols());
    g.b_in = Vector::Zero(b_in.size());
    g.w1 = Matrix::Zero(w1.rows(), w1.cols());
    g.b1 = Vector::Zero(b1.size());
    g.w2 = Matrix::Zero(w2.rows(), w2.cols());
    g.b2 = Vector::Zero(b2.size());
    g.w_out = Matrix::Zero(w_out.rows(), w_out.cols());
    g.b_out = Vector::Zero(b_out.size());
    g.embeddings = TraitEmbeddingTable::zeros(hidden);
    g.frozen = frozen;
    return g;
}

std::size_t FlowModelParams::parameter_count() const {
    if (frozen) return 0;
    std::size_t n = static_cast<std::size_t>(w_in.size() + b_in.size() + w1.size() + b1.size() + w2.size() + b2.size() +
                                             w_out.size() + b_out.size());
    embeddings.for_each([&](const Vector& v) { n += static_cast<std::size_t>(v.size()); });
    return n;
}

std::vector<double> FlowModelParams::flatten() const {
    std::vector<double> out;
    if (frozen) return out;
    out.reserve(parameter_count());
    auto put = [&](const auto& m) {
        // Column-major storage order, as Eigen lays it out.
        out.insert(out.end(), m.data(), m.data() + m.size());
    };
    put(w_in);
    put(b_in);
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    put(w_out);
    put(b_out);
    embeddings.for_each([&](const Vector& v) { put(v); });
    return out;
}

void FlowModelParams::unflatten(std::span<const double> values) {
    if (values.size() != parameter_count()) throw InvalidArgument("unflatten: parameter count mismatch");
    std::size_t off = 0;
    auto take = [&](auto& m) {
        std::copy(values.begin() + static_cast<long>(off), values.begin() + static_cast<long>(off + m.size()), m.data());
        off += static_cast<std::size_t>(m.size());
    };
    take(w_in);
    take(b_in);
    take(w1);
    take(b1);
    take(w2);
    take(b2);
    take(w_out);
    take(b_out);
    embeddings.for_each([&](Vector& v) { take(v); });
}

Matrix velocity(const FlowModelParams& params, const Matrix& z, double t, const Matrix& cond,
                const std::vector<Vector>& global_tokens) {
    return forward(params, z, t, cond, mean_of(global_tokens, params.hidden)).out;
}

Matrix interpolate(const Matrix& noise, const Matrix& x0, double t) { return (1.0 - t) * noise + t * x0; }

double flow_matching_mse(const Matrix& predicted, const Matrix& x0, const Matrix& noise) {
    if (predicted.rows() != x0.rows() || predicted.cols() != x0.cols() || noise.rows() != x0.rows() ||
        noise.cols() != x0.cols()) {
        throw PreconditionError("flow_matching_mse: shape mismatch");
    }
    return (predicted - (x0 - noise)).squaredNorm() / static_cast<double>(x0.size());
}

double cfm_loss(const FlowModelParams& params, const Matrix& x0, const Matrix& noise, double t, const Matrix& cond,
                const GlobalConditioning& global) {
    const auto tokens = embed_traits(global.traits, global.task, params.embeddings);
    const Matrix v = velocity(params, interpolate(noise, x0, t), t, cond, tokens);
    return flow_matching_mse(v, x0, noise);
}

double cfm_loss_and_grad(const FlowModelParams& p, const Matrix& x0, const Matrix& noise, double t, const Matrix& cond,
                         const GlobalConditioning& global, FlowModelParams& grad) {
    const auto tokens = embed_traits(global.traits, global.task, p.embeddings);
    const Vector g = mean_of(tokens, p.hidden);
    const Forward f = forward(p, interpolate(noise, x0, t), t, cond, g);
    const Matrix diff = f.out - (x0 - noise);
    const double loss = diff.squaredNorm() / static_cast<double>(diff.size());

    const Matrix d_out = diff * (2.0 / static_cast<double>(diff.size()));
    grad.w_out += d_out.transpose() * f.s2;
    grad.b_out += d_out.colwise().sum().transpose();
    const Matrix d_a2 = (d_out * p.w_out).cwiseProduct(silu_grad(f.a2));
    grad.w2 += d_a2.transpose() * f.s1;
    grad.b2 += d_a2.colwise().sum().transpose();
    const Matrix d_a1 = (d_a2 * p.w2).cwiseProduct(silu_grad(f.a1));
    grad.w1 += d_a1.transpose() * f.h0;
    grad.b1 += d_a1.colwise().sum().transpose();
    const Matrix d_h0 = d_a1 * p.w1;
    grad.w_in += d_h0.transpose() * f.x;
    const Vector d_bias = d_h0.colwise().sum().transpose();
    grad.b_in += d_bias;
    accumulate_embedding_grad(global.traits, global.task, d_bias, grad.embeddings);
    return loss;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
    if (schedule != "cosine" && schedule != "constant") throw ConfigError("schedule must be 'cosine' or 'constant'");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
    if (side < 1 || patch < 1) throw ConfigError("side and patch must be positive");
    if (side % patch != 0) throw ConfigError("side must be divisible by patch");
    if (hidden < 1) throw ConfigError("hidden must be >= 1");
}

json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"warmup_steps", warmup_steps},
            {"schedule", schedule},           {"batch_size", batch_size},
            {"total_steps", total_steps},     {"side", side},
            {"patch", patch},                 {"hidden", hidden},
            {"embedding_init_scale", embedding_init_scale},
            {"beta1", beta1},                 {"beta2", beta2},
            {"adam_epsilon", adam_epsilon},   {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    try {
        const json defaults = c.to_json();
        for (const auto& [key, value] : j.items()) {
            if (!defaults.contains(key)) throw ConfigError("unknown train config field '" + key + "'");
        }
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
        c.schedule = j.value("schedule", c.schedule);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.total_steps = j.value("total_steps", c.total_steps);
        c.side = j.value("side", c.side);
        c.patch = j.value("patch", c.patch);
        c.hidden = j.value("hidden", c.hidden);
        c.embedding_init_scale = j.value("embedding_init_scale", c.embedding_init_scale);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
        c.seed = j.value("seed", c.seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid train config: ") + e.what());
    }
    c.validate();
    return c;
}

double learning_rate_at(const TrainConfig& c, int step) {
    if (step < c.warmup_steps) return c.learning_rate * static_cast<double>(step) / c.warmup_steps;
    if (c.schedule == "constant") return c.learning_rate;
    const int decay = c.total_steps - c.warmup_steps;
    if (decay <= 0) return c.learning_rate;
    const double progress = std::min(1.0, static_cast<double>(step - c.warmup_steps) / decay);
    return c.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

int rgb_token_dim(int patch) { return 3 * patch * patch; }
int toy_cond_dim(int patch) { return conditioning_layout(3, 3, 1, patch, 1).total(); }

ColorImage resize_to(const ColorImage& img, int side) {
    if (img.width() == side && img.height() == side) return img;
    if (img.width() != img.height() || img.width() % side != 0) {
        throw InvalidArgument("resize_to: image must be square with side a multiple of " + std::to_string(side));
    }
    const int f = img.width() / side;
    ColorImage out(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            Rgb sum;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) sum += img.at(x * f + dx, y * f + dy);
            out.set(x, y, sum / static_cast<double>(f * f));
        }
    return out;
}

ScalarMap resize_to(const ScalarMap& map, int side) {
    if (map.width() == side && map.height() == side) return map;
    if (map.width() != map.height() || map.width() % side != 0) {
        throw InvalidArgument("resize_to: map must be square with side a multiple of " + std::to_string(side));
    }
    const int f = map.width() / side;
    ScalarMap out(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            double sum = 0.0;
            for (int dy = 0; dy < f; ++dy)
                for (int dx = 0; dx < f; ++dx) sum += map.at(x * f + dx, y * f + dy);
            out.at(x, y) = sum / (f * f);
        }
    return out;
}

ColorImage upsample_to(const ColorImage& img, int width, int height) {
    if (img.width() == width && img.height() == height) return img;
    if (width % img.width() != 0 || height % img.height() != 0) throw InvalidArgument("upsample_to: non-integer factor");
    const int fx = width / img.width();
    const int fy = height / img.height();
    ColorImage out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) out.set(x, y, img.at(x / fx, y / fy));
    return out;
}

FlowExample make_example(const TrainingSample& s, int side, int patch) {
    FlowExample ex;
    ex.x0 = pack(planes_from(resize_to(s.target_image, side)), patch);
    ex.cond = build_conditioning(planes_from(resize_to(s.input_image, side)),
                                 planes_from(resize_to(s.projected_albedo, side)), planes_from(resize_to(s.mask, side)),
                                 patch)
                  .tokens;
    ex.global = {s.traits, s.task};
    return ex;
}

TrainResult train(const std::vector<SceneGroup>& groups, const TrainConfig& config) {
    config.validate();
    if (groups.empty()) throw InvalidArgument("train: no training data");
    bool can_replace = false;
    for (const auto& g : groups) can_replace = can_replace || g.variants.size() >= 2;

    Rng init_rng(config.seed, 1);
    TrainResult result;
    result.params = FlowModelParams::init(rgb_token_dim(config.patch), toy_cond_dim(config.patch), config.hidden, init_rng);
    result.params.embeddings = TraitEmbeddingTable::random(config.hidden, init_rng, config.embedding_init_scale);

    const std::size_t n = result.params.parameter_count();
    std::vector<double> m(n, 0.0), v(n, 0.0);
    Rng data_rng(config.seed, 2);

    for (int step = 0; step < config.total_steps; ++step) {
        FlowModelParams grad = result.params.zeros_like();
        double batch_loss = 0.0;
        const auto tasks = sample_task_mixture(data_rng, static_cast<std::size_t>(config.batch_size));
        for (EditTask task : tasks) {
            const SceneGroup* group = &groups[data_rng.index(groups.size())];
            if (task == EditTask::Replace) {
                if (!can_replace) task = EditTask::Add;
                while (task == EditTask::Replace && group->variants.size() < 2) {
                    group = &groups[data_rng.index(groups.size())];
                }
            }
            const TrainingSample sample = build_training_sample(*group, task, data_rng);
            const FlowExample ex = make_example(sample, config.side, config.patch);
            const double t = data_rng.uniform_open();
            Matrix noise(ex.x0.rows(), ex.x0.cols());
            fill_normal(noise, data_rng, 1.0);
            batch_loss += cfm_loss_and_grad(result.params, ex.x0, noise, t, ex.cond, ex.global, grad);
        }
        batch_loss /= config.batch_size;
        if (!std::isfinite(batch_loss)) {
            throw DivergenceError("training diverged at step " + std::to_string(step) + " (non-finite loss)");
        }
        result.loss_curve.push_back(batch_loss);

        std::vector<double> theta = result.params.flatten();
        const std::vector<double> g = grad.flatten();
        const double lr = learning_rate_at(config, step);
        const double bc1 = 1.0 - std::pow(config.beta1, step + 1);
        const double bc2 = 1.0 - std::pow(config.beta2, step + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = g[i] / config.batch_size;
            m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gi;
            v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gi * gi;
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config.adam_epsilon);
        }
        result.params.unflatten(theta);
    }
    return result;
}

std::vector<double> smooth_curve(const std::vector<double>& curve, int window) {
    std::vector<double> out(curve.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
        sum += curve[i];
        if (i >= static_cast<std::size_t>(window)) sum -= curve[i - static_cast<std::size_t>(window)];
        out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

Matrix euler_integrate(const VelocityField& v, Matrix z, int steps) {
    if (steps < 1) throw InvalidArgument("euler_integrate: steps must be >= 1");
    const double dt = 1.0 / steps;
    for (int s = 0; s < steps; ++s) z += dt * v(z, s * dt);
    return z;
}

ColorImage sample(const FlowModelParams& params, const TokenSequence& cond, const GlobalConditioning& global, int steps,
                  Rng& rng, int side, int patch) {
    const auto tokens = embed_traits(global.traits, global.task, params.embeddings);
    Matrix z0(cond.tokens.rows(), params.token_dim);
    fill_normal(z0, rng, 1.0);
    const Matrix x = euler_integrate(
        [&](const Matrix& z, double t) { return velocity(params, z, t, cond.tokens, tokens); }, std::move(z0), steps);
    ColorImage img = image_from(unpack(x, 3, side, side, patch));
    for (double& v : img.data()) v = clamp01(v);
    return img;
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

FlowInstance make_reference_instance(int tokens, int token_dim, int cond_dim, Rng& rng) {
    FlowInstance inst;
    inst.x0 = Matrix(tokens, token_dim);
    inst.noise = Matrix(tokens, token_dim);
    inst.cond = Matrix(tokens, cond_dim);
    for (Eigen::Index i = 0; i < inst.x0.size(); ++i) inst.x0.data()[i] = rng.uniform();
    fill_normal(inst.noise, rng, 1.0);
    for (Eigen::Index i = 0; i < inst.cond.size(); ++i) inst.cond.data()[i] = rng.uniform();
    inst.t = 0.37;
    inst.global.task = TaskKind::AddTextured;
    inst.global.traits = TraitVector{0.6, 1.0, 1.0, 0.3};
    return inst;
}

FlowModelParams make_reference_model(Rng& rng) {
    FlowModelParams p = FlowModelParams::init(rgb_token_dim(2), toy_cond_dim(2), 6, rng);
    // Larger embeddings so their gradients are well above finite-difference noise.
    p.embeddings = TraitEmbeddingTable::random(6, rng, 0.5);
    return p;
}

std::vector<double> finite_difference_gradient(const FlowModelParams& params, const FlowInstance& inst, double step) {
    std::vector<double> theta = params.flatten();
    std::vector<double> out(theta.size());
    FlowModelParams probe = params;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double saved = theta[i];
        theta[i] = saved + step;
        probe.unflatten(theta);
        const double up = cfm_loss(probe, inst.x0, inst.noise, inst.t, inst.cond, inst.global);
        theta[i] = saved - step;
        probe.unflatten(theta);
        const double down = cfm_loss(probe, inst.x0, inst.noise, inst.t, inst.cond, inst.global);
        theta[i] = saved;
        out[i] = (up - down) / (2.0 * step);
    }
    return out;
}

std::vector<double> relative_errors(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw PreconditionError("relative_errors: size mismatch");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), 1e-8});
    }
    return out;
}

double max_relative_error(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (double e : relative_errors(a, b)) worst = std::max(worst, e);
    return worst;
}

double grad_check(const FlowModelParams& params, const FlowInstance& inst, double step) {
    if (params.parameter_count() == 0) return 0.0;
    FlowModelParams grad = params.zeros_like();
    cfm_loss_and_grad(params, inst.x0, inst.noise, inst.t, inst.cond, inst.global, grad);
    const std::vector<double> analytic = grad.flatten();
    const std::vector<double> numeric = finite_difference_gradient(params, inst, step);
    return max_relative_error(analytic, numeric);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {
constexpr const char* kMagic = "coatsynth-flow-checkpoint";
}

void write_checkpoint(const std::filesystem::path& path, const FlowModelParams& params, const TrainConfig& config) {
    const json header{{"format_version", kCheckpointVersion},
                      {"config", config.to_json()},
                      {"token_dim", params.token_dim},
                      {"cond_dim", params.cond_dim},
                      {"hidden", params.hidden}};
    const std::string hj = header.dump();
    std::string blob = std::string(kMagic) + " " + std::to_string(kCheckpointVersion) + "\n" + std::to_string(hj.size()) +
                       "\n" + hj + "\n";
    FlowModelParams unfrozen = params;
    unfrozen.frozen = false;
    const std::vector<double> theta = unfrozen.flatten();
    const auto count = static_cast<std::uint64_t>(theta.size());
    for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((count >> (8 * i)) & 0xFFu));
    for (double v : theta) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) blob.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
    }
    io::write_text(path, blob);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    const std::string blob = io::read_text(path);
    std::size_t pos = blob.find('\n');
    if (pos == std::string::npos || blob.compare(0, std::strlen(kMagic), kMagic) != 0) {
        throw Error("not a flow checkpoint: " + path.string());
    }
    const int version = std::stoi(blob.substr(std::strlen(kMagic) + 1, pos));
    if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
    const std::size_t len_end = blob.find('\n', pos + 1);
    const std::size_t hlen = std::stoul(blob.substr(pos + 1, len_end - pos - 1));
    const json header = json::parse(blob.substr(len_end + 1, hlen));
    std::size_t off = len_end + 1 + hlen + 1;

    Checkpoint ck;
    ck.config = TrainConfig::from_json(header.at("config"));
    Rng dummy(0);
    ck.params = FlowModelParams::init(header.at("token_dim").get<int>(), header.at("cond_dim").get<int>(),
                                      header.at("hidden").get<int>(), dummy);
    auto read_u64 = [&]() {
        if (off + 8 > blob.size()) throw Error("truncated checkpoint: " + path.string());
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(blob[off + i])) << (8 * i);
        off += 8;
        return v;
    };
    const std::uint64_t count = read_u64();
    if (count != ck.params.parameter_count()) throw Error("checkpoint parameter count mismatch");
    std::vector<double> theta(count);
    for (auto& v : theta) v = std::bit_cast<double>(read_u64());
    ck.params.unflatten(theta);
    return ck;
}

}  // namespace coatsynth::flow

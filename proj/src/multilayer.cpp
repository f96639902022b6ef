#include "tipping/multilayer.hpp"

#include "tipping/attention.hpp"
#include "tipping/errors.hpp"
#include "tipping/kernels.hpp"
#include "tipping/rng.hpp"

#include <cmath>

namespace tipping {
namespace {

// Per-layer cache of everything later positions need from earlier ones.
struct LayerCache {
    std::vector<std::vector<EmbeddingVector>> keys;    // [head][position]
    std::vector<std::vector<EmbeddingVector>> values;  // [head][position]
};

double activate(Nonlinearity n, double x) {
    switch (n) {
    case Nonlinearity::kTanh: return std::tanh(x);
    case Nonlinearity::kErf: return std::erf(x);
    }
    return x;
}

std::vector<double> mlp_apply(const MlpParams& mlp, std::span<const double> x) {
    auto hidden = mlp.in_map.apply(x);
    for (double& h : hidden) {
        h = activate(mlp.nonlinearity, mlp.gain * h);
    }
    return mlp.out_map.apply(hidden);
}

// Residual update (attention + MLP) for the newest position; extends cache.
EmbeddingVector position_update(const EmbeddingVector& residual, const LayerParams& params, double t_eff,
                                LayerCache& cache) {
    const std::size_t d = residual.dimension();
    const auto normed_raw = params.ln_enabled
                                ? layer_norm(residual.components(), params.ln_gain, params.ln_bias)
                                : std::vector<double>(residual.components().begin(), residual.components().end());

    if (cache.keys.size() != params.heads.size()) {
        cache.keys.resize(params.heads.size());
        cache.values.resize(params.heads.size());
    }

    std::vector<double> update(d, 0.0);
    const auto& k = kernels::active();
    for (std::size_t h = 0; h < params.heads.size(); ++h) {
        const auto& head = params.heads[h];
        cache.keys[h].emplace_back(head.key.apply(normed_raw));
        cache.values[h].emplace_back(head.value.apply(normed_raw));
        const EmbeddingVector query(head.query.apply(normed_raw));
        const auto out = attend(query, cache.keys[h], cache.values[h], t_eff);
        k.axpy(1.0, out.data(), update.data(), d);
    }
    const auto mlp_out = mlp_apply(params.mlp, normed_raw);
    k.axpy(1.0, mlp_out.data(), update.data(), d);
    return EmbeddingVector(std::move(update));
}

// Incremental causal forward pass: positions are fed one at a time.
class ForwardState {
public:
    explicit ForwardState(const ToyTransformer& model) : model_(model), caches_(model.layers().size()) {}

    struct Output {
        EmbeddingVector residual;
        EmbeddingVector accumulated_update;
    };

    Output push(const EmbeddingVector& token) {
        if (token.dimension() != model_.dimension()) {
            throw DimensionError(model_.dimension(), token.dimension());
        }
        EmbeddingVector residual = token;
        EmbeddingVector accumulated = EmbeddingVector::zeros(token.dimension());
        for (std::size_t l = 0; l < model_.layers().size(); ++l) {
            const auto update = position_update(residual, model_.layers()[l], model_.t_eff(), caches_[l]);
            residual = residual + update;
            accumulated = accumulated + update;
        }
        return Output{std::move(residual), std::move(accumulated)};
    }

private:
    const ToyTransformer& model_;
    std::vector<LayerCache> caches_;
};

} // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows_ * cols_) {
        throw DimensionError(rows_ * cols_, data_.size());
    }
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("matrix entry is not finite");
        }
    }
}

Matrix Matrix::identity(std::size_t n) {
    std::vector<double> data(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        data[i * n + i] = 1.0;
    }
    return Matrix(n, n, std::move(data));
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, std::vector<double>(rows * cols)); }

std::vector<double> Matrix::apply(std::span<const double> x) const {
    if (x.size() != cols_) {
        throw DimensionError(cols_, x.size());
    }
    std::vector<double> out(rows_);
    const auto dot = kernels::active().dot;
    for (std::size_t r = 0; r < rows_; ++r) {
        out[r] = dot(data_.data() + r * cols_, x.data(), cols_);
    }
    return out;
}

std::string to_string(Nonlinearity n) { return n == Nonlinearity::kErf ? "erf" : "tanh"; }

std::optional<Nonlinearity> parse_nonlinearity(std::string_view name) {
    if (name == "tanh") return Nonlinearity::kTanh;
    if (name == "erf") return Nonlinearity::kErf;
    return std::nullopt;
}

MlpParams MlpParams::zero(std::size_t d, std::size_t hidden) {
    return MlpParams{Matrix::zeros(hidden, d), Matrix::zeros(d, hidden), 1.0, Nonlinearity::kTanh};
}

LayerParams LayerParams::effective_head(std::size_t d) {
    LayerParams p;
    p.heads.push_back(HeadParams{Matrix::identity(d), Matrix::identity(d), Matrix::identity(d)});
    p.mlp = MlpParams::zero(d, 1);
    return p;
}

LayerParams LayerParams::zero(std::size_t d, std::size_t hidden) {
    LayerParams p;
    p.heads.push_back(HeadParams{Matrix::zeros(d, d), Matrix::zeros(d, d), Matrix::zeros(d, d)});
    p.mlp = MlpParams::zero(d, hidden);
    return p;
}

void LayerParams::validate(std::size_t d) const {
    for (const auto& head : heads) {
        for (const Matrix* m : {&head.query, &head.key, &head.value}) {
            if (m->rows() != d || m->cols() != d) {
                throw DimensionError(d, m->rows() == d ? m->cols() : m->rows());
            }
        }
    }
    const std::size_t h = mlp.hidden_width();
    if (h == 0 || mlp.in_map.cols() != d) {
        throw DimensionError(d, mlp.in_map.cols());
    }
    if (mlp.out_map.rows() != d || mlp.out_map.cols() != h) {
        throw DimensionError(d * h, mlp.out_map.rows() * mlp.out_map.cols());
    }
    if (!(mlp.gain >= 0.0)) {
        throw InvalidArgument("MLP gain must be non-negative");
    }
    if (!ln_gain.empty() && ln_gain.size() != d) {
        throw DimensionError(d, ln_gain.size());
    }
    if (!ln_bias.empty() && ln_bias.size() != d) {
        throw DimensionError(d, ln_bias.size());
    }
}

ToyTransformer::ToyTransformer(std::size_t dimension, double t_eff, std::vector<LayerParams> layers)
    : dimension_(dimension), t_eff_(t_eff), layers_(std::move(layers)) {
    if (dimension_ == 0) {
        throw InvalidArgument("model dimension must be >= 1");
    }
    if (!(t_eff_ > 0.0)) {
        throw InvalidArgument("t_eff must be positive");
    }
    if (layers_.empty()) {
        throw InvalidArgument("model needs at least one layer");
    }
    for (const auto& layer : layers_) {
        layer.validate(dimension_);
    }
}

ToyTransformer ToyTransformer::random(std::size_t d, double t_eff, const RandomSpec& spec) {
    Rng rng(spec.seed);
    const auto gaussian_matrix = [&](std::size_t rows, std::size_t cols, double scale) {
        std::vector<double> data(rows * cols);
        for (double& v : data) {
            v = scale * rng.normal();
        }
        return Matrix(rows, cols, std::move(data));
    };
    const auto perturbed_identity = [&]() {
        std::vector<double> data(d * d);
        for (std::size_t i = 0; i < d * d; ++i) {
            data[i] = (i % (d + 1) == 0 ? 1.0 : 0.0) + spec.attention_noise * rng.normal();
        }
        return Matrix(d, d, std::move(data));
    };

    std::vector<LayerParams> layers;
    for (std::size_t l = 0; l < spec.layers; ++l) {
        LayerParams p;
        for (std::size_t h = 0; h < spec.heads; ++h) {
            auto q = perturbed_identity();
            auto k = perturbed_identity();
            auto v = perturbed_identity();
            p.heads.push_back(HeadParams{std::move(q), std::move(k), std::move(v)});
        }
        auto in_map = gaussian_matrix(spec.hidden, d, 1.0 / std::sqrt(static_cast<double>(d)));
        auto out_map = gaussian_matrix(d, spec.hidden, spec.mlp_scale / std::sqrt(static_cast<double>(spec.hidden)));
        p.mlp = MlpParams{std::move(in_map), std::move(out_map), spec.mlp_gain, Nonlinearity::kTanh};
        p.ln_enabled = spec.ln_enabled;
        layers.push_back(std::move(p));
    }
    return ToyTransformer(d, t_eff, std::move(layers));
}

ToyTransformer ToyTransformer::with_mlp_gain(double gain) const {
    auto layers = layers_;
    for (auto& l : layers) {
        l.mlp.gain = gain;
    }
    return ToyTransformer(dimension_, t_eff_, std::move(layers));
}

std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain, std::span<const double> bias) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) {
        mean += v;
    }
    mean /= n;
    double var = 0.0;
    for (double v : x) {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + 1e-12);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double g = gain.empty() ? 1.0 : gain[i];
        const double b = bias.empty() ? 0.0 : bias[i];
        out[i] = (x[i] - mean) * inv * g + b;
    }
    return out;
}

std::vector<EmbeddingVector> layer_step(std::span<const EmbeddingVector> residuals, const LayerParams& params,
                                        double t_eff) {
    if (residuals.empty()) {
        throw InvalidArgument("layer_step needs at least one residual");
    }
    const std::size_t d = residuals.front().dimension();
    params.validate(d);
    LayerCache cache;
    std::vector<EmbeddingVector> out;
    out.reserve(residuals.size());
    for (const auto& r : residuals) {
        if (r.dimension() != d) {
            throw DimensionError(d, r.dimension());
        }
        out.push_back(r + position_update(r, params, t_eff, cache));
    }
    return out;
}

std::vector<EmbeddingVector> forward(std::span<const EmbeddingVector> tokens, const ToyTransformer& model) {
    if (tokens.empty()) {
        throw InvalidArgument("forward needs at least one token");
    }
    ForwardState state(model);
    std::vector<EmbeddingVector> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        out.push_back(state.push(t).residual);
    }
    return out;
}

RolloutTrace generate_symbols(const Conversation& prompt, const ToyTransformer& model, const BasinSet& basins,
                              int steps, Readout readout) {
    basins.require_tipping_pair();
    if (prompt.empty()) {
        throw InvalidArgument("generate_symbols needs a non-empty prompt");
    }
    if (steps < 1) {
        throw InvalidArgument("steps must be >= 1");
    }
    const auto& good = basins.good();
    const auto& bad = basins.bad();

    ForwardState state(model);
    ForwardState::Output last{EmbeddingVector{}, EmbeddingVector{}};
    for (const auto& e : prompt.entries()) {
        last = state.push(e.vector);
    }

    RolloutTrace trace;
    for (int step = 0; step < steps; ++step) {
        EmbeddingVector context =
            readout == Readout::kStreamUpdate ? last.accumulated_update : last.residual;
        const double to_good = dot(context, good);
        const double to_bad = dot(context, bad);
        const bool bad_wins = to_bad >= to_good;
        if (bad_wins && !trace.first_hit) {
            trace.first_hit = step;
        }
        const Label& chosen = bad_wins ? kBadBasin : kGoodBasin;
        trace.steps.push_back(TraceStep{std::move(context), {{kGoodBasin, to_good}, {kBadBasin, to_bad}}, chosen});
        if (step + 1 < steps) {
            last = state.push(basins.centroid(chosen));
        }
    }
    return trace;
}

} // namespace tipping

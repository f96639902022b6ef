#pragma once

// Toy pre-norm transformer implementing the residual-stream recursion
//
//   r_n(t) = r_n(t-1) + sum_h Attn_h({LN(r_i(t-1))}_{i<=n}) + MLP(LN(r_n(t-1)))
//
// with causal attention and no positional encoding. Used to check that LN,
// MLP and depth move the tipping point without removing it.

#include "tipping/dynamics.hpp"
#include "tipping/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tipping {

// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

    static Matrix identity(std::size_t n);
    static Matrix zeros(std::size_t rows, std::size_t cols);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::span<const double> data() const noexcept { return data_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double> apply(std::span<const double> x) const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class Nonlinearity { kTanh, kErf };

std::string to_string(Nonlinearity n);
std::optional<Nonlinearity> parse_nonlinearity(std::string_view name);

struct HeadParams {
    Matrix query;  // d x d
    Matrix key;    // d x d
    Matrix value;  // d x d
};

// out_map * f(gain * in_map * x)
struct MlpParams {
    Matrix in_map;   // h x d
    Matrix out_map;  // d x h
    double gain = 1.0;
    Nonlinearity nonlinearity = Nonlinearity::kTanh;

    std::size_t hidden_width() const noexcept { return in_map.rows(); }
    static MlpParams zero(std::size_t d, std::size_t hidden);
};

struct LayerParams {
    std::vector<HeadParams> heads;
    MlpParams mlp;
    bool ln_enabled = false;
    std::vector<double> ln_gain;  // d; empty means all ones
    std::vector<double> ln_bias;  // d; empty means all zeros

    // One identity head, zero MLP, LN off: reduces to the effective head.
    static LayerParams effective_head(std::size_t d);
    static LayerParams zero(std::size_t d, std::size_t hidden = 1);

    void validate(std::size_t d) const;
};

class ToyTransformer {
public:
    ToyTransformer(std::size_t dimension, double t_eff, std::vector<LayerParams> layers);

    struct RandomSpec {
        std::size_t layers = 1;
        std::size_t heads = 1;
        std::size_t hidden = 8;
        double attention_noise = 0.0;  // Q/K/V = I + noise * N(0,1)
        double mlp_scale = 0.1;        // in_map ~ N(0,1)/sqrt(d), out_map ~ mlp_scale * N(0,1)/sqrt(h)
        double mlp_gain = 1.0;
        bool ln_enabled = false;
        std::uint64_t seed = 0;
    };
    static ToyTransformer random(std::size_t dimension, double t_eff, const RandomSpec& spec);

    std::size_t dimension() const noexcept { return dimension_; }
    double t_eff() const noexcept { return t_eff_; }
    const std::vector<LayerParams>& layers() const noexcept { return layers_; }

    // Copy with every layer's MLP gain replaced.
    ToyTransformer with_mlp_gain(double gain) const;

private:
    std::size_t dimension_;
    double t_eff_;
    std::vector<LayerParams> layers_;
};

// (x - mean) / sqrt(var + 1e-12) * gain + bias
std::vector<double> layer_norm(std::span<const double> x, std::span<const double> gain, std::span<const double> bias);

std::vector<EmbeddingVector> layer_step(std::span<const EmbeddingVector> residuals, const LayerParams& params,
                                        double t_eff);

std::vector<EmbeddingVector> forward(std::span<const EmbeddingVector> tokens, const ToyTransformer& model);

enum class Readout {
    kStreamUpdate,   // final residual minus the token embedding (sum of layer updates)
    kFinalResidual,  // final residual as-is
};

// Greedy generation over {B, D}: at each step run the model, read the last
// position, pick the larger of c.B and c.D (ties to D) and append that
// centroid. The trace format matches rollout().
RolloutTrace generate_symbols(const Conversation& prompt, const ToyTransformer& model, const BasinSet& basins,
                              int steps, Readout readout = Readout::kStreamUpdate);

// Model file: the basin-file JSON dialect with an added "model" section.
// {"dimension": d, "basins": {...}, "model": {"t_eff": x, "layers": [{"heads": [{"query": [...], "key": [...],
//  "value": [...]}], "mlp": {"hidden_width": h, "in_map": [...], "out_map": [...], "gain": g,
//  "nonlinearity": "tanh"}, "ln_enabled": false, "ln_gain": [...], "ln_bias": [...]}]}}
struct ModelFile {
    BasinSet basins;
    ToyTransformer model;
};

ModelFile parse_model_json(std::string_view text, const std::string& source = "<memory>");
std::string model_json(const ModelFile& file);
ModelFile load_model_file(const std::filesystem::path& path);
void store_model_file(const ModelFile& file, const std::filesystem::path& path);

} // namespace tipping

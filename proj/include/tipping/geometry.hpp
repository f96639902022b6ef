#pragma once

// Embedding vectors, basin centroids, and the alignment metrics built on
// raw dot products.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tipping {

// Dense real vector with finite components. Immutable after construction.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> components);
    EmbeddingVector(std::initializer_list<double> components);

    static EmbeddingVector zeros(std::size_t dimension);

    std::size_t dimension() const noexcept { return components_.size(); }
    std::span<const double> components() const noexcept { return components_; }
    const double* data() const noexcept { return components_.data(); }
    double operator[](std::size_t i) const { return components_[i]; }
    bool is_zero() const noexcept;

    EmbeddingVector operator+(const EmbeddingVector& other) const;
    EmbeddingVector operator-(const EmbeddingVector& other) const;
    EmbeddingVector scaled(double factor) const;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<double> components_;
};

// Basin labels: a capital letter followed by [A-Za-z0-9_]*.
using Label = std::string;
bool is_valid_label(std::string_view label);

inline const Label kGoodBasin = "B";
inline const Label kBadBasin = "D";

// Number of dot() calls made on the calling thread. Used to pin the cost of
// per-token monitor updates.
std::uint64_t dot_invocations() noexcept;

// Inner product. Throws DimensionError on mismatch.
double dot(const EmbeddingVector& u, const EmbeddingVector& v);

// Cosine similarity; nullopt when either vector has zero norm.
std::optional<double> cosine(const EmbeddingVector& u, const EmbeddingVector& v);

// Componentwise mean. Throws InvalidArgument on an empty list.
EmbeddingVector centroid(std::span<const EmbeddingVector> embeddings);

struct Phrase {
    std::string text;
    EmbeddingVector embedding;
};

struct Basin {
    EmbeddingVector centroid;
    std::vector<Phrase> phrases;
};

// Named basins sharing one dimension. When phrases are present the centroid
// must equal their mean to 1e-9 relative.
class BasinSet {
public:
    BasinSet() = default;
    BasinSet(std::size_t dimension, std::map<Label, Basin> basins);

    // Convenience for synthetic geometries: centroids only.
    static BasinSet from_centroids(std::initializer_list<std::pair<const Label, EmbeddingVector>> centroids);
    static BasinSet from_centroids(const std::map<Label, EmbeddingVector>& centroids);

    // Centroids recomputed from phrases.
    static BasinSet from_phrases(const std::map<Label, std::vector<Phrase>>& phrases);

    std::size_t dimension() const noexcept { return dimension_; }
    const std::map<Label, Basin>& basins() const noexcept { return basins_; }
    bool contains(const Label& label) const { return basins_.contains(label); }
    const Basin& at(const Label& label) const;
    const EmbeddingVector& centroid(const Label& label) const { return at(label).centroid; }
    std::vector<Label> labels() const;

    // Copy with one basin added or replaced.
    BasinSet with_basin(const Label& label, Basin basin) const;

    // Throws InvalidArgument unless both B and D are present.
    void require_tipping_pair() const;

    const EmbeddingVector& good() const { return centroid(kGoodBasin); }
    const EmbeddingVector& bad() const { return centroid(kBadBasin); }

    friend bool operator==(const BasinSet& a, const BasinSet& b);

private:
    std::size_t dimension_ = 0;
    std::map<Label, Basin> basins_;
};

bool operator==(const Phrase& a, const Phrase& b);
bool operator==(const Basin& a, const Basin& b);

struct AlignmentReport {
    double delta_raw = 0.0;              // A.D - A.B
    double delta_hat = 0.0;              // delta_raw / max_pairwise_dot; 0 when that is 0
    std::optional<double> delta_cos;     // cos(A,D) - cos(A,B); absent for zero-norm inputs
    double max_pairwise_dot = 0.0;       // max |u.v| over {A} and all centroids
};

AlignmentReport alignment(const EmbeddingVector& probe, const BasinSet& basins);

// JSON basin file:
// {"dimension": d, "basins": {"B": {"centroid": [...], "phrases": [{"text": s, "embedding": [...]}]}}}
// "phrases" is optional; "centroid" may be omitted when phrases are given.
BasinSet parse_basin_json(std::string_view text, const std::string& source = "<memory>");
std::string basin_json(const BasinSet& basins);
BasinSet load_basin_file(const std::filesystem::path& path);
void store_basin_file(const BasinSet& basins, const std::filesystem::path& path);

} // namespace tipping

#include "tipping/geometry.hpp"

#include "tipping/errors.hpp"
#include "tipping/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace tipping {
namespace {

thread_local std::uint64_t g_dot_calls = 0;

void require_finite(std::span<const double> components) {
    for (double c : components) {
        if (!std::isfinite(c)) {
            throw InvalidArgument("embedding component is not finite");
        }
    }
}

void require_same_dimension(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dimension() != v.dimension()) {
        throw DimensionError(u.dimension(), v.dimension());
    }
}

bool centroid_matches(const EmbeddingVector& stored, const EmbeddingVector& mean) {
    for (std::size_t i = 0; i < stored.dimension(); ++i) {
        const double scale = std::max({1.0, std::abs(stored[i]), std::abs(mean[i])});
        if (std::abs(stored[i] - mean[i]) > 1e-9 * scale) {
            return false;
        }
    }
    return true;
}

} // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> components) : components_(std::move(components)) {
    require_finite(components_);
}

EmbeddingVector::EmbeddingVector(std::initializer_list<double> components) : components_(components) {
    require_finite(components_);
}

EmbeddingVector EmbeddingVector::zeros(std::size_t dimension) {
    return EmbeddingVector(std::vector<double>(dimension, 0.0));
}

bool EmbeddingVector::is_zero() const noexcept {
    return std::all_of(components_.begin(), components_.end(), [](double c) { return c == 0.0; });
}

EmbeddingVector EmbeddingVector::operator+(const EmbeddingVector& other) const {
    require_same_dimension(*this, other);
    std::vector<double> out(components_);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += other.components_[i];
    }
    return EmbeddingVector(std::move(out));
}

EmbeddingVector EmbeddingVector::operator-(const EmbeddingVector& other) const {
    require_same_dimension(*this, other);
    std::vector<double> out(components_);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= other.components_[i];
    }
    return EmbeddingVector(std::move(out));
}

EmbeddingVector EmbeddingVector::scaled(double factor) const {
    std::vector<double> out(components_);
    for (double& c : out) {
        c *= factor;
    }
    return EmbeddingVector(std::move(out));
}

bool is_valid_label(std::string_view label) {
    if (label.empty() || !std::isupper(static_cast<unsigned char>(label.front()))) {
        return false;
    }
    return std::all_of(label.begin() + 1, label.end(), [](char ch) {
        const auto c = static_cast<unsigned char>(ch);
        return std::isalnum(c) || c == '_';
    });
}

std::uint64_t dot_invocations() noexcept { return g_dot_calls; }

double dot(const EmbeddingVector& u, const EmbeddingVector& v) {
    require_same_dimension(u, v);
    ++g_dot_calls;
    return kernels::active().dot(u.data(), v.data(), u.dimension());
}

std::optional<double> cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    require_same_dimension(u, v);
    if (u.is_zero() || v.is_zero()) {
        return std::nullopt;
    }
    return dot(u, v) / std::sqrt(dot(u, u) * dot(v, v));
}

EmbeddingVector centroid(std::span<const EmbeddingVector> embeddings) {
    if (embeddings.empty()) {
        throw InvalidArgument("centroid of an empty list");
    }
    const std::size_t d = embeddings.front().dimension();
    std::vector<double> sum(d, 0.0);
    for (const auto& e : embeddings) {
        if (e.dimension() != d) {
            throw DimensionError(d, e.dimension());
        }
        for (std::size_t i = 0; i < d; ++i) {
            sum[i] += e[i];
        }
    }
    const double n = static_cast<double>(embeddings.size());
    for (double& s : sum) {
        s /= n;
    }
    return EmbeddingVector(std::move(sum));
}

BasinSet::BasinSet(std::size_t dimension, std::map<Label, Basin> basins)
    : dimension_(dimension), basins_(std::move(basins)) {
    if (dimension_ == 0) {
        throw InvalidArgument("basin dimension must be >= 1");
    }
    for (const auto& [label, basin] : basins_) {
        if (!is_valid_label(label)) {
            throw InvalidArgument("invalid basin label '" + label + "'");
        }
        if (basin.centroid.dimension() != dimension_) {
            throw DimensionError(dimension_, basin.centroid.dimension());
        }
        if (basin.phrases.empty()) {
            continue;
        }
        std::vector<EmbeddingVector> embeddings;
        embeddings.reserve(basin.phrases.size());
        for (const auto& phrase : basin.phrases) {
            if (phrase.embedding.dimension() != dimension_) {
                throw DimensionError(dimension_, phrase.embedding.dimension());
            }
            embeddings.push_back(phrase.embedding);
        }
        if (!centroid_matches(basin.centroid, tipping::centroid(embeddings))) {
            throw InvalidArgument("centroid of basin '" + label + "' is not the mean of its phrases");
        }
    }
}

BasinSet BasinSet::from_centroids(std::initializer_list<std::pair<const Label, EmbeddingVector>> centroids) {
    return from_centroids(std::map<Label, EmbeddingVector>(centroids));
}

BasinSet BasinSet::from_centroids(const std::map<Label, EmbeddingVector>& centroids) {
    if (centroids.empty()) {
        throw InvalidArgument("basin set needs at least one basin");
    }
    std::map<Label, Basin> basins;
    for (const auto& [label, c] : centroids) {
        basins.emplace(label, Basin{c, {}});
    }
    return BasinSet(centroids.begin()->second.dimension(), std::move(basins));
}

BasinSet BasinSet::from_phrases(const std::map<Label, std::vector<Phrase>>& phrases) {
    if (phrases.empty()) {
        throw InvalidArgument("basin set needs at least one basin");
    }
    std::map<Label, Basin> basins;
    std::size_t dimension = 0;
    for (const auto& [label, list] : phrases) {
        std::vector<EmbeddingVector> embeddings;
        for (const auto& p : list) {
            embeddings.push_back(p.embedding);
        }
        Basin basin{tipping::centroid(embeddings), list};
        dimension = basin.centroid.dimension();
        basins.emplace(label, std::move(basin));
    }
    return BasinSet(dimension, std::move(basins));
}

const Basin& BasinSet::at(const Label& label) const {
    const auto it = basins_.find(label);
    if (it == basins_.end()) {
        throw InvalidArgument("unknown basin label '" + label + "'");
    }
    return it->second;
}

std::vector<Label> BasinSet::labels() const {
    std::vector<Label> out;
    for (const auto& entry : basins_) {
        out.push_back(entry.first);
    }
    return out;
}

BasinSet BasinSet::with_basin(const Label& label, Basin basin) const {
    auto copy = basins_;
    copy.insert_or_assign(label, std::move(basin));
    return BasinSet(dimension_, std::move(copy));
}

void BasinSet::require_tipping_pair() const {
    if (!contains(kGoodBasin) || !contains(kBadBasin)) {
        throw InvalidArgument("basin set must contain both 'B' and 'D'");
    }
}

bool operator==(const Phrase& a, const Phrase& b) { return a.text == b.text && a.embedding == b.embedding; }

bool operator==(const Basin& a, const Basin& b) { return a.centroid == b.centroid && a.phrases == b.phrases; }

bool operator==(const BasinSet& a, const BasinSet& b) {
    return a.dimension_ == b.dimension_ && a.basins_ == b.basins_;
}

AlignmentReport alignment(const EmbeddingVector& probe, const BasinSet& basins) {
    basins.require_tipping_pair();
    const auto& good = basins.good();
    const auto& bad = basins.bad();

    AlignmentReport report;
    report.delta_raw = dot(probe, bad) - dot(probe, good);

    std::vector<const EmbeddingVector*> points{&probe};
    for (const auto& entry : basins.basins()) {
        points.push_back(&entry.second.centroid);
    }
    // Dot products are symmetric, so unordered pairs (with self-pairs) cover
    // every ordered pair.
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i; j < points.size(); ++j) {
            report.max_pairwise_dot = std::max(report.max_pairwise_dot, std::abs(dot(*points[i], *points[j])));
        }
    }
    if (report.max_pairwise_dot > 0.0) {
        report.delta_hat = report.delta_raw / report.max_pairwise_dot;
    }

    const auto cos_bad = cosine(probe, bad);
    const auto cos_good = cosine(probe, good);
    if (cos_bad && cos_good) {
        report.delta_cos = *cos_bad - *cos_good;
    }
    return report;
}

} // namespace tipping

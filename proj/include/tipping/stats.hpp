#pragma once

// Validation statistics: phrase bootstrap, exact binomial tests,
// Clopper-Pearson intervals, confusion matrix, the always-zero baseline and
// the sentence-level first-hit index.

#include "tipping/geometry.hpp"
#include "tipping/predictor.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tipping {

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool spans_zero() const noexcept { return lower <= 0.0 && upper >= 0.0; }
    bool contains(double x) const noexcept { return lower <= x && x <= upper; }
    bool overlaps(const Interval& o) const noexcept { return lower <= o.upper && o.lower <= upper; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct BootstrapConfig {
    int n_resamples = 200;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    PredictorConfig predictor{.t_eff = 1.0, .epsilon_boundary = 0.01, .mode = PredictionMode::kEquationOnPrompt};
    unsigned threads = 0;  // 0 = hardware concurrency
};

struct BootstrapResult {
    int n_resamples = 0;
    Interval ci_delta_hat;
    Interval ci_delta_cos;  // over resamples where cosine is defined
    Interval ci_n_star;     // stable resamples count as +infinity
    bool spans_zero_delta_hat = false;
    bool spans_zero_delta_cos = false;
    bool spans_zero_n_star = false;
};

// Resample each basin's phrase embeddings with replacement, rebuild
// centroids, and recompute alignment and n* for the prompt. Percentile
// intervals (nearest rank). Resample i draws from Rng::derived(seed, i), so
// results do not depend on the thread count.
BootstrapResult bootstrap(const std::map<Label, std::vector<EmbeddingVector>>& phrases, const EmbeddingVector& prompt,
                          const BootstrapConfig& cfg = {});

// Nearest-rank percentile interval of already-sorted values.
Interval percentile_interval(std::span<const double> sorted, double alpha);

enum class Sided { kOne, kTwo };

// Exact binomial test. One-sided is the upper tail P(X >= k). Two-sided at
// p0 = 0.5 doubles the smaller tail (capped at 1); otherwise it sums the
// probabilities of outcomes no more likely than k.
double binomial_test(int k, int n, double p0, Sided sided);

__extension__ typedef unsigned __int128 Uint128;

// Exact dyadic value numerator / 2^n, valid for n <= 64.
struct DyadicRational {
    Uint128 numerator = 0;
    int exponent = 0;
    double value() const;
};

// P(X >= k) for X ~ Binomial(n, 1/2) as an exact integer count over 2^n.
DyadicRational fair_upper_tail(int k, int n);

// Exact interval from Beta quantiles by bisection on the binomial tail.
Interval clopper_pearson(int k, int n, double alpha = 0.05);

struct ConfusionMatrix {
    int true_positive = 0;   // predicted D-tip, observed D-tip
    int false_positive = 0;  // predicted D-tip, none observed
    int false_negative = 0;
    int true_negative = 0;

    int total() const noexcept { return true_positive + false_positive + false_negative + true_negative; }
    double agreement() const;  // (TP + TN) / total; 0 when empty
};

ConfusionMatrix confusion(std::span<const bool> predicted, std::span<const bool> observed);

// Observed tipping point: number of B before the first D, or nullopt ("no D").
using ObservedTip = std::optional<std::int64_t>;

// Within-one rule: a finite prediction matches a finite observation when they
// differ by at most 1; "stable" matches only "no D".
bool agrees_within_one(const NStar& predicted, const ObservedTip& observed);

struct BaselineComparison {
    int total = 0;
    int model_hits = 0;
    int baseline_hits = 0;  // always predicting n* = 0
    double model_accuracy = 0.0;
    double baseline_accuracy = 0.0;
};

BaselineComparison baseline_compare(std::span<const NStar> predictions, std::span<const ObservedTip> observations);

enum class SentenceLabel { kB, kD };

// Number of sentences before the first D; nullopt ("no D") when none.
ObservedTip sentence_first_hit(std::span<const SentenceLabel> labels);

// JSON lines {"index": i, "text": optional, "label": "B"|"D"}, ordered by index.
std::vector<SentenceLabel> parse_sentence_labels(std::string_view text, const std::string& source = "<memory>");

} // namespace tipping

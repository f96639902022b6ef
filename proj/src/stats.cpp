#include "tipping/stats.hpp"

#include "json_util.hpp"
#include "tipping/errors.hpp"
#include "tipping/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace tipping {
namespace {

struct ResampleOutcome {
    double delta_hat = 0.0;
    std::optional<double> delta_cos;
    double n_star = 0.0;
};

ResampleOutcome run_resample(const std::map<Label, std::vector<EmbeddingVector>>& phrases,
                             const EmbeddingVector& prompt, const BootstrapConfig& cfg, std::uint64_t index) {
    Rng rng = Rng::derived(cfg.seed, index);
    std::map<Label, EmbeddingVector> centroids;
    for (const auto& [label, list] : phrases) {
        std::vector<EmbeddingVector> draw;
        draw.reserve(list.size());
        for (std::size_t i = 0; i < list.size(); ++i) {
            draw.push_back(list[rng.below(list.size())]);
        }
        centroids.emplace(label, centroid(draw));
    }
    const auto basins = BasinSet::from_centroids(centroids);
    const auto align = alignment(prompt, basins);
    ResampleOutcome out{align.delta_hat, align.delta_cos, std::numeric_limits<double>::infinity()};
    try {
        const auto p = tipping_point(Conversation({Entry{"A", prompt}}), basins, cfg.predictor);
        if (!p.n_star.is_stable()) {
            out.n_star = static_cast<double>(p.n_star.value());
        }
    } catch (const DegenerateGeometry&) {
        // B.D == B.B on this resample: no finite tipping point.
    }
    return out;
}

// log of the Binomial(n, p) pmf at i.
double log_pmf(int i, int n, double p) {
    return std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * std::log(p) +
           (n - i) * std::log1p(-p);
}

// P(X >= k), X ~ Binomial(n, p), 0 < p < 1.
double upper_tail(int k, int n, double p) {
    if (k <= 0) return 1.0;
    if (k > n) return 0.0;
    double sum = 0.0;
    for (int i = k; i <= n; ++i) {
        sum += std::exp(log_pmf(i, n, p));
    }
    return std::min(sum, 1.0);
}

// P(X <= k).
double lower_tail(int k, int n, double p) {
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    double sum = 0.0;
    for (int i = 0; i <= k; ++i) {
        sum += std::exp(log_pmf(i, n, p));
    }
    return std::min(sum, 1.0);
}

// Root of a monotone function on [0, 1] by bisection to 1e-12.
template <typename F>
double bisect(F&& increasing_minus_target) {
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (increasing_minus_target(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

void check_counts(int k, int n) {
    if (n < 0 || k < 0 || k > n) {
        throw InvalidArgument("need 0 <= k <= n");
    }
}

} // namespace

Interval percentile_interval(std::span<const double> sorted, double alpha) {
    if (sorted.empty()) {
        return {};
    }
    const double n = static_cast<double>(sorted.size());
    const auto lo = static_cast<std::size_t>(std::floor(0.5 * alpha * n));
    auto hi = static_cast<std::size_t>(std::ceil((1.0 - 0.5 * alpha) * n));
    hi = hi == 0 ? 0 : hi - 1;
    return {sorted[std::min(lo, sorted.size() - 1)], sorted[std::min(hi, sorted.size() - 1)]};
}

BootstrapResult bootstrap(const std::map<Label, std::vector<EmbeddingVector>>& phrases, const EmbeddingVector& prompt,
                          const BootstrapConfig& cfg) {
    if (cfg.n_resamples < 1) {
        throw InvalidArgument("n_resamples must be >= 1");
    }
    if (!phrases.contains(kGoodBasin) || !phrases.contains(kBadBasin)) {
        throw InvalidArgument("bootstrap needs phrases for both 'B' and 'D'");
    }
    for (const auto& [label, list] : phrases) {
        if (list.size() < 2) {
            throw InvalidArgument("basin '" + label + "' needs at least 2 phrases to bootstrap");
        }
    }

    const auto n = static_cast<std::size_t>(cfg.n_resamples);
    std::vector<ResampleOutcome> outcomes(n);
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    {
        std::vector<std::jthread> workers;
        std::vector<std::exception_ptr> errors(threads);
        for (unsigned t = 0; t < threads; ++t) {
            workers.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < n; i += threads) {
                        outcomes[i] = run_resample(phrases, prompt, cfg, i);
                    }
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        workers.clear();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<double> hats;
    std::vector<double> coss;
    std::vector<double> stars;
    for (const auto& o : outcomes) {
        hats.push_back(o.delta_hat);
        if (o.delta_cos) coss.push_back(*o.delta_cos);
        stars.push_back(o.n_star);
    }
    std::sort(hats.begin(), hats.end());
    std::sort(coss.begin(), coss.end());
    std::sort(stars.begin(), stars.end());

    BootstrapResult r;
    r.n_resamples = cfg.n_resamples;
    r.ci_delta_hat = percentile_interval(hats, cfg.alpha);
    r.ci_delta_cos = percentile_interval(coss, cfg.alpha);
    r.ci_n_star = percentile_interval(stars, cfg.alpha);
    r.spans_zero_delta_hat = r.ci_delta_hat.spans_zero();
    r.spans_zero_delta_cos = !coss.empty() && r.ci_delta_cos.spans_zero();
    r.spans_zero_n_star = r.ci_n_star.spans_zero();
    return r;
}

double DyadicRational::value() const { return std::ldexp(static_cast<double>(numerator), -exponent); }

DyadicRational fair_upper_tail(int k, int n) {
    if (n > 64) {
        throw InvalidArgument("exact dyadic tail supports n <= 64");
    }
    check_counts(std::clamp(k, 0, n), n);
    DyadicRational out{0, n};
    Uint128 binom = 1;  // C(n, i)
    for (int i = 0; i <= n; ++i) {
        if (i >= k) {
            out.numerator += binom;
        }
        binom = binom * static_cast<unsigned>(n - i) / static_cast<unsigned>(i + 1);
    }
    return out;
}

double binomial_test(int k, int n, double p0, Sided sided) {
    check_counts(k, n);
    if (!(p0 > 0.0 && p0 < 1.0)) {
        throw InvalidArgument("p0 must lie in (0, 1)");
    }
    const bool fair = p0 == 0.5 && n <= 64;
    if (sided == Sided::kOne) {
        return fair ? fair_upper_tail(k, n).value() : upper_tail(k, n, p0);
    }
    if (fair) {
        // Symmetric: P(X <= k) = P(X >= n - k).
        const auto upper = fair_upper_tail(k, n);
        const auto lower = fair_upper_tail(n - k, n);
        const auto smaller = std::min(upper.numerator, lower.numerator);
        return std::min(1.0, DyadicRational{2 * smaller, n}.value());
    }
    const double observed = log_pmf(k, n, p0);
    double sum = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double lp = log_pmf(i, n, p0);
        if (lp <= observed + 1e-7 * std::abs(observed)) {
            sum += std::exp(lp);
        }
    }
    return std::min(sum, 1.0);
}

Interval clopper_pearson(int k, int n, double alpha) {
    check_counts(k, n);
    if (n == 0) {
        throw InvalidArgument("clopper_pearson needs n >= 1");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw InvalidArgument("alpha must lie in (0, 1)");
    }
    const double half = 0.5 * alpha;
    Interval out{0.0, 1.0};
    if (k > 0) {
        // P(X >= k | p) increases with p.
        out.lower = bisect([&](double p) { return upper_tail(k, n, p) - half; });
    }
    if (k < n) {
        // P(X <= k | p) decreases with p.
        out.upper = bisect([&](double p) { return half - lower_tail(k, n, p); });
    }
    return out;
}

double ConfusionMatrix::agreement() const {
    const int n = total();
    return n == 0 ? 0.0 : static_cast<double>(true_positive + true_negative) / n;
}

ConfusionMatrix confusion(std::span<const bool> predicted, std::span<const bool> observed) {
    if (predicted.size() != observed.size()) {
        throw DimensionError(predicted.size(), observed.size());
    }
    ConfusionMatrix m;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i]) {
            (observed[i] ? m.true_positive : m.false_positive)++;
        } else {
            (observed[i] ? m.false_negative : m.true_negative)++;
        }
    }
    return m;
}

bool agrees_within_one(const NStar& predicted, const ObservedTip& observed) {
    if (predicted.is_stable() || !observed) {
        return predicted.is_stable() && !observed;
    }
    const auto diff = predicted.value() - *observed;
    return diff >= -1 && diff <= 1;
}

BaselineComparison baseline_compare(std::span<const NStar> predictions, std::span<const ObservedTip> observations) {
    if (predictions.size() != observations.size()) {
        throw DimensionError(predictions.size(), observations.size());
    }
    BaselineComparison out;
    out.total = static_cast<int>(predictions.size());
    const NStar zero = NStar::count(0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        out.model_hits += agrees_within_one(predictions[i], observations[i]);
        out.baseline_hits += agrees_within_one(zero, observations[i]);
    }
    if (out.total > 0) {
        out.model_accuracy = static_cast<double>(out.model_hits) / out.total;
        out.baseline_accuracy = static_cast<double>(out.baseline_hits) / out.total;
    }
    return out;
}

ObservedTip sentence_first_hit(std::span<const SentenceLabel> labels) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == SentenceLabel::kD) {
            return static_cast<std::int64_t>(i);
        }
    }
    return std::nullopt;
}

std::vector<SentenceLabel> parse_sentence_labels(std::string_view text, const std::string& source) {
    std::vector<std::pair<long long, SentenceLabel>> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = source + ":" + std::to_string(lineno);
        const auto doc = detail::parse_json_text(line, where);
        const auto& index = detail::require_field(doc, "index", where);
        const auto& label = detail::require_field(doc, "label", where);
        if (!index.is_number_integer()) {
            throw FormatError(where + "/index", "must be an integer");
        }
        if (!label.is_string() || (label != "B" && label != "D")) {
            throw FormatError(where + "/label", "must be \"B\" or \"D\"");
        }
        rows.emplace_back(index.get<long long>(), label == "D" ? SentenceLabel::kD : SentenceLabel::kB);
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<SentenceLabel> out;
    for (const auto& r : rows) {
        out.push_back(r.second);
    }
    return out;
}

} // namespace tipping

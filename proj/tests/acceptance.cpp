// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// nonzero when any line fails.

#include "oracles.hpp"
#include "tipping/dynamics.hpp"
#include "tipping/logistic.hpp"
#include "tipping/monitor.hpp"
#include "tipping/multilayer.hpp"
#include "tipping/predictor.hpp"
#include "tipping/stats.hpp"

#include <fmt/core.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

using namespace tipping;

namespace {

// Tolerances and limits.
constexpr double kWorkedPromptLimitMs = 1.0;
constexpr double kSweepLimitMs = 10000.0;
constexpr double kLogisticLimitMs = 5000.0;
constexpr double kStatsLimitMs = 1.0;
constexpr double kSweepAgreement = 0.80;
constexpr double kDoublingTol = 0.01;
constexpr double kMonitorRelTol = 1e-9;
constexpr int kSweepSize = 200;
constexpr int kPropertyGeometries = 100;
constexpr int kWindow = 300;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Median wall time of repeated calls, for sub-millisecond limits.
double median_ms(const std::function<void()>& f, int reps = 21) {
    std::vector<double> t;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        t.push_back(ms_since(t0));
    }
    std::sort(t.begin(), t.end());
    return t[t.size() / 2];
}

EmbeddingVector vec(const oracle::Vec& v) { return EmbeddingVector(v); }

BasinSet worked() {
    return BasinSet::from_centroids({{"A", {0.4, -0.3}}, {"B", {0.8, 0.0}}, {"D", {0.9, 0.5}},
                                     {"C_plus", {0.2, 0.2}}, {"C_minus", {-0.2, -0.2}}});
}

Conversation conv_of(const BasinSet& set, std::vector<Label> labels) { return Conversation::from_labels(labels, set); }

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
    fmt::print("{} {}: {}\n", ok ? "PASS" : "FAIL", name, detail);
    failures += !ok;
}

void worked_prompt() {
    const auto set = worked();
    const auto conv = conv_of(set, {"A", "C_plus", "C_plus", "A"});
    const auto p = tipping_point(conv, set);
    const double ms = median_ms([&] { (void)tipping_point(conv, set); });
    const bool ok = p.n_star == NStar::count(1) && ms < kWorkedPromptLimitMs;
    report("worked_prompt", ok, fmt::format("n*={} raw={:.5f} time={:.4f}ms", p.n_star.to_string(), p.raw_value, ms));
}

void steering_direction() {
    const auto set = worked();
    const auto plus = tipping_point(conv_of(set, {"A", "C_plus", "C_plus", "A"}), set);
    const auto minus = tipping_point(conv_of(set, {"A", "C_minus", "C_minus", "A"}), set);
    const bool ok = minus.n_star == NStar::count(4) && minus.n_star.value() > plus.n_star.value();
    report("steering_direction", ok, fmt::format("C+ n*={} C- n*={}", plus.n_star.to_string(), minus.n_star.to_string()));
}

void oracle_equivalence() {
    const auto t0 = Clock::now();
    const auto set = worked();
    const auto conv = conv_of(set, {"A"});
    const auto pred = tipping_point(conv, set);
    const auto trace = rollout(conv, set, DynamicsConfig{});
    const bool fig_ok = pred.n_star == NStar::count(1) && trace.first_hit == 1;

    int agree = 0;
    for (const auto& g : oracle::sweep_geometries(2024, kSweepSize)) {
        const auto bs = BasinSet::from_centroids({{"B", vec(g.b)}, {"D", vec(g.d)}});
        const Conversation c({Entry{"A", vec(g.a)}});
        const auto p = tipping_point(c, bs);
        const auto hit = rollout(c, bs, DynamicsConfig{}).first_hit;
        agree += hit && !p.n_star.is_stable() && std::abs(p.n_star.value() - *hit) <= 1;
    }
    const double ms = ms_since(t0);
    const double rate = static_cast<double>(agree) / kSweepSize;
    const bool ok = fig_ok && rate >= kSweepAgreement && ms < kSweepLimitMs;
    report("oracle_equivalence", ok,
           fmt::format("worked n*={} first-hit={} sweep {}/{} ({:.3f}) time={:.0f}ms", pred.n_star.to_string(),
                       trace.first_hit ? std::to_string(*trace.first_hit) : "none", agree, kSweepSize, rate, ms));
}

void immediate_absorbing() {
    std::mt19937_64 gen(101);
    int immediate_ok = 0;
    int checked = 0;
    while (checked < kPropertyGeometries) {
        const auto a = oracle::uniform_vec(gen, 3);
        const auto b = oracle::uniform_vec(gen, 3);
        const auto d = oracle::uniform_vec(gen, 3);
        if (!(oracle::dot(a, d) > oracle::dot(a, b) && oracle::dot(d, d) > oracle::dot(d, b))) continue;
        ++checked;
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}});
        const auto trace = rollout(Conversation({Entry{"A", vec(a)}}), set, DynamicsConfig{});
        immediate_ok += trace.first_hit == 0 && trace.symbols() == std::string(kWindow, 'D');
    }
    int stable_ok = 0;
    checked = 0;
    while (checked < kPropertyGeometries) {
        const auto a = oracle::uniform_vec(gen, 3);
        const auto b = oracle::uniform_vec(gen, 3);
        const auto d = oracle::uniform_vec(gen, 3);
        if (!(oracle::dot(b, d) < oracle::dot(b, b) && oracle::dot(a, b) > oracle::dot(a, d))) continue;
        ++checked;
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}});
        const auto trace = rollout(Conversation({Entry{"A", vec(a)}}), set, DynamicsConfig{});
        stable_ok += !trace.first_hit.has_value();
    }
    const bool ok = immediate_ok == kPropertyGeometries && stable_ok == kPropertyGeometries;
    report("immediate_absorbing", ok,
           fmt::format("immediate ADDD.. {}/{} stable-B no D {}/{}", immediate_ok, kPropertyGeometries, stable_ok,
                       kPropertyGeometries));
}

void multilayer_reduction() {
    const auto set = worked();
    bool exact = true;
    for (const std::vector<Label>& labels : {std::vector<Label>{"A"}, std::vector<Label>{"A", "C_plus", "C_plus", "A"},
                                             std::vector<Label>{"A", "C_minus", "C_minus", "A"}}) {
        const auto conv = conv_of(set, labels);
        const auto ref = rollout(conv, set, DynamicsConfig{});
        const ToyTransformer model(2, 1.0, {LayerParams::effective_head(2)});
        const auto got = generate_symbols(conv, model, set, kWindow);
        exact = exact && got.symbols() == ref.symbols() && got.steps.size() == ref.steps.size();
        for (std::size_t i = 0; exact && i < ref.steps.size(); ++i) {
            exact = got.steps[i].context == ref.steps[i].context;
        }
    }
    const auto conv = conv_of(set, {"A", "C_minus", "C_minus", "A"});
    int runs = 0;
    int tipped = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ToyTransformer::RandomSpec spec;
        spec.hidden = 8;
        spec.mlp_scale = 0.1;
        spec.seed = seed;
        const auto base = ToyTransformer::random(2, 1.0, spec);
        for (double g : {0.5, 1.0, 2.0, 4.0, 8.0}) {
            ++runs;
            tipped += generate_symbols(conv, base.with_mlp_gain(g), set, kWindow).first_hit.has_value();
        }
    }
    report("multilayer_reduction", exact && tipped > 0,
           fmt::format("identity reduction {} over {} steps; nonzero-gain runs with a D tip {}/{}",
                       exact ? "exact" : "differs", kWindow, tipped, runs));
}

void logistic_reduction() {
    const auto t0 = Clock::now();
    const auto scan = bifurcation_scan(2.8, 3.6, 801);
    const double ms = ms_since(t0);
    const bool found = scan.doublings.size() >= 2;
    const double r1 = found ? scan.doublings[0].r : NAN;
    const double r2 = found ? scan.doublings[1].r : NAN;
    const double r = 3.2;
    const auto pattern = symbolize(orbit(0.5, r, 16), 1.0 - 1.0 / r);
    const bool ok = found && std::abs(r1 - 3.0) <= kDoublingTol && std::abs(r2 - 3.449) <= kDoublingTol &&
                    pattern.block == "BD" && ms < kLogisticLimitMs;
    report("logistic_reduction", ok,
           fmt::format("doublings r={:.4f} r={:.4f} pattern={} time={:.0f}ms", r1, r2, pattern.display(), ms));
}

void statistics() {
    double p6 = 0.0;
    double p18 = 0.0;
    double p16 = 0.0;
    BaselineComparison base;
    std::vector<NStar> pred;
    std::vector<ObservedTip> obs;
    for (int i = 0; i < 13; ++i) {
        pred.push_back(NStar::count(i % 2));
        obs.push_back(i % 2);
    }
    for (int i = 0; i < 3; ++i) {
        pred.push_back(NStar::count(3));
        obs.push_back(3);
    }
    for (int i = 0; i < 2; ++i) {
        pred.push_back(NStar::count(1));
        obs.push_back(5);
    }
    const double ms = median_ms([&] {
        p6 = binomial_test(6, 6, 0.5, Sided::kTwo);
        p18 = binomial_test(16, 18, 0.5, Sided::kOne);
        p16 = binomial_test(15, 16, 0.5, Sided::kOne);
        base = baseline_compare(pred, obs);
    });
    const bool ok = p6 == 0.03125 && p18 >= 0.00065 && p18 <= 0.00066 && p16 >= 0.00025 && p16 <= 0.00027 &&
                    base.model_hits == 16 && base.baseline_hits == 13 && base.total == 18 && ms < kStatsLimitMs;
    report("statistics", ok,
           fmt::format("p(6/6,two)={} p(16/18)={:.9f} p(15/16)={:.9f} model {}/{} baseline {}/{} time={:.4f}ms", p6,
                       p18, p16, base.model_hits, base.total, base.baseline_hits, base.total, ms));
}

void monitor() {
    std::mt19937_64 gen(11);
    const auto b = oracle::uniform_vec(gen, 8);
    const auto d = oracle::uniform_vec(gen, 8);
    const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}});
    double worst = 0.0;
    bool two_dots = true;
    for (std::size_t window : {std::size_t{kWindow}, std::size_t{20000}}) {
        MonitorConfig cfg;
        cfg.window = window;
        TippingMonitor m(set, cfg);
        std::vector<oracle::Vec> tokens;
        for (int i = 0; i < 10000; ++i) {
            tokens.push_back(oracle::uniform_vec(gen, 8));
            const auto before = dot_invocations();
            m.push(vec(tokens.back()));
            two_dots = two_dots && dot_invocations() - before == 2;
        }
        const std::size_t start = tokens.size() > window ? tokens.size() - window : 0;
        const std::vector<oracle::Vec> tail(tokens.begin() + static_cast<std::ptrdiff_t>(start), tokens.end());
        const long double ref = oracle::numerator(tail, b, d, 1.0);
        long double scale = 0.0L;
        for (const auto& t : tail) scale += std::abs(oracle::numerator({t}, b, d, 1.0));
        worst = std::max(worst, static_cast<double>(std::abs(m.running_numerator() - ref) / scale));
    }

    const auto f = worked();
    TippingMonitor m(f);
    m.push(f.centroid("A"));
    auto prev = m.status().n_star->value();
    bool monotone = true;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int fed = 0;
    while (fed < 50) {
        const EmbeddingVector t{u(gen), u(gen)};
        if (!(dot(t, f.bad()) > dot(t, f.good()))) continue;
        ++fed;
        m.push(t);
        const auto now = m.status().n_star->value();
        monotone = monotone && now <= prev;
        prev = now;
    }
    const bool ok = worst < kMonitorRelTol && two_dots && monotone;
    report("monitor", ok,
           fmt::format("max relative error {:.2e}; two dots per push {}; D-aligned n* non-increasing {}", worst,
                       two_dots ? "yes" : "no", monotone ? "yes" : "no"));
}

void bootstrap_determinism() {
    const std::map<Label, std::vector<EmbeddingVector>> phrases{
        {"B", {{0.82, 0.03}, {0.77, -0.04}, {0.81, 0.01}, {0.79, 0.02}}},
        {"D", {{0.93, 0.47}, {0.88, 0.52}, {0.89, 0.51}, {0.91, 0.49}}}};
    BootstrapConfig cfg;
    cfg.seed = 99;
    const EmbeddingVector prompt{0.4, -0.3};
    const auto a = bootstrap(phrases, prompt, cfg);
    cfg.threads = 1;
    const auto b = bootstrap(phrases, prompt, cfg);
    const bool same =
        a.ci_delta_hat == b.ci_delta_hat && a.ci_delta_cos == b.ci_delta_cos && a.ci_n_star == b.ci_n_star;
    const std::map<Label, std::vector<EmbeddingVector>> flat{{"B", {{0.8, 0.0}, {0.8, 0.0}}},
                                                             {"D", {{0.9, 0.5}, {0.9, 0.5}}}};
    const auto z = bootstrap(flat, prompt);
    const bool zero = z.ci_delta_hat.lower == z.ci_delta_hat.upper && z.ci_delta_cos.lower == z.ci_delta_cos.upper &&
                      z.ci_n_star.lower == z.ci_n_star.upper;
    report("bootstrap_determinism", same && zero,
           fmt::format("fixed seed identical {}; identical phrases zero width {}", same ? "yes" : "no",
                       zero ? "yes" : "no"));
}

} // namespace

int main() {
    worked_prompt();
    steering_direction();
    oracle_equivalence();
    immediate_absorbing();
    multilayer_reduction();
    logistic_reduction();
    statistics();
    monitor();
    bootstrap_determinism();
    return failures == 0 ? 0 : 1;
}

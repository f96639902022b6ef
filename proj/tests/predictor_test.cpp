#include "oracles.hpp"
#include "tipping/errors.hpp"
#include "tipping/predictor.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace tipping;

namespace {

BasinSet worked() {
    return BasinSet::from_centroids({{"A", {0.4, -0.3}}, {"B", {0.8, 0.0}}, {"D", {0.9, 0.5}},
                                     {"C_plus", {0.2, 0.2}}, {"C_minus", {-0.2, -0.2}}});
}

Conversation conv_of(const BasinSet& set, std::vector<Label> labels) { return Conversation::from_labels(labels, set); }

std::vector<oracle::Vec> raw(const Conversation& c) {
    std::vector<oracle::Vec> out;
    for (const auto& e : c.entries()) out.emplace_back(e.vector.components().begin(), e.vector.components().end());
    return out;
}

oracle::Vec raw(const EmbeddingVector& v) { return {v.components().begin(), v.components().end()}; }

EmbeddingVector vec(const oracle::Vec& v) { return EmbeddingVector(v); }

const PredictorConfig kEquation{1.0, 0.01, PredictionMode::kEquationOnPrompt};

} // namespace

TEST_CASE("denominator of the worked geometry") {
    const auto set = worked();
    // (B.D - B.B) e^{B.B} = (0.72 - 0.64) e^{0.64}
    CHECK(tipping_denominator(set.good(), set.bad(), 1.0) == doctest::Approx(0.08 * std::exp(0.64)).epsilon(1e-14));
    CHECK(tipping_denominator(set.good(), set.bad(), 1.0) == doctest::Approx(0.1517).epsilon(1e-3));
}

TEST_CASE("worked prompts: raw values against the oracle and n*") {
    const auto set = worked();
    struct Case {
        std::vector<Label> labels;
        double raw;
        std::int64_t n_star;
    };
    for (const auto& c : {Case{{"A"}, 0.99845, 1}, Case{{"A", "C_plus", "C_plus", "A"}, 0.14056, 1},
                          Case{{"A", "C_minus", "C_minus", "A"}, 3.3449, 4}}) {
        const auto conv = conv_of(set, c.labels);
        const auto p = tipping_point(conv, set);
        const double ref = static_cast<double>(oracle::raw_tipping(raw(conv), raw(set.good()), raw(set.bad()), 1.0));
        CAPTURE(conv.symbols());
        CHECK(p.raw_value == doctest::Approx(ref).epsilon(1e-13));
        CHECK(p.raw_value == doctest::Approx(c.raw).epsilon(1e-4));
        CHECK(p.n_star == NStar::count(c.n_star));
        CHECK_FALSE(p.d_first);
        CHECK(tipping_point(conv, set, kEquation).n_star == NStar::count(c.n_star));
    }
}

TEST_CASE("immediate prompt is gated to zero") {
    const auto set = worked();
    const auto p = tipping_point(Conversation({Entry{"P", {0.2, 0.6}}}), set);
    CHECK(p.d_first);
    CHECK(p.n_star == NStar::count(0));
    CHECK(p.timing_class == TimingClass::kImmediate);
    CHECK(p.delta_raw > 0.0);
}

TEST_CASE("steering with C- delays the tip") {
    const auto set = worked();
    const auto minus = conv_of(set, {"C_minus", "C_minus", "A"});
    const auto r = steer(conv_of(set, {"A"}), minus.entries(), set);
    CHECK(r.before.n_star == NStar::count(1));
    CHECK(r.after.n_star == NStar::count(4));
    CHECK(r.delta_n_star == 3);
    const auto one = conv_of(set, {"C_minus"});
    CHECK(steer(conv_of(set, {"A"}), one.entries(), set).after.n_star == NStar::count(2));
    // Replacing C+ with C- strictly increases n*.
    const auto plus = tipping_point(conv_of(set, {"A", "C_plus", "C_plus", "A"}), set);
    const auto neg = tipping_point(conv_of(set, {"A", "C_minus", "C_minus", "A"}), set);
    CHECK(neg.n_star.value() > plus.n_star.value());
}

TEST_CASE("stable B geometry") {
    const auto set = BasinSet::from_centroids({{"A", {0.6, -0.2}}, {"B", {1.0, 0.0}}, {"D", {0.5, 0.8}}});
    const auto p = tipping_point(conv_of(set, {"A"}), set);
    CHECK(p.denominator < 0.0);
    CHECK(p.n_star.is_stable());
    CHECK(p.timing_class == TimingClass::kStableB);
    CHECK(attractor_class(set).kind == AttractorClass::kBStable);
}

TEST_CASE("degenerate boundary geometry throws") {
    // B.D == B.B
    const auto set = BasinSet::from_centroids({{"A", {0.3, -0.2}}, {"B", {1.0, 0.0}}, {"D", {1.0, 0.7}}});
    CHECK_THROWS_AS(tipping_point(conv_of(set, {"A"}), set), DegenerateGeometry);
}

TEST_CASE("attractor classes") {
    CHECK(attractor_class(worked()).kind == AttractorClass::kDAbsorbing);
    CHECK(attractor_class(BasinSet::from_centroids({{"B", {1.0, 0.0}}, {"D", {1.0, 0.0}}})).degenerate);
    CHECK(attractor_class(BasinSet::from_centroids({{"B", {1.0, 0.0}}, {"D", {0.5, 0.8}}})).kind ==
          AttractorClass::kBStable);
}

TEST_CASE("property: B.D > B.B forces D.D > D.B (Cauchy-Schwarz), so D absorbs") {
    std::mt19937_64 gen(17);
    int checked = 0;
    while (checked < 300) {
        const auto b = oracle::uniform_vec(gen, 3);
        const auto d = oracle::uniform_vec(gen, 3);
        if (!(oracle::dot(b, d) > oracle::dot(b, b))) continue;
        CHECK(oracle::dot(d, d) > oracle::dot(d, b));
        CHECK(attractor_class(BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}})).kind ==
              AttractorClass::kDAbsorbing);
        ++checked;
    }
}

TEST_CASE("timing class rule order") {
    AlignmentReport a;
    a.delta_raw = 0.5;
    a.delta_hat = 0.005;
    CHECK(classify_timing(a, 1.0, 0.01) == TimingClass::kNearBoundary);
    a.delta_hat = 0.5;
    CHECK(classify_timing(a, 1.0, 0.01) == TimingClass::kImmediate);
    CHECK(classify_timing(a, -1.0, 0.01) == TimingClass::kImmediate);
    a.delta_raw = -0.5;
    a.delta_hat = -0.5;
    CHECK(classify_timing(a, -1.0, 0.01) == TimingClass::kStableB);
    CHECK(classify_timing(a, 1.0, 0.01) == TimingClass::kDelayed);
}

TEST_CASE("rounding of the raw value") {
    CHECK(n_star_from_raw(0.99845) == NStar::count(1));
    CHECK(n_star_from_raw(2.0) == NStar::count(2));
    CHECK(n_star_from_raw(2.0000001) == NStar::count(3));
    CHECK(n_star_from_raw(0.0) == NStar::count(0));
    CHECK(n_star_from_raw(-7.5) == NStar::count(0));
    CHECK(n_star_from_raw(1e300) == NStar::count(std::numeric_limits<std::int64_t>::max()));
    CHECK(NStar::stable().to_string() == "stable");
    CHECK_THROWS_AS(NStar::stable().value(), InvalidArgument);
    CHECK_THROWS_AS(NStar::count(-1), InvalidArgument);
}

TEST_CASE("property: n* is the ceiling of the raw value when the gate does not fire") {
    std::mt19937_64 gen(7);
    for (int i = 0; i < 500; ++i) {
        const auto a = oracle::uniform_vec(gen, 3);
        const auto b = oracle::uniform_vec(gen, 3);
        const auto d = oracle::uniform_vec(gen, 3);
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}});
        TippingPrediction p;
        try {
            p = tipping_point(Conversation({Entry{"A", vec(a)}}), set, kEquation);
        } catch (const DegenerateGeometry&) {
            continue;
        }
        if (p.denominator > 0.0) {
            CHECK(p.n_star == n_star_from_raw(p.raw_value));
            CHECK(p.n_star.value() >= 0);
        }
    }
}

TEST_CASE("property: numerator is invariant under reordering the conversation") {
    std::mt19937_64 gen(8);
    const auto b = oracle::uniform_vec(gen, 4);
    const auto d = oracle::uniform_vec(gen, 4);
    std::vector<EmbeddingVector> conv;
    for (int i = 0; i < 12; ++i) conv.push_back(vec(oracle::uniform_vec(gen, 4)));
    const double base = tipping_numerator(conv, vec(b), vec(d), 1.0);
    for (int k = 0; k < 20; ++k) {
        std::shuffle(conv.begin(), conv.end(), gen);
        CHECK(tipping_numerator(conv, vec(b), vec(d), 1.0) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("property: appending a D-leaning entry never raises n*") {
    std::mt19937_64 gen(9);
    int checked = 0;
    while (checked < 200) {
        const auto a = oracle::uniform_vec(gen, 3);
        const auto b = oracle::uniform_vec(gen, 3);
        const auto d = oracle::uniform_vec(gen, 3);
        const auto p = oracle::uniform_vec(gen, 3);
        if (!(oracle::dot(b, d) > oracle::dot(b, b)) || !(oracle::dot(p, d) > oracle::dot(p, b))) continue;
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}});
        Conversation conv({Entry{"A", vec(a)}});
        const auto before = tipping_point(conv, set, kEquation);
        conv.push_back(Entry{"P", vec(p)});
        const auto after = tipping_point(conv, set, kEquation);
        CHECK(after.raw_value < before.raw_value);
        CHECK(after.n_star.value() <= before.n_star.value());
        ++checked;
    }
}

TEST_CASE("oracle sweep: gated prediction within one of the simulated first hit") {
    const auto geoms = oracle::sweep_geometries(2024, 200);
    int agree = 0;
    int exact_in_window = 0;
    int in_window = 0;
    for (const auto& g : geoms) {
        const auto set = BasinSet::from_centroids({{"B", vec(g.b)}, {"D", vec(g.d)}});
        const auto p = tipping_point(Conversation({Entry{"A", vec(g.a)}}), set);
        const auto obs = oracle::first_hit({g.a}, g.b, g.d, 1.0, 300);
        if (obs && std::abs(p.n_star.value() - *obs) <= 1) ++agree;
        if (p.raw_value < 290.0) {
            ++in_window;
            exact_in_window += obs && p.n_star.value() == *obs;
        }
    }
    MESSAGE("within one: " << agree << "/200, exact inside the window: " << exact_in_window << "/" << in_window);
    CHECK(agree >= 160);
    CHECK(exact_in_window == in_window);
}

TEST_CASE("multilayer threshold") {
    const auto set = worked();
    const auto& a = set.centroid("A");
    const double expected = dot(set.good(), set.bad() - set.good()) / dot(a - set.good(), set.good() - set.bad());
    CHECK(multilayer_threshold(a, set) == doctest::Approx(expected));
    CHECK_THROWS_AS(multilayer_threshold(set.good(), set), DegenerateGeometry);
}

TEST_CASE("prediction serialization") {
    const auto p = tipping_point(conv_of(worked(), {"A"}), worked());
    const auto j = prediction_json(p);
    CHECK(j.find("\"n_star\":1") != std::string::npos);
    CHECK(j.find("\"timing_class\":\"delayed\"") != std::string::npos);
    CHECK(prediction_csv_row(p).rfind("1,", 0) == 0);
    CHECK(prediction_csv_header().rfind("n_star,", 0) == 0);
}

TEST_CASE("argument checks") {
    const auto set = worked();
    CHECK_THROWS_AS(tipping_point(Conversation{}, set), InvalidArgument);
    CHECK_THROWS_AS(tipping_point(Conversation({Entry{"P", {1.0}}}), set), DimensionError);
    CHECK_THROWS_AS(tipping_point(conv_of(set, {"A"}), set, {0.0, 0.01, PredictionMode::kOneStepGate}),
                    InvalidArgument);
    const auto no_d = BasinSet::from_centroids({{"A", {0.4, -0.3}}, {"B", {0.8, 0.0}}});
    CHECK_THROWS_AS(tipping_point(conv_of(no_d, {"A"}), no_d), InvalidArgument);
}

#include "oracles.hpp"
#include "tipping/dynamics.hpp"
#include "tipping/errors.hpp"

#include <doctest.h>

#include <cmath>
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
    for (const auto& e : c.entries()) {
        out.emplace_back(e.vector.components().begin(), e.vector.components().end());
    }
    return out;
}

oracle::Vec raw(const EmbeddingVector& v) { return {v.components().begin(), v.components().end()}; }

EmbeddingVector vec(const oracle::Vec& v) { return EmbeddingVector(v); }

} // namespace

TEST_CASE("context of a single entry is that entry") {
    const auto set = worked();
    CHECK(context_vector(conv_of(set, {"A"}), 1.0) == set.centroid("A"));
}

TEST_CASE("context of A,B matches the softmax oracle") {
    const auto set = worked();
    const auto conv = conv_of(set, {"A", "B"});
    const auto c = context_vector(conv, 1.0);
    const auto ref = oracle::context(raw(conv), 1.0);
    CHECK(c[0] == doctest::Approx(ref[0]).epsilon(1e-14));
    CHECK(c[1] == doctest::Approx(ref[1]).epsilon(1e-14));
    CHECK(c[0] == doctest::Approx(0.63173).epsilon(1e-5));
    CHECK(c[1] == doctest::Approx(-0.12620).epsilon(1e-4));
    // Just past the boundary: c.D - c.B is about 8e-5.
    const double margin = dot(c, set.bad()) - dot(c, set.good());
    CHECK(margin > 0.0);
    CHECK(margin < 2e-4);
}

TEST_CASE("worked geometry rollouts") {
    const auto set = worked();
    DynamicsConfig cfg;
    const auto a = rollout(conv_of(set, {"A"}), set, cfg);
    CHECK(a.first_hit == 1);
    CHECK(a.symbols().substr(0, 4) == "BDDD");
    CHECK(a.symbols().size() == 300);
    CHECK(a.symbols().find('B', 1) == std::string::npos);

    CHECK(rollout(conv_of(set, {"A", "C_plus", "C_plus", "A"}), set, cfg).first_hit == 1);
    CHECK(rollout(conv_of(set, {"A", "C_minus", "C_minus", "A"}), set, cfg).first_hit == 4);
    const auto imm = rollout(Conversation({Entry{"P", {0.2, 0.6}}}), set, cfg);
    CHECK(imm.first_hit == 0);
    CHECK(imm.symbols().substr(0, 3) == "DDD");
}

TEST_CASE("rollout symbols match the oracle on the worked prompts") {
    const auto set = worked();
    DynamicsConfig cfg;
    for (const std::vector<Label>& labels : {std::vector<Label>{"A"}, std::vector<Label>{"A", "C_plus", "C_plus", "A"},
                                             std::vector<Label>{"A", "C_minus", "C_minus", "A"}}) {
        const auto conv = conv_of(set, labels);
        std::string expected;
        const auto hit = oracle::first_hit(raw(conv), raw(set.good()), raw(set.bad()), 1.0, 300, &expected);
        const auto trace = rollout(conv, set, cfg);
        CHECK(trace.symbols() == expected);
        CHECK(trace.first_hit == hit);
    }
}

TEST_CASE("first hit agrees with the oracle on random delayed geometries") {
    DynamicsConfig cfg;
    cfg.max_steps = 60;
    int compared = 0;
    for (const auto& g : oracle::sweep_geometries(21, 200, 3)) {
        const auto set = BasinSet::from_centroids({{"B", vec(g.b)}, {"D", vec(g.d)}});
        const auto trace = rollout(Conversation({Entry{"A", vec(g.a)}}), set, cfg);
        const auto expected = oracle::first_hit({g.a}, g.b, g.d, 1.0, cfg.max_steps);
        CHECK(trace.first_hit == expected);
        ++compared;
    }
    CHECK(compared == 200);
}

TEST_CASE("stored contexts reproduce the first hit") {
    const auto set = worked();
    const auto trace = rollout(conv_of(set, {"A", "C_minus", "C_minus", "A"}), set, DynamicsConfig{});
    CHECK(first_hit_from_contexts(trace.steps, set) == trace.first_hit);
}

TEST_CASE("property: immediate and absorbing geometry gives D from the first step") {
    std::mt19937_64 gen(101);
    int checked = 0;
    while (checked < 100) {
        const std::size_t d = 2 + checked % 7;
        const auto a = oracle::uniform_vec(gen, d);
        const auto b = oracle::uniform_vec(gen, d);
        const auto dd = oracle::uniform_vec(gen, d);
        if (!(oracle::dot(a, dd) > oracle::dot(a, b) && oracle::dot(dd, dd) > oracle::dot(dd, b))) continue;
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(dd)}});
        const auto trace = rollout(Conversation({Entry{"A", vec(a)}}), set, DynamicsConfig{});
        CHECK(trace.first_hit == 0);
        CHECK(trace.symbols() == std::string(300, 'D'));
        ++checked;
    }
}

TEST_CASE("property: stable B with a B-leaning prompt never emits D") {
    std::mt19937_64 gen(202);
    int checked = 0;
    while (checked < 100) {
        const std::size_t d = 2 + checked % 7;
        const auto a = oracle::uniform_vec(gen, d);
        const auto b = oracle::uniform_vec(gen, d);
        const auto dd = oracle::uniform_vec(gen, d);
        if (!(oracle::dot(b, dd) < oracle::dot(b, b) && oracle::dot(a, b) > oracle::dot(a, dd))) continue;
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(dd)}});
        const auto trace = rollout(Conversation({Entry{"A", vec(a)}}), set, DynamicsConfig{});
        CHECK_FALSE(trace.first_hit.has_value());
        CHECK(trace.symbols() == std::string(300, 'B'));
        ++checked;
    }
}

TEST_CASE("property: scaling vectors by s and temperature by s^2 leaves greedy traces unchanged") {
    std::mt19937_64 gen(303);
    for (int i = 0; i < 20; ++i) {
        const auto a = oracle::uniform_vec(gen, 4);
        const auto b = oracle::uniform_vec(gen, 4);
        const auto d = oracle::uniform_vec(gen, 4);
        const auto set = BasinSet::from_centroids({{"B", vec(b)}, {"D", vec(d)}});
        const auto scaled = BasinSet::from_centroids({{"B", vec(b).scaled(2.0)}, {"D", vec(d).scaled(2.0)}});
        DynamicsConfig cfg;
        cfg.max_steps = 80;
        const auto t1 = rollout(Conversation({Entry{"A", vec(a)}}), set, cfg);
        cfg.t_eff = 4.0;
        const auto t2 = rollout(Conversation({Entry{"A", vec(a).scaled(2.0)}}), scaled, cfg);
        CHECK(t1.symbols() == t2.symbols());
        CHECK(t1.first_hit == t2.first_hit);
    }
}

TEST_CASE("greedy ties go to D") {
    const auto set = BasinSet::from_centroids({{"B", {1.0, 0.0}}, {"D", {0.0, 1.0}}});
    Rng rng(0);
    const std::vector<Label> cands{"B", "D"};
    CHECK(next_symbol(EmbeddingVector{1.0, 1.0}, set, cands, 0.0, rng) == "D");
    CHECK(next_symbol(EmbeddingVector{1.0, 0.5}, set, cands, 0.0, rng) == "B");
}

TEST_CASE("sampling at T > 0 follows the softmax distribution") {
    const auto set = BasinSet::from_centroids({{"B", {1.0, 0.0}}, {"D", {0.0, 1.0}}});
    const EmbeddingVector c{0.30, 0.25};
    const std::vector<Label> cands{"B", "D"};
    for (double temp : {0.05, 0.2, 1.0}) {
        Rng rng(42);
        const int n = 20000;
        int d_count = 0;
        for (int i = 0; i < n; ++i) {
            d_count += next_symbol(c, set, cands, temp, rng) == "D";
        }
        const double p_d = 1.0 / (1.0 + std::exp((0.30 - 0.25) / temp));
        const double e_d = n * p_d;
        const double e_b = n * (1.0 - p_d);
        const double chi2 = std::pow(d_count - e_d, 2) / e_d + std::pow((n - d_count) - e_b, 2) / e_b;
        CAPTURE(temp);
        CHECK(chi2 < 10.83);  // 1 dof, p = 0.001
    }
}

TEST_CASE("sampled rollouts are reproducible under a seed") {
    const auto set = worked();
    DynamicsConfig cfg;
    cfg.decode_temperature = 0.05;
    cfg.rng_seed = 9;
    const auto conv = conv_of(set, {"A", "C_minus", "C_minus", "A"});
    CHECK(rollout(conv, set, cfg).symbols() == rollout(conv, set, cfg).symbols());
}

TEST_CASE("one-step continuation") {
    const auto set = worked();
    const auto a = one_step_continuation(conv_of(set, {"A"}), set, DynamicsConfig{});
    CHECK_FALSE(a.d_first);
    CHECK(a.extended.size() == 2);
    CHECK(a.extended.back().label == "B");
    const auto imm = one_step_continuation(Conversation({Entry{"P", {0.2, 0.6}}}), set, DynamicsConfig{});
    CHECK(imm.d_first);
}

TEST_CASE("trace json lines round-trip") {
    const auto set = worked();
    DynamicsConfig cfg;
    cfg.max_steps = 12;
    const auto trace = rollout(conv_of(set, {"A", "C_minus", "C_minus", "A"}), set, cfg);
    const auto back = parse_trace_jsonl(trace_jsonl(trace));
    REQUIRE(back.steps.size() == trace.steps.size());
    CHECK(back.symbols() == trace.symbols());
    CHECK(back.first_hit == trace.first_hit);
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        CHECK(back.steps[i].context == trace.steps[i].context);
    }
    CHECK_THROWS_AS(parse_trace_jsonl("{\"step\": 0}\n"), FormatError);
}

TEST_CASE("rollout argument checks") {
    const auto set = worked();
    DynamicsConfig cfg;
    CHECK_THROWS_AS(rollout(Conversation{}, set, cfg), InvalidArgument);
    CHECK_THROWS_AS(rollout(Conversation({Entry{"P", {1.0, 2.0, 3.0}}}), set, cfg), DimensionError);
    cfg.max_steps = 0;
    CHECK_THROWS_AS(rollout(conv_of(set, {"A"}), set, cfg), InvalidArgument);
    cfg = DynamicsConfig{};
    cfg.t_eff = 0.0;
    CHECK_THROWS_AS(rollout(conv_of(set, {"A"}), set, cfg), InvalidArgument);
    cfg = DynamicsConfig{};
    cfg.decode_temperature = -1.0;
    CHECK_THROWS_AS(rollout(conv_of(set, {"A"}), set, cfg), InvalidArgument);
    CHECK_THROWS_AS(conv_of(set, {"Q"}), InvalidArgument);
}

#include "tipping/predictor.hpp"

#include "json_util.hpp"
#include "tipping/errors.hpp"

#include <cmath>
#include <fmt/format.h>
#include <limits>

namespace tipping {

NStar NStar::count(std::int64_t n) {
    if (n < 0) {
        throw InvalidArgument("n* must be non-negative");
    }
    NStar out;
    out.count_ = n;
    return out;
}

std::int64_t NStar::value() const {
    if (!count_) {
        throw InvalidArgument("n* is stable (no finite value)");
    }
    return *count_;
}

std::string NStar::to_string() const { return count_ ? std::to_string(*count_) : "stable"; }

NStar n_star_from_raw(double raw) {
    const double up = std::ceil(raw);
    if (!(up > 0.0)) {
        return NStar::count(0);
    }
    // 2^63 is exactly representable; anything at or above saturates.
    if (up >= 9223372036854775808.0) {
        return NStar::count(std::numeric_limits<std::int64_t>::max());
    }
    return NStar::count(static_cast<std::int64_t>(up));
}

std::string to_string(TimingClass c) {
    switch (c) {
    case TimingClass::kImmediate: return "immediate";
    case TimingClass::kDelayed: return "delayed";
    case TimingClass::kStableB: return "stable_B";
    case TimingClass::kNearBoundary: return "near_boundary";
    }
    return "unknown";
}

std::string to_string(AttractorClass c) {
    switch (c) {
    case AttractorClass::kDAbsorbing: return "D_absorbing";
    case AttractorClass::kOscillatoryCapable: return "oscillatory_capable";
    case AttractorClass::kBStable: return "B_stable";
    }
    return "unknown";
}

double tipping_numerator_term(const EmbeddingVector& entry, const EmbeddingVector& good, const EmbeddingVector& bad,
                              double t_eff) {
    const double to_good = dot(entry, good);
    return (to_good - dot(entry, bad)) * std::exp(to_good / t_eff);
}

double tipping_numerator(std::span<const EmbeddingVector> conversation, const EmbeddingVector& good,
                         const EmbeddingVector& bad, double t_eff) {
    double sum = 0.0;
    for (const auto& p : conversation) {
        sum += tipping_numerator_term(p, good, bad, t_eff);
    }
    return sum;
}

double tipping_denominator(const EmbeddingVector& good, const EmbeddingVector& bad, double t_eff) {
    const double gg = dot(good, good);
    const double gb = dot(good, bad);
    if (gb == gg) {
        throw DegenerateGeometry("B.D == B.B: tipping denominator is zero (basin boundary)");
    }
    return (gb - gg) * std::exp(gg / t_eff);
}

TimingClass classify_timing(const AlignmentReport& alignment, double denominator, double epsilon_boundary) {
    if (std::abs(alignment.delta_hat) < epsilon_boundary) {
        return TimingClass::kNearBoundary;
    }
    if (alignment.delta_raw > 0.0) {
        return TimingClass::kImmediate;
    }
    if (denominator < 0.0 && alignment.delta_raw < 0.0) {
        return TimingClass::kStableB;
    }
    return TimingClass::kDelayed;
}

TippingPrediction tipping_point(const Conversation& conv, const BasinSet& basins, const PredictorConfig& cfg) {
    basins.require_tipping_pair();
    if (conv.empty()) {
        throw InvalidArgument("tipping_point needs a non-empty conversation");
    }
    if (conv.dimension() != basins.dimension()) {
        throw DimensionError(conv.dimension(), basins.dimension());
    }
    if (!(cfg.t_eff > 0.0)) {
        throw InvalidArgument("t_eff must be positive");
    }

    const auto& good = basins.good();
    const auto& bad = basins.bad();
    const auto vectors = conv.vectors();

    TippingPrediction p;
    p.numerator = tipping_numerator(vectors, good, bad, cfg.t_eff);
    p.denominator = tipping_denominator(good, bad, cfg.t_eff);
    p.raw_value = p.numerator / p.denominator;

    const auto align = alignment(context_vector(conv, cfg.t_eff), basins);
    p.delta_raw = align.delta_raw;
    p.delta_hat = align.delta_hat;
    p.timing_class = classify_timing(align, p.denominator, cfg.epsilon_boundary);
    p.reliable = std::abs(p.delta_hat) >= cfg.epsilon_boundary;

    if (cfg.mode == PredictionMode::kOneStepGate) {
        DynamicsConfig dyn;
        dyn.t_eff = cfg.t_eff;
        p.d_first = one_step_continuation(conv, basins, dyn).d_first;
    }

    if (p.d_first) {
        p.n_star = NStar::count(0);
    } else if (p.denominator < 0.0) {
        p.n_star = p.timing_class == TimingClass::kImmediate ? NStar::count(0) : NStar::stable();
    } else {
        p.n_star = n_star_from_raw(p.raw_value);
    }
    return p;
}

AttractorReport attractor_class(const BasinSet& basins) {
    basins.require_tipping_pair();
    const auto& good = basins.good();
    const auto& bad = basins.bad();
    AttractorReport out;
    out.degenerate = good == bad;
    if (out.degenerate) {
        out.kind = AttractorClass::kDAbsorbing;
        return out;
    }
    const double gg = dot(good, good);
    const double gb = dot(good, bad);
    const double bb = dot(bad, bad);
    if (gb < gg) {
        out.kind = AttractorClass::kBStable;
    } else if (bb > gb) {
        out.kind = AttractorClass::kDAbsorbing;
    } else {
        out.kind = AttractorClass::kOscillatoryCapable;
    }
    return out;
}

SteerResult steer(const Conversation& conv, std::span<const Entry> injected, const BasinSet& basins,
                  const PredictorConfig& cfg) {
    SteerResult out;
    out.before = tipping_point(conv, basins, cfg);
    out.after = tipping_point(conv.appended(injected), basins, cfg);
    if (!out.before.n_star.is_stable() && !out.after.n_star.is_stable()) {
        out.delta_n_star = out.after.n_star.value() - out.before.n_star.value();
    }
    return out;
}

double multilayer_threshold(const EmbeddingVector& probe, const BasinSet& basins) {
    basins.require_tipping_pair();
    const auto& good = basins.good();
    const auto& bad = basins.bad();
    const double denominator = dot(probe - good, good - bad);
    if (denominator == 0.0) {
        throw DegenerateGeometry("(P - B).(B - D) == 0: multilayer threshold undefined");
    }
    return dot(good, bad - good) / denominator;
}

std::string prediction_json(const TippingPrediction& p) {
    detail::json doc;
    if (p.n_star.is_stable()) {
        doc["n_star"] = "stable";
    } else {
        doc["n_star"] = p.n_star.value();
    }
    doc["raw_value"] = p.raw_value;
    doc["numerator"] = p.numerator;
    doc["denominator"] = p.denominator;
    doc["delta_raw"] = p.delta_raw;
    doc["delta_hat"] = p.delta_hat;
    doc["timing_class"] = to_string(p.timing_class);
    doc["reliable"] = p.reliable;
    doc["d_first"] = p.d_first;
    return doc.dump();
}

std::string prediction_csv_header() {
    return "n_star,raw_value,numerator,denominator,delta_raw,delta_hat,timing_class,reliable,d_first";
}

std::string prediction_csv_row(const TippingPrediction& p) {
    return fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{}", p.n_star.to_string(), p.raw_value,
                       p.numerator, p.denominator, p.delta_raw, p.delta_hat, to_string(p.timing_class),
                       p.reliable ? 1 : 0, p.d_first ? 1 : 0);
}

} // namespace tipping

#pragma once

// Closed-form tipping point. For a conversation P_1..P_m and basin
// centroids B, D:
//
//            sum_i (P_i.B - P_i.D) exp(P_i.B / t_eff)
//   n* = ceil( ---------------------------------------- ),  n* >= 0
//                (B.D - B.B) exp(B.B / t_eff)
//
// A negative denominator (B.D < B.B) makes B a stable attractor and n* is
// reported as "stable".

#include "tipping/dynamics.hpp"
#include "tipping/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>

namespace tipping {

// Number of B symbols before the first D, or "stable" (never tips).
class NStar {
public:
    static NStar count(std::int64_t n);
    static NStar stable() { return NStar(); }

    bool is_stable() const noexcept { return !count_; }
    std::int64_t value() const;  // throws when stable
    std::optional<std::int64_t> as_optional() const noexcept { return count_; }
    std::string to_string() const;  // decimal or "stable"

    friend bool operator==(const NStar&, const NStar&) = default;

private:
    NStar() = default;
    std::optional<std::int64_t> count_;
};

// ceil(raw) clamped to [0, INT64_MAX].
NStar n_star_from_raw(double raw);

enum class TimingClass { kImmediate, kDelayed, kStableB, kNearBoundary };
enum class AttractorClass { kDAbsorbing, kOscillatoryCapable, kBStable };

std::string to_string(TimingClass c);
std::string to_string(AttractorClass c);

enum class PredictionMode {
    kEquationOnPrompt,  // evaluate the formula on the conversation as given
    kOneStepGate,       // one greedy symbol first; D-first => n* = 0
};

struct PredictorConfig {
    double t_eff = 1.0;
    double epsilon_boundary = 0.01;
    PredictionMode mode = PredictionMode::kOneStepGate;
};

struct TippingPrediction {
    NStar n_star = NStar::stable();
    double raw_value = 0.0;   // right-hand side before rounding
    double numerator = 0.0;
    double denominator = 0.0;
    double delta_raw = 0.0;   // alignment of the first-step context vector
    double delta_hat = 0.0;
    TimingClass timing_class = TimingClass::kDelayed;
    bool reliable = true;
    bool d_first = false;     // one-step gate fired
};

double tipping_numerator(std::span<const EmbeddingVector> conversation, const EmbeddingVector& good,
                         const EmbeddingVector& bad, double t_eff);
double tipping_numerator_term(const EmbeddingVector& entry, const EmbeddingVector& good, const EmbeddingVector& bad,
                              double t_eff);
// Throws DegenerateGeometry when B.D == B.B exactly.
double tipping_denominator(const EmbeddingVector& good, const EmbeddingVector& bad, double t_eff);

TippingPrediction tipping_point(const Conversation& conv, const BasinSet& basins, const PredictorConfig& cfg = {});

// Rule order: near_boundary (|delta_hat| < eps), immediate (delta_raw > 0),
// stable_B (denominator < 0 and delta_raw < 0), delayed.
TimingClass classify_timing(const AlignmentReport& alignment, double denominator, double epsilon_boundary);

struct AttractorReport {
    AttractorClass kind = AttractorClass::kDAbsorbing;
    bool degenerate = false;  // B == D
};

AttractorReport attractor_class(const BasinSet& basins);

struct SteerResult {
    TippingPrediction before;
    TippingPrediction after;
    std::optional<std::int64_t> delta_n_star;  // absent when either side is stable
};

SteerResult steer(const Conversation& conv, std::span<const Entry> injected, const BasinSet& basins,
                  const PredictorConfig& cfg = {});

// [B.(D - B)] / [(P - B).(B - D)]. Throws DegenerateGeometry when the
// denominator is zero.
double multilayer_threshold(const EmbeddingVector& probe, const BasinSet& basins);

std::string prediction_json(const TippingPrediction& p);
std::string prediction_csv_header();
std::string prediction_csv_row(const TippingPrediction& p);

} // namespace tipping

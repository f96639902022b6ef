#pragma once

// Scalar reduction of the B/D competition: the effective force
// f = c.B - c.D and the logistic map x <- r x (1 - x) with period
// detection, bifurcation scans and B/D symbolization.

#include "tipping/geometry.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace tipping {

double effective_force(const EmbeddingVector& context, const BasinSet& basins);

inline constexpr int kDefaultTransient = 1000;
inline constexpr int kDefaultSamples = 256;
// Scans sit next to flip bifurcations where convergence is slow; a longer
// transient keeps detected thresholds within 0.01 of the analytic ones.
inline constexpr int kDefaultScanTransient = 20000;
inline constexpr int kMaxPeriod = 64;
inline constexpr double kPeriodTolerance = 1e-6;

struct LogisticOrbit {
    double r = 0.0;
    double x0 = 0.0;
    int transient = 0;
    std::vector<double> samples;
    std::optional<int> period;  // nullopt = aperiodic
};

// Smallest k in [1, max_period] with |s[i+k] - s[i]| <= tol for all i.
std::optional<int> detect_period(std::span<const double> samples, double tolerance = kPeriodTolerance,
                                 int max_period = kMaxPeriod);

LogisticOrbit orbit(double x0, double r, int samples = kDefaultSamples, int transient = kDefaultTransient);

struct ScanPoint {
    double r = 0.0;
    std::vector<double> attractor;  // distinct samples (one cycle when periodic)
    std::optional<int> period;
};

struct PeriodDoubling {
    int from_period = 0;  // p -> 2p
    double r = 0.0;       // midpoint between the last p sample and the first 2p sample
};

struct BifurcationScan {
    std::vector<ScanPoint> points;
    std::vector<PeriodDoubling> doublings;  // at most the first two
};

BifurcationScan bifurcation_scan(double r_min, double r_max, int r_steps, double x0 = 0.5,
                                 int transient = kDefaultScanTransient, int samples = kDefaultSamples);

// CSV: r,sample,period (one row per attractor sample; period empty when aperiodic)
std::string scan_csv(const BifurcationScan& scan);

struct SymbolPattern {
    std::string symbols;               // one char per sample: 'D' if sample > threshold else 'B'
    std::optional<std::string> block;  // minimal repeating block, rotated to its smallest rotation

    // e.g. "BDBD…" for block "BD"
    std::string display() const;
};

SymbolPattern symbolize(const LogisticOrbit& orbit, double threshold);

// Monotone piecewise-linear map from MLP gain to the logistic parameter.
class GainCalibration {
public:
    static GainCalibration identity() { return GainCalibration(); }
    // Throws InvalidArgument unless gains strictly increase and r values are
    // monotone (non-decreasing).
    static GainCalibration from_table(std::vector<std::pair<double, double>> table);

    struct Result {
        double r = 0.0;
        bool clamped = false;
    };
    Result map(double gain) const;

private:
    GainCalibration() = default;
    std::vector<std::pair<double, double>> table_;
};

} // namespace tipping

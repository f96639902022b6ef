#pragma once

// Streaming tipping monitor. Consumes externally supplied per-token context
// embeddings, keeps the tipping-point numerator as a running sum over a
// bounded window and raises alert levels. Each push costs two d-length dot
// products (token.B, token.D) plus O(1) scalar work.

#include "tipping/geometry.hpp"
#include "tipping/predictor.hpp"

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <string>

namespace tipping {

enum class AlertLevel { kOk, kApproaching, kTipped, kUnreliable };

std::string to_string(AlertLevel level);

enum class MonitorMode {
    kPerToken,  // first-hit rule on the latest token embedding
    kPooled,    // first-hit rule on the running mean of the window
};

struct MonitorConfig {
    std::int64_t n_star_threshold = 0;  // approaching when n* <= threshold
    double epsilon_boundary = 0.01;
    double t_eff = 1.0;
    std::size_t window = 300;
    MonitorMode mode = MonitorMode::kPerToken;

    void validate() const;
};

struct AlertStatus {
    AlertLevel level = AlertLevel::kOk;
    std::optional<NStar> n_star;  // nullopt before any token (undefined)
    double delta_hat = 0.0;
    std::uint64_t tokens = 0;

    friend bool operator==(const AlertStatus&, const AlertStatus&) = default;
};

class TippingMonitor {
public:
    // Requires B and D. A stable-B geometry (B.D < B.B) is accepted and then
    // reports n* = stable; an exactly degenerate one (B.D == B.B) leaves n*
    // undefined.
    TippingMonitor(const BasinSet& basins, const MonitorConfig& cfg = {});

    // Throws DimensionError on mismatch. A zero vector is a null token: it
    // leaves the numerator and the status unchanged.
    const AlertStatus& push(const EmbeddingVector& token);

    AlertStatus status() const { return status_; }
    void reset();

    const MonitorConfig& config() const noexcept { return cfg_; }
    double running_numerator() const noexcept { return sum_ + compensation_; }
    std::optional<double> cached_denominator() const noexcept { return denominator_; }
    bool stable_mode() const noexcept { return denominator_ && *denominator_ < 0.0; }
    std::size_t window_size() const noexcept { return window_.size(); }

private:
    struct Term {
        double to_good = 0.0;
        double to_bad = 0.0;
        double numerator = 0.0;
    };

    void accumulate(double x);
    void resum();

    EmbeddingVector good_;
    EmbeddingVector bad_;
    MonitorConfig cfg_;
    std::optional<double> denominator_;
    double basin_scale_ = 0.0;  // max |B.B|, |D.D|, |B.D|
    double sum_ = 0.0;
    double compensation_ = 0.0;
    double pooled_good_ = 0.0;
    double pooled_bad_ = 0.0;
    std::size_t evictions_ = 0;
    std::deque<Term> window_;
    AlertStatus status_;
};

// Line-oriented stream: input {"t": int, "embedding": [...]}, output
// {"t", "level", "n_star", "delta_hat"} per input line. n_star is an integer,
// "stable", or null when undefined. Returns true when the stream tipped.
bool run_monitor_stream(TippingMonitor& monitor, std::istream& in, std::ostream& out,
                        const std::string& source = "<stream>");

std::string status_json(std::int64_t t, const AlertStatus& status);

} // namespace tipping

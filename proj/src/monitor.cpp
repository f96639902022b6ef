#include "tipping/monitor.hpp"

#include "json_util.hpp"
#include "tipping/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

namespace tipping {

std::string to_string(AlertLevel level) {
    switch (level) {
    case AlertLevel::kOk: return "ok";
    case AlertLevel::kApproaching: return "approaching";
    case AlertLevel::kTipped: return "tipped";
    case AlertLevel::kUnreliable: return "unreliable";
    }
    return "unknown";
}

void MonitorConfig::validate() const {
    if (n_star_threshold < 0) {
        throw InvalidArgument("n_star_threshold must be non-negative");
    }
    if (!(epsilon_boundary >= 0.0) || !std::isfinite(epsilon_boundary)) {
        throw InvalidArgument("epsilon_boundary must be a finite non-negative number");
    }
    if (!(t_eff > 0.0) || !std::isfinite(t_eff)) {
        throw InvalidArgument("t_eff must be positive");
    }
    if (window == 0) {
        throw InvalidArgument("window must be positive");
    }
}

TippingMonitor::TippingMonitor(const BasinSet& basins, const MonitorConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    basins.require_tipping_pair();
    good_ = basins.good();
    bad_ = basins.bad();
    try {
        denominator_ = tipping_denominator(good_, bad_, cfg_.t_eff);
    } catch (const DegenerateGeometry&) {
        denominator_.reset();
    }
    basin_scale_ = std::max({std::abs(dot(good_, good_)), std::abs(dot(bad_, bad_)), std::abs(dot(good_, bad_))});
}

// Neumaier compensated summation.
void TippingMonitor::accumulate(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        compensation_ += (sum_ - t) + x;
    } else {
        compensation_ += (x - t) + sum_;
    }
    sum_ = t;
}

// Rebuild the sums from the retained terms so eviction error cannot drift.
void TippingMonitor::resum() {
    sum_ = 0.0;
    compensation_ = 0.0;
    pooled_good_ = 0.0;
    pooled_bad_ = 0.0;
    for (const auto& term : window_) {
        accumulate(term.numerator);
        pooled_good_ += term.to_good;
        pooled_bad_ += term.to_bad;
    }
}

const AlertStatus& TippingMonitor::push(const EmbeddingVector& token) {
    if (token.dimension() != good_.dimension()) {
        throw DimensionError(token.dimension(), good_.dimension());
    }
    const double to_good = dot(token, good_);
    const double to_bad = dot(token, bad_);
    if (token.is_zero()) {
        return status_;
    }

    const Term term{to_good, to_bad, (to_good - to_bad) * std::exp(to_good / cfg_.t_eff)};
    window_.push_back(term);
    accumulate(term.numerator);
    pooled_good_ += to_good;
    pooled_bad_ += to_bad;
    if (window_.size() > cfg_.window) {
        const Term old = window_.front();
        window_.pop_front();
        accumulate(-old.numerator);
        pooled_good_ -= old.to_good;
        pooled_bad_ -= old.to_bad;
        if (++evictions_ % cfg_.window == 0) {
            resum();
        }
    }

    AlertStatus next;
    next.tokens = status_.tokens + 1;
    const double scale = std::max({basin_scale_, std::abs(to_good), std::abs(to_bad)});
    next.delta_hat = scale > 0.0 ? (to_bad - to_good) / scale : 0.0;
    if (denominator_) {
        next.n_star = *denominator_ < 0.0 ? NStar::stable() : n_star_from_raw(running_numerator() / *denominator_);
    }

    bool tipped_now = false;
    if (cfg_.mode == MonitorMode::kPerToken) {
        tipped_now = to_bad >= to_good;
    } else {
        // Same sign as mean.D - mean.B.
        tipped_now = pooled_bad_ >= pooled_good_;
    }

    if (status_.level == AlertLevel::kTipped || tipped_now) {
        next.level = AlertLevel::kTipped;
    } else if (next.n_star && !next.n_star->is_stable() && next.n_star->value() <= cfg_.n_star_threshold) {
        next.level = AlertLevel::kApproaching;
    } else if (std::abs(next.delta_hat) < cfg_.epsilon_boundary) {
        next.level = AlertLevel::kUnreliable;
    } else {
        next.level = AlertLevel::kOk;
    }
    status_ = next;
    return status_;
}

void TippingMonitor::reset() {
    sum_ = 0.0;
    compensation_ = 0.0;
    pooled_good_ = 0.0;
    pooled_bad_ = 0.0;
    evictions_ = 0;
    window_.clear();
    status_ = AlertStatus{};
}

std::string status_json(std::int64_t t, const AlertStatus& status) {
    detail::json doc{{"t", t}, {"level", to_string(status.level)}, {"delta_hat", status.delta_hat}};
    if (!status.n_star) {
        doc["n_star"] = nullptr;
    } else if (status.n_star->is_stable()) {
        doc["n_star"] = "stable";
    } else {
        doc["n_star"] = status.n_star->value();
    }
    return doc.dump();
}

bool run_monitor_stream(TippingMonitor& monitor, std::istream& in, std::ostream& out, const std::string& source) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = source + ":" + std::to_string(lineno);
        const auto doc = detail::parse_json_text(line, where);
        const auto& t = detail::require_field(doc, "t", where);
        if (!t.is_number_integer()) {
            throw FormatError(where + "/t", "must be an integer");
        }
        const auto embedding = detail::read_vector(detail::require_field(doc, "embedding", where), where + "/embedding");
        const auto& status = monitor.push(embedding);
        out << status_json(t.get<std::int64_t>(), status) << '\n';
    }
    return monitor.status().level == AlertLevel::kTipped;
}

} // namespace tipping

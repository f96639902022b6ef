#include "tipping/logistic.hpp"

#include "tipping/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace tipping {

double effective_force(const EmbeddingVector& context, const BasinSet& basins) {
    basins.require_tipping_pair();
    return dot(context, basins.good()) - dot(context, basins.bad());
}

std::optional<int> detect_period(std::span<const double> samples, double tolerance, int max_period) {
    const auto n = static_cast<int>(samples.size());
    for (int k = 1; k <= max_period && k < n; ++k) {
        bool match = true;
        for (int i = 0; i + k < n; ++i) {
            if (std::abs(samples[static_cast<std::size_t>(i + k)] - samples[static_cast<std::size_t>(i)]) > tolerance) {
                match = false;
                break;
            }
        }
        if (match) {
            return k;
        }
    }
    return std::nullopt;
}

LogisticOrbit orbit(double x0, double r, int samples, int transient) {
    if (!(x0 >= 0.0 && x0 <= 1.0)) {
        throw InvalidArgument("x0 must lie in [0, 1]");
    }
    if (!(r >= 0.0 && r <= 4.0)) {
        throw InvalidArgument("r must lie in [0, 4]");
    }
    if (samples < 1 || transient < 0) {
        throw InvalidArgument("need samples >= 1 and transient >= 0");
    }
    LogisticOrbit out{r, x0, transient, {}, std::nullopt};
    double x = x0;
    for (int i = 0; i < transient; ++i) {
        x = r * x * (1.0 - x);
    }
    out.samples.reserve(static_cast<std::size_t>(samples));
    for (int i = 0; i < samples; ++i) {
        x = r * x * (1.0 - x);
        out.samples.push_back(x);
    }
    out.period = detect_period(out.samples);
    return out;
}

BifurcationScan bifurcation_scan(double r_min, double r_max, int r_steps, double x0, int transient, int samples) {
    if (!(r_min >= 0.0 && r_min < r_max && r_max <= 4.0)) {
        throw InvalidArgument("need 0 <= r_min < r_max <= 4");
    }
    if (r_steps < 2) {
        throw InvalidArgument("r_steps must be >= 2");
    }
    BifurcationScan scan;
    scan.points.reserve(static_cast<std::size_t>(r_steps));
    for (int i = 0; i < r_steps; ++i) {
        const double r = r_min + (r_max - r_min) * i / (r_steps - 1);
        auto o = orbit(x0, r, samples, transient);
        ScanPoint point{r, {}, o.period};
        const std::size_t keep = o.period ? static_cast<std::size_t>(*o.period) : o.samples.size();
        point.attractor.assign(o.samples.begin(), o.samples.begin() + static_cast<std::ptrdiff_t>(keep));
        std::sort(point.attractor.begin(), point.attractor.end());
        scan.points.push_back(std::move(point));
    }

    const ScanPoint* last_periodic = nullptr;
    for (const auto& p : scan.points) {
        if (!p.period) {
            continue;
        }
        if (last_periodic && *p.period == 2 * *last_periodic->period && scan.doublings.size() < 2) {
            scan.doublings.push_back(PeriodDoubling{*last_periodic->period, 0.5 * (last_periodic->r + p.r)});
        }
        last_periodic = &p;
    }
    return scan;
}

std::string scan_csv(const BifurcationScan& scan) {
    std::string out = "r,sample,period\n";
    for (const auto& p : scan.points) {
        const std::string period = p.period ? std::to_string(*p.period) : "";
        for (double x : p.attractor) {
            out += fmt::format("{:.6g},{:.6g},{}\n", p.r, x, period);
        }
    }
    return out;
}

std::string SymbolPattern::display() const {
    if (!block) {
        return symbols;
    }
    return *block + *block + "\xE2\x80\xA6";
}

SymbolPattern symbolize(const LogisticOrbit& orbit, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw InvalidArgument("threshold must lie in (0, 1)");
    }
    SymbolPattern out;
    out.symbols.reserve(orbit.samples.size());
    for (double x : orbit.samples) {
        out.symbols.push_back(x > threshold ? 'D' : 'B');
    }
    if (orbit.period) {
        const auto p = static_cast<std::size_t>(*orbit.period);
        std::string block = out.symbols.substr(0, p);
        // Shrink to the minimal repeat (symbols can repeat faster than values).
        for (std::size_t k = 1; k <= p; ++k) {
            if (p % k != 0) continue;
            bool repeats = true;
            for (std::size_t i = k; i < p && repeats; ++i) {
                repeats = block[i] == block[i - k];
            }
            if (repeats) {
                block = block.substr(0, k);
                break;
            }
        }
        std::string best = block;
        for (std::size_t i = 1; i < block.size(); ++i) {
            best = std::min(best, block.substr(i) + block.substr(0, i));
        }
        out.block = best;
    }
    return out;
}

GainCalibration GainCalibration::from_table(std::vector<std::pair<double, double>> table) {
    if (table.empty()) {
        throw InvalidArgument("calibration table is empty");
    }
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (!(table[i].first > table[i - 1].first)) {
            throw InvalidArgument("calibration gains must strictly increase");
        }
    }
    const bool up = std::is_sorted(table.begin(), table.end(), [](auto& a, auto& b) { return a.second < b.second; });
    const bool down = std::is_sorted(table.begin(), table.end(), [](auto& a, auto& b) { return a.second > b.second; });
    if (!up && !down) {
        throw InvalidArgument("calibration table is not monotone");
    }
    GainCalibration cal;
    cal.table_ = std::move(table);
    return cal;
}

GainCalibration::Result GainCalibration::map(double gain) const {
    if (table_.empty()) {
        return {gain, false};
    }
    if (gain <= table_.front().first) {
        return {table_.front().second, gain < table_.front().first};
    }
    if (gain >= table_.back().first) {
        return {table_.back().second, gain > table_.back().first};
    }
    const auto hi = std::upper_bound(table_.begin(), table_.end(), gain,
                                     [](double g, const auto& entry) { return g < entry.first; });
    const auto lo = hi - 1;
    const double t = (gain - lo->first) / (hi->first - lo->first);
    return {lo->second + t * (hi->second - lo->second), false};
}

} // namespace tipping

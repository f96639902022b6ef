#include "json_util.hpp"
#include "tipping/errors.hpp"
#include "tipping/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tipping {
namespace {

using detail::json;

std::string num(double x) { return fmt::format("{:.6g}", x); }

std::string obs_text(const ObservedTip& t) { return t ? std::to_string(*t) : "no-D"; }

// Quoted CSV field; line breaks become spaces so each record stays on one line.
std::string csv_field(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
    if (s.find_first_of(",\"") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c;
        if (c == '"') out += '"';
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line, const std::string& where) {
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c != '"') {
                out.back() += c;
            } else if (i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else {
                quoted = false;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else {
            out.back() += c;
        }
    }
    if (quoted) {
        throw FormatError(where, "unterminated quoted field");
    }
    return out;
}

ObservedTip parse_obs(const std::string& s, const std::string& where) {
    if (s == "no-D") {
        return std::nullopt;
    }
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size() || v < 0) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where, "expected a non-negative integer or 'no-D', got '" + s + "'");
    }
}

double parse_double(const std::string& s, const std::string& where) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw FormatError(where, "expected a number, got '" + s + "'");
    }
}

TimingClass parse_timing(const std::string& s, const std::string& where) {
    for (auto c : {TimingClass::kImmediate, TimingClass::kDelayed, TimingClass::kStableB, TimingClass::kNearBoundary}) {
        if (to_string(c) == s) return c;
    }
    throw FormatError(where, "unknown timing class '" + s + "'");
}

json interval_json(const Interval& i) { return json::array({i.lower, i.upper}); }

// Minimal SVG builder.
class Svg {
public:
    Svg(double w, double h) : width_(w), height_(h) {}

    void rect(double x, double y, double w, double h, const std::string& fill) {
        body_ << fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n", num(x), num(y),
                             num(w), num(h), fill);
    }
    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0) {
        body_ << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
                             num(x1), num(y1), num(x2), num(y2), stroke, num(width));
    }
    void circle(double cx, double cy, double r, const std::string& fill) {
        body_ << fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", num(cx), num(cy), num(r), fill);
    }
    void path(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
        if (pts.empty()) return;
        body_ << "<path fill=\"none\" stroke=\"" << stroke << "\" d=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            body_ << (i == 0 ? "M" : " L") << num(pts[i].first) << ' ' << num(pts[i].second);
        }
        body_ << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, const std::string& anchor = "middle") {
        body_ << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" font-family=\"sans-serif\" "
                             "text-anchor=\"{}\">{}</text>\n",
                             num(x), num(y), anchor, s);
    }
    std::string str() const {
        return fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
                           "viewBox=\"0 0 {} {}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
                           num(width_), num(height_), num(width_), num(height_), body_.str());
    }

private:
    double width_;
    double height_;
    std::ostringstream body_;
};

} // namespace

std::string results_csv_header() {
    return "prompt,geometry,temperature,seed,control,n_star_pred,raw_value,n_star_obs_tok,n_star_obs_sent,"
           "timing_class,delta_hat,agree_tok,agree_sent,error\n";
}

std::string results_csv(const std::vector<ResultRecord>& records) {
    std::string out = results_csv_header();
    for (const auto& r : records) {
        const std::string sent = r.n_star_obs_sent ? obs_text(*r.n_star_obs_sent) : "";
        const std::string agree_sent = r.agree_sent ? (*r.agree_sent ? "1" : "0") : "";
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_field(r.prompt), csv_field(r.geometry), num(r.temperature),
                           r.seed, r.control ? 1 : 0, r.n_star_pred.to_string(), num(r.raw_value),
                           obs_text(r.n_star_obs_tok), sent, to_string(r.timing_class), num(r.delta_hat),
                           r.agree_tok ? 1 : 0, agree_sent, csv_field(r.error));
    }
    return out;
}

std::vector<ResultRecord> parse_results_csv(std::string_view text, const std::string& source) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line + "\n" != results_csv_header()) {
        throw FormatError(source + ":1", "missing or unexpected results header");
    }
    std::vector<ResultRecord> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        const auto f = split_csv(line, where);
        if (f.size() != 14) {
            throw FormatError(where, "expected 14 fields, got " + std::to_string(f.size()));
        }
        ResultRecord r;
        r.prompt = f[0];
        r.geometry = f[1];
        r.temperature = parse_double(f[2], where + "/temperature");
        r.seed = static_cast<std::uint64_t>(parse_double(f[3], where + "/seed"));
        r.control = f[4] == "1";
        if (f[5] == "stable") {
            r.n_star_pred = NStar::stable();
        } else {
            const auto v = parse_obs(f[5], where + "/n_star_pred");
            if (!v) throw FormatError(where + "/n_star_pred", "expected an integer or 'stable'");
            r.n_star_pred = NStar::count(*v);
        }
        r.raw_value = parse_double(f[6], where + "/raw_value");
        r.n_star_obs_tok = parse_obs(f[7], where + "/n_star_obs_tok");
        if (!f[8].empty()) r.n_star_obs_sent = parse_obs(f[8], where + "/n_star_obs_sent");
        r.timing_class = parse_timing(f[9], where + "/timing_class");
        r.delta_hat = parse_double(f[10], where + "/delta_hat");
        r.agree_tok = f[11] == "1";
        if (!f[12].empty()) r.agree_sent = f[12] == "1";
        r.error = f[13];
        out.push_back(std::move(r));
    }
    return out;
}

std::string summary_csv(const ComparisonSummary& s) {
    std::string out = "bin,predicted,observed,total,pred_lower,pred_upper,obs_lower,obs_upper,overlap\n";
    for (const auto& b : s.bins) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", b.name, b.predicted, b.observed, s.total,
                           num(b.predicted_ci.lower), num(b.predicted_ci.upper), num(b.observed_ci.lower),
                           num(b.observed_ci.upper), b.overlap ? 1 : 0);
    }
    return out;
}

std::string summary_json(const ComparisonSummary& s) {
    json bins = json::array();
    for (const auto& b : s.bins) {
        bins.push_back({{"bin", b.name},
                        {"predicted", b.predicted},
                        {"observed", b.observed},
                        {"predicted_ci", interval_json(b.predicted_ci)},
                        {"observed_ci", interval_json(b.observed_ci)},
                        {"overlap", b.overlap}});
    }
    json doc{{"total", s.total},
             {"controls", s.controls},
             {"failed", s.failed},
             {"bins", bins},
             {"agreements", s.agreements},
             {"agreement_rate", s.agreement_rate},
             {"agreement_ci", interval_json(s.agreement_ci)},
             {"p_value_one_sided", s.p_value},
             {"baseline",
              {{"model_hits", s.baseline.model_hits},
               {"baseline_hits", s.baseline.baseline_hits},
               {"model_accuracy", s.baseline.model_accuracy},
               {"baseline_accuracy", s.baseline.baseline_accuracy}}},
             {"confusion",
              {{"tp", s.confusion.true_positive},
               {"fp", s.confusion.false_positive},
               {"fn", s.confusion.false_negative},
               {"tn", s.confusion.true_negative}}},
             {"all_bins_overlap", s.all_bins_overlap}};
    return doc.dump(2) + "\n";
}

std::string histogram_svg(const ComparisonSummary& s) {
    const double w = 520;
    const double h = 320;
    const double left = 50;
    const double bottom = h - 40;
    const double top = 30;
    const double plot_h = bottom - top;
    Svg svg(w, h);
    svg.text(w / 2, 18, "predicted vs observed tipping points (fraction per bin, 95% exact CI)");
    svg.line(left, bottom, w - 10, bottom, "black");
    svg.line(left, bottom, left, top, "black");
    for (int tick = 0; tick <= 4; ++tick) {
        const double y = bottom - plot_h * tick / 4.0;
        svg.line(left - 4, y, left, y, "black");
        svg.text(left - 8, y + 4, num(tick / 4.0), "end");
    }
    const double slot = (w - left - 10) / kBinCount;
    const double bar = slot * 0.3;
    auto y_of = [&](double frac) { return bottom - plot_h * frac; };
    for (std::size_t i = 0; i < s.bins.size(); ++i) {
        const auto& b = s.bins[i];
        const double x0 = left + slot * static_cast<double>(i) + slot * 0.15;
        const double fp = static_cast<double>(b.predicted) / s.total;
        const double fo = static_cast<double>(b.observed) / s.total;
        svg.rect(x0, y_of(fp), bar, bottom - y_of(fp), "#4a78b5");
        svg.rect(x0 + bar + 4, y_of(fo), bar, bottom - y_of(fo), "#d1603d");
        const double cp = x0 + bar / 2;
        const double co = x0 + bar + 4 + bar / 2;
        svg.line(cp, y_of(b.predicted_ci.lower), cp, y_of(b.predicted_ci.upper), "black");
        svg.line(co, y_of(b.observed_ci.lower), co, y_of(b.observed_ci.upper), "black");
        svg.text(x0 + bar + 2, bottom + 16, b.name);
    }
    svg.rect(w - 150, top, 10, 10, "#4a78b5");
    svg.text(w - 135, top + 9, "predicted", "start");
    svg.rect(w - 150, top + 16, 10, 10, "#d1603d");
    svg.text(w - 135, top + 25, "observed", "start");
    return svg.str();
}

std::optional<std::string> trajectory_svg(const std::vector<ResultRecord>& records) {
    const ResultRecord* chosen = nullptr;
    for (const auto& r : records) {
        if (!r.trajectory.empty() && r.good && r.bad) {
            chosen = &r;
            break;
        }
    }
    if (!chosen) {
        return std::nullopt;
    }
    double extent = 0.0;
    auto grow = [&](const EmbeddingVector& v) { extent = std::max({extent, std::abs(v[0]), std::abs(v[1])}); };
    grow(*chosen->good);
    grow(*chosen->bad);
    for (const auto& v : chosen->prompt_vectors) grow(v);
    for (const auto& v : chosen->trajectory) grow(v);
    extent = extent > 0.0 ? extent * 1.15 : 1.0;

    const double size = 420;
    const double half = size / 2;
    auto px = [&](const EmbeddingVector& v) {
        return std::pair{half + v[0] / extent * (half - 20), half - v[1] / extent * (half - 20)};
    };
    Svg svg(size, size);
    svg.text(half, 16, "context vector path: " + chosen->prompt + " / " + chosen->geometry);
    svg.line(20, half, size - 20, half, "#bbbbbb");
    svg.line(half, 20, half, size - 20, "#bbbbbb");
    const auto [bx, by] = px(*chosen->good);
    const auto [dx, dy] = px(*chosen->bad);
    svg.line(half, half, bx, by, "#2f8f46", 2);
    svg.text(bx + 8, by, "B", "start");
    svg.line(half, half, dx, dy, "#c0392b", 2);
    svg.text(dx + 8, dy, "D", "start");
    for (const auto& v : chosen->prompt_vectors) {
        const auto [x, y] = px(v);
        svg.circle(x, y, 4, "#555555");
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& v : chosen->trajectory) {
        pts.push_back(px(v));
    }
    svg.path(pts, "#4a78b5");
    for (const auto& [x, y] : pts) {
        svg.circle(x, y, 2, "#4a78b5");
    }
    return svg.str();
}

std::vector<std::string> emit_report(const ComparisonSummary& summary, const std::vector<ResultRecord>& records,
                                     const ExperimentOutputs& outputs) {
    std::vector<std::string> notices;
    if (outputs.results_csv) {
        detail::write_text_file(*outputs.results_csv, results_csv(records));
    }
    if (outputs.summary_csv) {
        detail::write_text_file(*outputs.summary_csv, summary_csv(summary));
    }
    if (outputs.summary_json) {
        detail::write_text_file(*outputs.summary_json, summary_json(summary));
    }
    if (outputs.histogram_svg) {
        if (summary.bins.empty()) {
            notices.push_back("histogram skipped: no comparable records");
        } else {
            detail::write_text_file(*outputs.histogram_svg, histogram_svg(summary));
        }
    }
    if (outputs.trajectory_svg) {
        if (const auto svg = trajectory_svg(records)) {
            detail::write_text_file(*outputs.trajectory_svg, *svg);
        } else {
            notices.push_back("trajectory plot skipped: needs a two-dimensional geometry");
        }
    }
    return notices;
}

} // namespace tipping

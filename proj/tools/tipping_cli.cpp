// tipping: command-line front end for the tipping-point toolkit.
//
// Exit codes: 0 ok, 1 usage or configuration error, 2 monitor tipped,
// 3 runtime failure.

#include "tipping/errors.hpp"
#include "tipping/experiments.hpp"
#include "tipping/kernels.hpp"
#include "tipping/logistic.hpp"
#include "tipping/monitor.hpp"
#include "tipping/multilayer.hpp"
#include "tipping/predictor.hpp"
#include "tipping/stats.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace tipping;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitTipped = 2;
constexpr int kExitRuntime = 3;

std::string num(double x) { return fmt::format("{:.6g}", x); }

struct Globals {
    std::uint64_t seed = 0;
    bool json_out = false;
    std::string kernel = "auto";
};

// Resolved configuration, one line on stderr per run.
class ConfigLine {
public:
    explicit ConfigLine(std::string command) : text_("config: command=" + std::move(command)) {}
    ConfigLine& add(const std::string& key, const std::string& value) {
        text_ += " " + key + "=" + value;
        return *this;
    }
    ConfigLine& add(const std::string& key, double value) { return add(key, num(value)); }
    ~ConfigLine() { std::cerr << text_ << '\n'; }

private:
    std::string text_;
};

std::string basins_path(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("TIPPING_BASINS"); env && *env) {
        return env;
    }
    throw InvalidArgument("no basin file: pass --basins or set TIPPING_BASINS");
}

// "A,C+,C+,A" or "[0.2,0.6],A". C+ and C- are shorthand for C_plus and C_minus.
std::vector<std::string> split_items(const std::string& text) {
    std::vector<std::string> items;
    std::string cur;
    int depth = 0;
    for (char c : text) {
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (c == ',' && depth == 0) {
            items.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (depth != 0) {
        throw InvalidArgument("unbalanced brackets in '" + text + "'");
    }
    items.push_back(cur);
    return items;
}

Conversation parse_conversation(const std::string& text, const BasinSet& basins) {
    std::vector<Entry> entries;
    int inline_count = 0;
    for (auto item : split_items(text)) {
        if (item.empty()) {
            throw InvalidArgument("empty entry in conversation '" + text + "'");
        }
        if (item.front() == '[') {
            json parsed;
            try {
                parsed = json::parse(item);
            } catch (const json::exception&) {
                throw InvalidArgument("bad vector literal '" + item + "'");
            }
            std::vector<double> values;
            for (const auto& v : parsed) {
                if (!v.is_number()) throw InvalidArgument("bad vector literal '" + item + "'");
                values.push_back(v.get<double>());
            }
            EmbeddingVector vec(std::move(values));
            if (vec.dimension() != basins.dimension()) {
                throw DimensionError(vec.dimension(), basins.dimension());
            }
            entries.push_back(Entry{"V" + std::to_string(inline_count++), std::move(vec)});
            continue;
        }
        if (item.size() > 1 && (item.back() == '+' || item.back() == '-')) {
            item = item.substr(0, item.size() - 1) + (item.back() == '+' ? "_plus" : "_minus");
        }
        entries.push_back(Entry{item, basins.centroid(item)});
    }
    return Conversation(std::move(entries));
}

std::string compact_symbols(const Conversation& prompt, const RolloutTrace& trace, std::size_t limit = 40) {
    std::string s;
    for (const auto& e : prompt.entries()) {
        s += e.label.size() == 1 ? e.label : "(" + e.label + ")";
    }
    const auto gen = trace.symbols();
    s += gen.substr(0, limit);
    if (gen.size() > limit) s += "…";
    return s;
}

json n_star_json(const NStar& n) { return n.is_stable() ? json("stable") : json(n.value()); }

PredictionMode parse_mode(const std::string& m) {
    return m == "equation" ? PredictionMode::kEquationOnPrompt : PredictionMode::kOneStepGate;
}

// ---- subcommands ---------------------------------------------------------

struct PredictOpts {
    std::string basins;
    std::string conv = "A";
    double t_eff = 1.0;
    double epsilon = 0.01;
    std::string mode = "gate";
};

int run_predict(const PredictOpts& o, const Globals& g) {
    const auto path = basins_path(o.basins);
    ConfigLine("predict").add("basins", path).add("conv", o.conv).add("t_eff", o.t_eff).add("epsilon", o.epsilon)
        .add("mode", o.mode).add("seed", std::to_string(g.seed));
    const auto basins = load_basin_file(path);
    const auto conv = parse_conversation(o.conv, basins);
    const auto p = tipping_point(conv, basins, {o.t_eff, o.epsilon, parse_mode(o.mode)});
    if (g.json_out) {
        std::cout << prediction_json(p) << '\n';
        return kExitOk;
    }
    std::cout << "n* = " << p.n_star.to_string() << '\n'
              << "raw = " << num(p.raw_value) << '\n'
              << "delta_raw = " << num(p.delta_raw) << '\n'
              << "delta_hat = " << num(p.delta_hat) << '\n'
              << "timing_class = " << to_string(p.timing_class) << '\n'
              << "reliable = " << (p.reliable ? "yes" : "no") << '\n'
              << "d_first = " << (p.d_first ? "yes" : "no") << '\n';
    return kExitOk;
}

struct RolloutOpts {
    std::string basins;
    std::string prompt = "A";
    int steps = 300;
    double t_eff = 1.0;
    double temperature = 0.0;
    std::string trace_out;
};

int run_rollout(const RolloutOpts& o, const Globals& g) {
    const auto path = basins_path(o.basins);
    ConfigLine("rollout").add("basins", path).add("prompt", o.prompt).add("steps", std::to_string(o.steps))
        .add("t_eff", o.t_eff).add("temperature", o.temperature).add("seed", std::to_string(g.seed));
    const auto basins = load_basin_file(path);
    const auto conv = parse_conversation(o.prompt, basins);
    DynamicsConfig cfg;
    cfg.t_eff = o.t_eff;
    cfg.decode_temperature = o.temperature;
    cfg.max_steps = o.steps;
    cfg.rng_seed = g.seed;
    const auto trace = rollout(conv, basins, cfg);
    if (!o.trace_out.empty()) {
        std::ofstream(o.trace_out) << trace_jsonl(trace);
    }
    if (g.json_out) {
        json doc{{"symbols", trace.symbols()},
                 {"first_hit", trace.first_hit ? json(*trace.first_hit) : json(nullptr)}};
        std::cout << doc.dump() << '\n';
        return kExitOk;
    }
    std::cout << "trace = " << compact_symbols(conv, trace) << '\n'
              << "first-hit = " << (trace.first_hit ? std::to_string(*trace.first_hit) : "none") << '\n';
    return kExitOk;
}

struct SteerOpts {
    std::string basins;
    std::string conv = "A";
    std::string inject = "C-,C-,A";
    double t_eff = 1.0;
    std::string mode = "gate";
};

int run_steer(const SteerOpts& o, const Globals& g) {
    const auto path = basins_path(o.basins);
    ConfigLine("steer").add("basins", path).add("conv", o.conv).add("inject", o.inject).add("t_eff", o.t_eff)
        .add("mode", o.mode).add("seed", std::to_string(g.seed));
    const auto basins = load_basin_file(path);
    const auto conv = parse_conversation(o.conv, basins);
    const auto injected = parse_conversation(o.inject, basins);
    const auto r = steer(conv, injected.entries(), basins, {o.t_eff, 0.01, parse_mode(o.mode)});
    if (g.json_out) {
        json doc{{"before", n_star_json(r.before.n_star)},
                 {"after", n_star_json(r.after.n_star)},
                 {"delta", r.delta_n_star ? json(*r.delta_n_star) : json(nullptr)}};
        std::cout << doc.dump() << '\n';
        return kExitOk;
    }
    std::cout << "n* before = " << r.before.n_star.to_string() << '\n'
              << "n* after = " << r.after.n_star.to_string() << '\n'
              << "delta = " << (r.delta_n_star ? std::to_string(*r.delta_n_star) : "undefined") << '\n';
    return kExitOk;
}

struct MultilayerOpts {
    std::string basins;
    std::string prompt = "A";
    std::string model;
    std::string save_model;
    int steps = 300;
    double t_eff = 1.0;
    std::size_t layers = 1;
    std::size_t heads = 1;
    std::size_t hidden = 8;
    double noise = 0.0;
    double mlp_scale = 0.1;
    std::vector<double> gains{0.0};
    bool ln = false;
    bool final_residual = false;
};

int run_multilayer(const MultilayerOpts& o, const Globals& g) {
    const auto path = o.model.empty() ? basins_path(o.basins) : o.model;
    ConfigLine cfg_line("multilayer");
    cfg_line.add(o.model.empty() ? "basins" : "model", path).add("prompt", o.prompt)
        .add("steps", std::to_string(o.steps)).add("readout", o.final_residual ? "final_residual" : "stream_update")
        .add("seed", std::to_string(g.seed));
    std::optional<ModelFile> file;
    BasinSet basins;
    if (!o.model.empty()) {
        file = load_model_file(o.model);
        basins = file->basins;
    } else {
        basins = load_basin_file(path);
        cfg_line.add("layers", std::to_string(o.layers)).add("heads", std::to_string(o.heads))
            .add("hidden", std::to_string(o.hidden)).add("noise", o.noise).add("mlp_scale", o.mlp_scale)
            .add("ln", o.ln ? "on" : "off").add("t_eff", o.t_eff);
    }
    const auto conv = parse_conversation(o.prompt, basins);
    const auto base = file ? file->model
                           : ToyTransformer::random(basins.dimension(), o.t_eff,
                                                    {o.layers, o.heads, o.hidden, o.noise, o.mlp_scale, 1.0, o.ln, g.seed});
    if (!o.save_model.empty()) {
        store_model_file(ModelFile{basins, base}, o.save_model);
    }
    const auto readout = o.final_residual ? Readout::kFinalResidual : Readout::kStreamUpdate;
    const std::vector<double> gains = file ? std::vector<double>{} : o.gains;
    json rows = json::array();
    auto report = [&](const std::string& tag, const ToyTransformer& model) {
        const auto trace = generate_symbols(conv, model, basins, o.steps, readout);
        const auto hit = trace.first_hit ? std::to_string(*trace.first_hit) : "none";
        if (g.json_out) {
            rows.push_back({{"gain", tag}, {"first_hit", trace.first_hit ? json(*trace.first_hit) : json(nullptr)},
                            {"symbols", trace.symbols()}});
        } else {
            std::cout << "gain " << tag << ": first-hit = " << hit << "  trace = " << compact_symbols(conv, trace)
                      << '\n';
        }
    };
    if (file) {
        report("file", base);
    }
    for (double gain : gains) {
        report(num(gain), base.with_mlp_gain(gain));
    }
    if (g.json_out) {
        std::cout << rows.dump() << '\n';
    }
    return kExitOk;
}

struct BifurcateOpts {
    double r_min = 2.8;
    double r_max = 3.6;
    int r_steps = 801;
    double x0 = 0.5;
    int transient = kDefaultScanTransient;
    int samples = kDefaultSamples;
    std::string out;
    std::optional<double> pattern_r;
};

int run_bifurcate(const BifurcateOpts& o, const Globals& g) {
    ConfigLine("bifurcate").add("r_min", o.r_min).add("r_max", o.r_max).add("r_steps", std::to_string(o.r_steps))
        .add("x0", o.x0).add("transient", std::to_string(o.transient)).add("samples", std::to_string(o.samples))
        .add("out", o.out.empty() ? "-" : o.out).add("seed", std::to_string(g.seed));
    const auto scan = bifurcation_scan(o.r_min, o.r_max, o.r_steps, o.x0, o.transient, o.samples);
    if (!o.out.empty()) {
        std::ofstream out(o.out);
        if (!out) throw Error("cannot write " + o.out);
        out << scan_csv(scan);
    }
    std::optional<SymbolPattern> pattern;
    if (o.pattern_r) {
        const auto orb = orbit(o.x0, *o.pattern_r, 64, o.transient);
        // Threshold at the unstable fixed point 1 - 1/r splits the 2-cycle.
        pattern = symbolize(orb, *o.pattern_r > 1.0 ? 1.0 - 1.0 / *o.pattern_r : 0.5);
    }
    if (g.json_out) {
        json doublings = json::array();
        for (const auto& d : scan.doublings) {
            doublings.push_back({{"from_period", d.from_period}, {"r", d.r}});
        }
        json doc{{"doublings", doublings}};
        if (pattern) doc["pattern"] = pattern->display();
        std::cout << doc.dump() << '\n';
        return kExitOk;
    }
    for (const auto& d : scan.doublings) {
        std::cout << "period " << d.from_period << " -> " << 2 * d.from_period << " at r = " << num(d.r) << '\n';
    }
    if (scan.doublings.empty()) {
        std::cout << "no period doubling in range\n";
    }
    if (pattern) {
        std::cout << "pattern = " << pattern->display() << '\n';
    }
    return kExitOk;
}

struct BootstrapOpts {
    std::string basins;
    std::string prompt = "A";
    int resamples = 200;
    double alpha = 0.05;
    double t_eff = 1.0;
    unsigned threads = 0;
};

int run_bootstrap(const BootstrapOpts& o, const Globals& g) {
    const auto path = basins_path(o.basins);
    ConfigLine("bootstrap").add("basins", path).add("prompt", o.prompt).add("resamples", std::to_string(o.resamples))
        .add("alpha", o.alpha).add("t_eff", o.t_eff).add("seed", std::to_string(g.seed));
    const auto basins = load_basin_file(path);
    std::map<Label, std::vector<EmbeddingVector>> phrases;
    for (const auto& [label, basin] : basins.basins()) {
        for (const auto& p : basin.phrases) {
            phrases[label].push_back(p.embedding);
        }
    }
    const auto conv = parse_conversation(o.prompt, basins);
    if (conv.size() != 1) {
        throw InvalidArgument("bootstrap takes a single prompt entry");
    }
    // The prompt itself is resampled when it is a basin with phrases.
    const auto prompt_vec = conv[0].vector;
    phrases.erase(conv[0].label);
    BootstrapConfig cfg;
    cfg.n_resamples = o.resamples;
    cfg.seed = g.seed;
    cfg.alpha = o.alpha;
    cfg.predictor.t_eff = o.t_eff;
    cfg.threads = o.threads;
    const auto r = bootstrap(phrases, prompt_vec, cfg);
    auto ci = [](const Interval& i) { return "[" + num(i.lower) + ", " + num(i.upper) + "]"; };
    if (g.json_out) {
        auto arr = [](const Interval& i) { return json::array({i.lower, i.upper}); };
        json doc{{"resamples", r.n_resamples},
                 {"delta_hat", arr(r.ci_delta_hat)},
                 {"delta_cos", arr(r.ci_delta_cos)},
                 {"n_star", arr(r.ci_n_star)},
                 {"spans_zero_delta_hat", r.spans_zero_delta_hat}};
        std::cout << doc.dump() << '\n';
        return kExitOk;
    }
    std::cout << "delta_hat CI = " << ci(r.ci_delta_hat) << (r.spans_zero_delta_hat ? " (spans zero)" : "") << '\n'
              << "delta_cos CI = " << ci(r.ci_delta_cos) << (r.spans_zero_delta_cos ? " (spans zero)" : "") << '\n'
              << "n* CI = " << ci(r.ci_n_star) << '\n';
    return kExitOk;
}

struct StatsOpts {
    int k = -1;
    int n = -1;
    double p0 = 0.5;
    bool two_sided = false;
    double alpha = 0.05;
    std::string sentences;
};

int run_stats(const StatsOpts& o, const Globals& g) {
    ConfigLine("stats").add("k", std::to_string(o.k)).add("n", std::to_string(o.n)).add("p0", o.p0)
        .add("sided", o.two_sided ? "two" : "one").add("alpha", o.alpha)
        .add("sentences", o.sentences.empty() ? "-" : o.sentences).add("seed", std::to_string(g.seed));
    json doc = json::object();
    if (o.k >= 0 || o.n >= 0) {
        if (o.k < 0 || o.n < 1) {
            throw InvalidArgument("--k and --n must be given together with 0 <= k <= n and n >= 1");
        }
        const double p = binomial_test(o.k, o.n, o.p0, o.two_sided ? Sided::kTwo : Sided::kOne);
        const auto cp = clopper_pearson(o.k, o.n, o.alpha);
        doc["p_value"] = p;
        doc["cp"] = json::array({cp.lower, cp.upper});
        if (!g.json_out) {
            std::cout << "p = " << num(p) << " (" << (o.two_sided ? "two" : "one") << "-sided)\n"
                      << "CP " << num(100 * (1 - o.alpha)) << "% = [" << num(cp.lower) << ", " << num(cp.upper)
                      << "]\n";
        }
    }
    if (!o.sentences.empty()) {
        std::ifstream in(o.sentences);
        if (!in) throw InvalidArgument("cannot open " + o.sentences);
        std::stringstream buf;
        buf << in.rdbuf();
        const auto labels = parse_sentence_labels(buf.str(), o.sentences);
        const auto hit = sentence_first_hit(labels);
        doc["sentence_first_hit"] = hit ? json(*hit) : json("no-D");
        if (!g.json_out) {
            std::cout << "sentence first-hit = " << (hit ? std::to_string(*hit) : "no-D") << '\n';
        }
    }
    if (doc.empty()) {
        throw InvalidArgument("nothing to do: pass --k/--n or --sentences");
    }
    if (g.json_out) {
        std::cout << doc.dump() << '\n';
    }
    return kExitOk;
}

struct MonitorOpts {
    std::string basins;
    std::string input = "-";
    std::string output = "-";
    std::int64_t threshold = 0;
    double epsilon = 0.01;
    double t_eff = 1.0;
    std::size_t window = 300;
    bool pooled = false;
};

int run_monitor(const MonitorOpts& o, const Globals& g) {
    const auto path = basins_path(o.basins);
    ConfigLine("monitor").add("basins", path).add("input", o.input).add("output", o.output)
        .add("threshold", std::to_string(o.threshold)).add("epsilon", o.epsilon).add("t_eff", o.t_eff)
        .add("window", std::to_string(o.window)).add("mode", o.pooled ? "pooled" : "per_token")
        .add("seed", std::to_string(g.seed));
    const auto basins = load_basin_file(path);
    MonitorConfig cfg;
    cfg.n_star_threshold = o.threshold;
    cfg.epsilon_boundary = o.epsilon;
    cfg.t_eff = o.t_eff;
    cfg.window = o.window;
    cfg.mode = o.pooled ? MonitorMode::kPooled : MonitorMode::kPerToken;
    TippingMonitor monitor(basins, cfg);

    std::ifstream fin;
    std::istream* in = &std::cin;
    if (o.input != "-") {
        fin.open(o.input);
        if (!fin) throw InvalidArgument("cannot open " + o.input);
        in = &fin;
    }
    std::ofstream fout;
    std::ostream* out = &std::cout;
    if (o.output != "-") {
        fout.open(o.output);
        if (!fout) throw Error("cannot write " + o.output);
        out = &fout;
    }
    const bool tipped = run_monitor_stream(monitor, *in, *out, o.input == "-" ? "<stdin>" : o.input);
    std::cerr << "monitor: " << monitor.status().tokens << " tokens, final level "
              << to_string(monitor.status().level) << '\n';
    return tipped ? kExitTipped : kExitOk;
}

struct ExperimentOpts {
    std::string spec;
    std::string out_dir;
    unsigned threads = 0;
};

void print_summary(const ComparisonSummary& s, bool as_json) {
    if (as_json) {
        std::cout << summary_json(s);
        return;
    }
    std::cout << "records = " << s.total << " (controls " << s.controls << ", failed " << s.failed << ")\n";
    if (s.total == 0) return;
    std::cout << "agreement (+-1) = " << s.agreements << "/" << s.total << " = " << num(s.agreement_rate)
              << "  CP95 [" << num(s.agreement_ci.lower) << ", " << num(s.agreement_ci.upper) << "]\n"
              << "baseline (n*=0) = " << s.baseline.baseline_hits << "/" << s.total << " = "
              << num(s.baseline.baseline_accuracy) << '\n'
              << "binomial p (one-sided) = " << num(s.p_value) << '\n';
    for (const auto& b : s.bins) {
        std::cout << "bin " << b.name << ": predicted " << b.predicted << ", observed " << b.observed
                  << (b.overlap ? "" : "  (CIs disjoint)") << '\n';
    }
}

std::optional<std::filesystem::path> redirect(const std::optional<std::filesystem::path>& p,
                                              const std::string& dir) {
    if (!p || dir.empty()) return p;
    return std::filesystem::path(dir) / p->filename();
}

int run_experiment_cmd(const ExperimentOpts& o, const Globals& g, bool seed_given) {
    auto spec = load_experiment_spec(o.spec);
    if (seed_given) {
        spec.seeds = {g.seed};
    }
    spec.threads = o.threads;
    auto& out = spec.outputs;
    out.results_csv = redirect(out.results_csv, o.out_dir);
    out.summary_csv = redirect(out.summary_csv, o.out_dir);
    out.summary_json = redirect(out.summary_json, o.out_dir);
    out.histogram_svg = redirect(out.histogram_svg, o.out_dir);
    out.trajectory_svg = redirect(out.trajectory_svg, o.out_dir);
    std::string seeds;
    for (auto s : spec.seeds) seeds += (seeds.empty() ? "" : ";") + std::to_string(s);
    ConfigLine("experiment").add("spec", o.spec).add("geometries", std::to_string(spec.geometries.size()))
        .add("prompts", std::to_string(spec.prompts.size())).add("t_eff", spec.t_eff)
        .add("max_steps", std::to_string(spec.max_steps)).add("seeds", seeds)
        .add("out_dir", o.out_dir.empty() ? "(spec)" : o.out_dir);
    const auto records = run_experiment(spec, [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });
    const auto summary = compare(records, spec.max_steps);
    for (const auto& notice : emit_report(summary, records, spec.outputs)) {
        std::cerr << "notice: " << notice << '\n';
    }
    if (!g.json_out) {
        for (const auto& r : records) {
            std::cout << r.prompt << " @ " << r.geometry << ": n*_pred = " << r.n_star_pred.to_string()
                      << ", n*_obs = " << (r.n_star_obs_tok ? std::to_string(*r.n_star_obs_tok) : "no-D")
                      << (r.error.empty() ? "" : "  error: " + r.error) << '\n';
        }
    }
    print_summary(summary, g.json_out);
    return kExitOk;
}

struct ReportOpts {
    std::string results;
    std::string summary_csv;
    std::string summary_json;
    std::string histogram_svg;
    int window = 300;
};

int run_report(const ReportOpts& o, const Globals& g) {
    ConfigLine("report").add("results", o.results).add("summary_csv", o.summary_csv.empty() ? "-" : o.summary_csv)
        .add("summary_json", o.summary_json.empty() ? "-" : o.summary_json)
        .add("histogram_svg", o.histogram_svg.empty() ? "-" : o.histogram_svg)
        .add("window", std::to_string(o.window)).add("seed", std::to_string(g.seed));
    std::ifstream in(o.results);
    if (!in) throw InvalidArgument("cannot open " + o.results);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto records = parse_results_csv(buf.str(), o.results);
    const auto summary = compare(records, o.window);
    ExperimentOutputs outputs;
    if (!o.summary_csv.empty()) outputs.summary_csv = o.summary_csv;
    if (!o.summary_json.empty()) outputs.summary_json = o.summary_json;
    if (!o.histogram_svg.empty()) outputs.histogram_svg = o.histogram_svg;
    for (const auto& notice : emit_report(summary, records, outputs)) {
        std::cerr << "notice: " << notice << '\n';
    }
    print_summary(summary, g.json_out);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tipping-point prediction, simulation and monitoring for attention dynamics", "tipping"};
    app.require_subcommand(1);
    Globals g;
    auto* seed_opt = app.add_option("--seed", g.seed, "Random seed (default 0)");
    app.add_flag("--json", g.json_out, "Machine-readable JSON output");
    app.add_option("--kernel", g.kernel, "Kernel ISA: auto, scalar, avx2, neon (default auto)");

    auto basins_opt = [](CLI::App* sub, std::string& target) {
        sub->add_option("--basins", target, "Basin file (default: $TIPPING_BASINS)");
    };

    PredictOpts predict;
    auto* p = app.add_subcommand("predict", "Closed-form tipping point for a conversation");
    basins_opt(p, predict.basins);
    p->add_option("--conv", predict.conv, "Conversation, e.g. A,C+,C+,A or [0.2,0.6] (default A)");
    p->add_option("--t-eff", predict.t_eff, "Attention temperature (default 1)");
    p->add_option("--epsilon", predict.epsilon, "Boundary threshold on |delta_hat| (default 0.01)");
    p->add_option("--mode", predict.mode, "gate (one-step gate) or equation (default gate)")
        ->check(CLI::IsMember({"gate", "equation"}));

    RolloutOpts roll;
    auto* r = app.add_subcommand("rollout", "Effective-head rollout with first-hit time");
    basins_opt(r, roll.basins);
    r->add_option("--prompt", roll.prompt, "Prompt conversation (default A)");
    r->add_option("--steps", roll.steps, "Generated symbols (default 300)")->check(CLI::PositiveNumber);
    r->add_option("--t-eff", roll.t_eff, "Attention temperature (default 1)");
    r->add_option("--temperature", roll.temperature, "Decode temperature, 0 = greedy (default 0)");
    r->add_option("--trace-out", roll.trace_out, "Write the step trace as JSON lines");

    SteerOpts st;
    auto* s = app.add_subcommand("steer", "Change in n* after injecting entries");
    basins_opt(s, st.basins);
    s->add_option("--conv", st.conv, "Base conversation (default A)");
    s->add_option("--inject", st.inject, "Entries appended to the conversation (default C-,C-,A)");
    s->add_option("--t-eff", st.t_eff, "Attention temperature (default 1)");
    s->add_option("--mode", st.mode, "gate or equation (default gate)")->check(CLI::IsMember({"gate", "equation"}));

    MultilayerOpts ml;
    auto* m = app.add_subcommand("multilayer", "Toy transformer generation over MLP gains");
    basins_opt(m, ml.basins);
    m->add_option("--model", ml.model, "Model file (basins plus weights); overrides the random model");
    m->add_option("--save-model", ml.save_model, "Write the model used to this file");
    m->add_option("--prompt", ml.prompt, "Prompt conversation (default A)");
    m->add_option("--steps", ml.steps, "Generated symbols (default 300)")->check(CLI::PositiveNumber);
    m->add_option("--t-eff", ml.t_eff, "Attention temperature (default 1)");
    m->add_option("--layers", ml.layers, "Layers (default 1)");
    m->add_option("--heads", ml.heads, "Heads per layer (default 1)");
    m->add_option("--hidden", ml.hidden, "MLP hidden width (default 8)");
    m->add_option("--noise", ml.noise, "Attention weight noise around identity (default 0)");
    m->add_option("--mlp-scale", ml.mlp_scale, "MLP output weight scale (default 0.1)");
    m->add_option("--gains", ml.gains, "MLP gains to sweep, comma separated (default 0)")->delimiter(',');
    m->add_flag("--ln", ml.ln, "Enable layer norm");
    m->add_flag("--final-residual", ml.final_residual, "Read out the final residual instead of the stream update");

    BifurcateOpts bif;
    auto* b = app.add_subcommand("bifurcate", "Logistic-map bifurcation scan");
    b->add_option("--r-min", bif.r_min, "Lower r (default 2.8)");
    b->add_option("--r-max", bif.r_max, "Upper r (default 3.6)");
    b->add_option("--r-steps", bif.r_steps, "Grid points (default 801)")->check(CLI::Range(2, 10000000));
    b->add_option("--x0", bif.x0, "Initial condition (default 0.5)");
    b->add_option("--transient", bif.transient, "Discarded iterations (default 20000)");
    b->add_option("--samples", bif.samples, "Recorded iterations (default 256)");
    b->add_option("--out", bif.out, "Write the scan as CSV");
    b->add_option("--pattern-r", bif.pattern_r, "Print the B/D symbol pattern of the orbit at this r");

    BootstrapOpts bs;
    auto* bo = app.add_subcommand("bootstrap", "Phrase-resampling confidence intervals");
    basins_opt(bo, bs.basins);
    bo->add_option("--prompt", bs.prompt, "Prompt basin label or vector (default A)");
    bo->add_option("--resamples", bs.resamples, "Resamples (default 200)")->check(CLI::PositiveNumber);
    bo->add_option("--alpha", bs.alpha, "Two-sided level (default 0.05)");
    bo->add_option("--t-eff", bs.t_eff, "Attention temperature (default 1)");
    bo->add_option("--threads", bs.threads, "Worker threads, 0 = all cores (default 0)");

    StatsOpts so;
    auto* sta = app.add_subcommand("stats", "Exact binomial test, Clopper-Pearson interval, sentence first-hit");
    sta->add_option("--k", so.k, "Successes");
    sta->add_option("--n", so.n, "Trials");
    sta->add_option("--p0", so.p0, "Null success probability (default 0.5)");
    sta->add_flag("--two-sided", so.two_sided, "Two-sided test (default one-sided upper tail)");
    sta->add_option("--alpha", so.alpha, "Interval level (default 0.05)");
    sta->add_option("--sentences", so.sentences, "Sentence labels as JSON lines");

    MonitorOpts mo;
    auto* mon = app.add_subcommand("monitor", "Stream monitor over per-token embeddings (exit 2 when tipped)");
    basins_opt(mon, mo.basins);
    mon->add_option("--input", mo.input, "Token stream as JSON lines, - for stdin (default -)");
    mon->add_option("--output", mo.output, "Status stream, - for stdout (default -)");
    mon->add_option("--threshold", mo.threshold, "Approaching when n* <= threshold (default 0)");
    mon->add_option("--epsilon", mo.epsilon, "Unreliable when |delta_hat| < epsilon (default 0.01)");
    mon->add_option("--t-eff", mo.t_eff, "Attention temperature (default 1)");
    mon->add_option("--window", mo.window, "Tracked tokens (default 300)");
    mon->add_flag("--pooled", mo.pooled, "First-hit rule on the running mean instead of the latest token");

    ExperimentOpts ex;
    auto* e = app.add_subcommand("experiment", "Run an experiment spec and write its report");
    e->add_option("--spec", ex.spec, "Experiment spec (JSON)")->required();
    e->add_option("--out-dir", ex.out_dir, "Write outputs here instead of the spec's paths");
    e->add_option("--threads", ex.threads, "Worker threads, 0 = all cores (default 0)");

    ReportOpts rep;
    auto* rp = app.add_subcommand("report", "Summarize a results CSV");
    rp->add_option("--results", rep.results, "Results CSV from experiment")->required();
    rp->add_option("--summary-csv", rep.summary_csv, "Write binned summary CSV");
    rp->add_option("--summary-json", rep.summary_json, "Write full summary JSON");
    rp->add_option("--histogram-svg", rep.histogram_svg, "Write histogram SVG");
    rp->add_option("--window", rep.window, "Observation window for the confusion matrix (default 300)");

    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        return app.exit(err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (g.kernel != "auto") {
            const auto isa = kernels::parse_isa(g.kernel);
            if (!isa) throw InvalidArgument("unknown kernel '" + g.kernel + "' (auto|scalar|avx2|neon)");
            kernels::select(*isa);
        }
        std::cerr << "config: kernel=" << kernels::to_string(kernels::active().isa) << '\n';
        if (*p) return run_predict(predict, g);
        if (*r) return run_rollout(roll, g);
        if (*s) return run_steer(st, g);
        if (*m) return run_multilayer(ml, g);
        if (*b) return run_bifurcate(bif, g);
        if (*bo) return run_bootstrap(bs, g);
        if (*sta) return run_stats(so, g);
        if (*mon) return run_monitor(mo, g);
        if (*e) return run_experiment_cmd(ex, g, seed_opt->count() > 0);
        if (*rp) return run_report(rep, g);
    } catch (const InvalidArgument& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitUsage;
    } catch (const DimensionError& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

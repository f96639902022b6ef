#include "tipping/experiments.hpp"

#include "json_util.hpp"
#include "tipping/errors.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <tuple>

namespace tipping {
namespace {

using detail::json;

bool usable_name(const std::string& name) {
    return !name.empty() && name.find_first_of(",\"\n\r") == std::string::npos;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::optional<std::filesystem::path> optional_path(const json& obj, const char* key, const std::filesystem::path& base) {
    if (!obj.contains(key) || obj.at(key).is_null()) {
        return std::nullopt;
    }
    return resolve(base, obj.at(key).get<std::string>());
}

Geometry read_geometry(const json& doc, const std::filesystem::path& base, const std::string& where) {
    Geometry g;
    if (doc.contains("basins")) {
        g.basins = detail::basin_set_from_json(doc, where);
        g.name = doc.contains("name") ? doc.at("name").get<std::string>() : "inline";
        return g;
    }
    const auto file = resolve(base, detail::require_field(doc, "basin_file", where).get<std::string>());
    g.basins = load_basin_file(file);
    g.name = doc.contains("name") ? doc.at("name").get<std::string>() : file.stem().string();
    return g;
}

PromptSpec read_prompt(const json& doc, const std::filesystem::path& base, const std::string& where) {
    PromptSpec p;
    p.name = detail::require_field(doc, "name", where).get<std::string>();
    if (doc.contains("labels")) {
        p.labels = doc.at("labels").get<std::vector<Label>>();
    }
    if (doc.contains("vectors")) {
        const auto& vs = doc.at("vectors");
        if (!vs.is_array()) {
            throw FormatError(where + "/vectors", "must be an array of vectors");
        }
        for (std::size_t i = 0; i < vs.size(); ++i) {
            p.vectors.push_back(detail::read_vector(vs[i], where + "/vectors/" + std::to_string(i)));
        }
    }
    if (p.labels.empty() == p.vectors.empty()) {
        throw FormatError(where, "exactly one of 'labels' or 'vectors' must be a non-empty list");
    }
    p.control = doc.value("control", false);
    if (doc.contains("geometry")) {
        p.geometry = doc.at("geometry").get<std::string>();
    }
    if (doc.contains("sentence_labels")) {
        const auto file = resolve(base, doc.at("sentence_labels").get<std::string>());
        p.sentence_labels = parse_sentence_labels(detail::read_text_file(file), file.string());
    }
    return p;
}

struct Cell {
    const PromptSpec* prompt;
    const Geometry* geometry;
    double temperature;
    std::uint64_t seed;
};

ResultRecord run_cell(const Cell& cell, const ExperimentSpec& spec) {
    ResultRecord r;
    r.prompt = cell.prompt->name;
    r.geometry = cell.geometry->name;
    r.temperature = cell.temperature;
    r.seed = cell.seed;
    r.control = cell.prompt->control;

    const auto& basins = cell.geometry->basins;
    const auto conv = cell.prompt->conversation(basins);
    const PredictorConfig pcfg{spec.t_eff, spec.epsilon_boundary, spec.mode};
    const auto pred = tipping_point(conv, basins, pcfg);
    r.n_star_pred = pred.n_star;
    r.raw_value = pred.raw_value;
    r.timing_class = pred.timing_class;
    r.delta_hat = pred.delta_hat;

    DynamicsConfig dcfg;
    dcfg.t_eff = spec.t_eff;
    dcfg.decode_temperature = cell.temperature;
    dcfg.max_steps = spec.max_steps;
    dcfg.rng_seed = cell.seed;
    const auto trace = rollout(conv, basins, dcfg);
    if (trace.first_hit) {
        r.n_star_obs_tok = *trace.first_hit;
    }
    r.agree_tok = agrees_within_one(r.n_star_pred, r.n_star_obs_tok);
    if (cell.prompt->sentence_labels) {
        r.n_star_obs_sent = sentence_first_hit(*cell.prompt->sentence_labels);
        r.agree_sent = agrees_within_one(r.n_star_pred, *r.n_star_obs_sent);
    }

    if (basins.dimension() == 2) {
        r.prompt_vectors = conv.vectors();
        for (const auto& step : trace.steps) {
            r.trajectory.push_back(step.context);
        }
        r.good = basins.good();
        r.bad = basins.bad();
    }
    return r;
}

auto sort_key(const ResultRecord& r) { return std::tie(r.prompt, r.geometry, r.temperature, r.seed); }

} // namespace

Conversation PromptSpec::conversation(const BasinSet& basins) const {
    if (!vectors.empty()) {
        std::vector<Entry> entries;
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            if (vectors[i].dimension() != basins.dimension()) {
                throw DimensionError(vectors[i].dimension(), basins.dimension());
            }
            entries.push_back(Entry{"P" + std::to_string(i), vectors[i]});
        }
        return Conversation(std::move(entries));
    }
    return Conversation::from_labels(labels, basins);
}

void ExperimentSpec::validate() const {
    if (!(t_eff > 0.0)) {
        throw InvalidArgument("t_eff must be positive");
    }
    if (max_steps < 1) {
        throw InvalidArgument("max_steps must be >= 1");
    }
    if (decode_temperatures.empty() || seeds.empty()) {
        throw InvalidArgument("decode_temperatures and seeds must be non-empty");
    }
    for (double t : decode_temperatures) {
        if (!(t >= 0.0)) {
            throw InvalidArgument("decode temperatures must be >= 0");
        }
    }
    for (const auto& g : geometries) {
        if (!usable_name(g.name)) {
            throw InvalidArgument("geometry name '" + g.name + "' must be non-empty without commas or quotes");
        }
        g.basins.require_tipping_pair();
    }
    for (const auto& p : prompts) {
        if (!usable_name(p.name)) {
            throw InvalidArgument("prompt name '" + p.name + "' must be non-empty without commas or quotes");
        }
        bool matched = !p.geometry;
        for (const auto& g : geometries) {
            if (p.geometry && *p.geometry != g.name) {
                continue;
            }
            matched = true;
            for (const auto& label : p.labels) {
                if (!g.basins.contains(label)) {
                    throw InvalidArgument("prompt '" + p.name + "' uses label '" + label +
                                          "' missing from geometry '" + g.name + "'");
                }
            }
            for (const auto& v : p.vectors) {
                if (v.dimension() != g.basins.dimension()) {
                    throw InvalidArgument("prompt '" + p.name + "' has a vector of dimension " +
                                          std::to_string(v.dimension()) + " but geometry '" + g.name + "' has " +
                                          std::to_string(g.basins.dimension()));
                }
            }
        }
        if (!matched) {
            throw InvalidArgument("prompt '" + p.name + "' names unknown geometry '" + *p.geometry + "'");
        }
    }
}

ExperimentSpec parse_experiment_spec(std::string_view text, const std::filesystem::path& base_dir,
                                     const std::string& source) {
    const auto doc = detail::parse_json_text(text, source);
    if (!doc.is_object()) {
        throw FormatError(source, "experiment spec must be a JSON object");
    }
    ExperimentSpec spec;
    try {
        if (doc.contains("basin_file")) {
            spec.geometries.push_back(read_geometry(doc, base_dir, source));
        }
        if (doc.contains("geometries")) {
            const auto& gs = doc.at("geometries");
            for (std::size_t i = 0; i < gs.size(); ++i) {
                spec.geometries.push_back(read_geometry(gs[i], base_dir, source + ": /geometries/" + std::to_string(i)));
            }
        }
        if (spec.geometries.empty()) {
            throw FormatError(source, "needs 'basin_file' or a non-empty 'geometries' list");
        }
        const auto& prompts = detail::require_field(doc, "prompts", source);
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            spec.prompts.push_back(read_prompt(prompts[i], base_dir, source + ": /prompts/" + std::to_string(i)));
        }
        spec.t_eff = doc.value("t_eff", spec.t_eff);
        if (doc.contains("decode_temperatures")) {
            spec.decode_temperatures = doc.at("decode_temperatures").get<std::vector<double>>();
        }
        if (doc.contains("seeds")) {
            spec.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
        }
        spec.max_steps = doc.value("max_steps", spec.max_steps);
        spec.epsilon_boundary = doc.value("epsilon_boundary", spec.epsilon_boundary);
        if (doc.contains("prediction_mode")) {
            const auto mode = doc.at("prediction_mode").get<std::string>();
            if (mode == "one_step_gate") {
                spec.mode = PredictionMode::kOneStepGate;
            } else if (mode == "equation") {
                spec.mode = PredictionMode::kEquationOnPrompt;
            } else {
                throw FormatError(source + ": /prediction_mode", "must be 'one_step_gate' or 'equation'");
            }
        }
        if (doc.contains("outputs")) {
            const auto& out = doc.at("outputs");
            spec.outputs.results_csv = optional_path(out, "results_csv", base_dir);
            spec.outputs.summary_csv = optional_path(out, "summary_csv", base_dir);
            spec.outputs.summary_json = optional_path(out, "summary_json", base_dir);
            spec.outputs.histogram_svg = optional_path(out, "histogram_svg", base_dir);
            spec.outputs.trajectory_svg = optional_path(out, "trajectory_svg", base_dir);
        }
    } catch (const json::exception& e) {
        throw FormatError(source, e.what());
    }
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
    return parse_experiment_spec(detail::read_text_file(path), path.parent_path(), path.string());
}

std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec, const LogSink& log) {
    spec.validate();
    std::vector<Cell> cells;
    for (const auto& p : spec.prompts) {
        for (const auto& g : spec.geometries) {
            if (p.geometry && *p.geometry != g.name) {
                continue;
            }
            for (double t : spec.decode_temperatures) {
                for (auto seed : spec.seeds) {
                    cells.push_back(Cell{&p, &g, t, seed});
                }
            }
        }
    }

    std::vector<ResultRecord> records(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                records[i] = run_cell(cells[i], spec);
            } catch (const std::exception& e) {
                auto& r = records[i];
                r = ResultRecord{};
                r.prompt = cells[i].prompt->name;
                r.geometry = cells[i].geometry->name;
                r.temperature = cells[i].temperature;
                r.seed = cells[i].seed;
                r.control = cells[i].prompt->control;
                r.error = e.what();
                if (log) {
                    std::lock_guard lock(log_mutex);
                    log("cell " + r.prompt + "/" + r.geometry + " failed: " + r.error);
                }
            }
        }
    };
    unsigned threads = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(cells.size(), 1)));
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const ResultRecord& a, const ResultRecord& b) { return sort_key(a) < sort_key(b); });
    return records;
}

std::string bin_name(int bin) {
    static const char* names[kBinCount] = {"0", "1", "2", "3+", "no-D"};
    if (bin < 0 || bin >= kBinCount) {
        throw InvalidArgument("bin index out of range");
    }
    return names[bin];
}

int bin_of(const NStar& n) { return n.is_stable() ? 4 : static_cast<int>(std::min<std::int64_t>(n.value(), 3)); }

int bin_of(const ObservedTip& n) { return n ? static_cast<int>(std::min<std::int64_t>(*n, 3)) : 4; }

ComparisonSummary compare(const std::vector<ResultRecord>& records, int window) {
    ComparisonSummary s;
    std::vector<NStar> preds;
    std::vector<ObservedTip> obs;
    std::vector<bool> pred_tip;
    std::vector<bool> obs_tip;
    std::array<int, kBinCount> pred_bins{};
    std::array<int, kBinCount> obs_bins{};
    for (const auto& r : records) {
        if (!r.error.empty()) {
            ++s.failed;
            continue;
        }
        if (r.control) {
            ++s.controls;
            continue;
        }
        preds.push_back(r.n_star_pred);
        obs.push_back(r.n_star_obs_tok);
        pred_tip.push_back(!r.n_star_pred.is_stable() && r.n_star_pred.value() < window);
        obs_tip.push_back(r.n_star_obs_tok.has_value());
        ++pred_bins[static_cast<std::size_t>(bin_of(r.n_star_pred))];
        ++obs_bins[static_cast<std::size_t>(bin_of(r.n_star_obs_tok))];
    }
    s.total = static_cast<int>(preds.size());
    if (s.total == 0) {
        return s;
    }
    for (int b = 0; b < kBinCount; ++b) {
        BinSummary bin;
        bin.name = bin_name(b);
        bin.predicted = pred_bins[static_cast<std::size_t>(b)];
        bin.observed = obs_bins[static_cast<std::size_t>(b)];
        bin.predicted_ci = clopper_pearson(bin.predicted, s.total);
        bin.observed_ci = clopper_pearson(bin.observed, s.total);
        bin.overlap = bin.predicted_ci.overlaps(bin.observed_ci);
        s.all_bins_overlap = s.all_bins_overlap && bin.overlap;
        s.bins.push_back(bin);
    }
    s.baseline = baseline_compare(preds, obs);
    s.agreements = s.baseline.model_hits;
    s.agreement_rate = s.baseline.model_accuracy;
    s.agreement_ci = clopper_pearson(s.agreements, s.total);
    s.p_value = binomial_test(s.agreements, s.total, 0.5, Sided::kOne);
    // std::vector<bool> has no contiguous storage; copy into plain arrays.
    std::unique_ptr<bool[]> p(new bool[pred_tip.size()]);
    std::unique_ptr<bool[]> o(new bool[obs_tip.size()]);
    std::copy(pred_tip.begin(), pred_tip.end(), p.get());
    std::copy(obs_tip.begin(), obs_tip.end(), o.get());
    s.confusion = confusion(std::span<const bool>(p.get(), pred_tip.size()),
                            std::span<const bool>(o.get(), obs_tip.size()));
    return s;
}

} // namespace tipping

#include "tipping/dynamics.hpp"

#include "json_util.hpp"
#include "tipping/attention.hpp"
#include "tipping/errors.hpp"

#include <algorithm>
#include <sstream>

namespace tipping {

Conversation::Conversation(std::vector<Entry> entries) : entries_(std::move(entries)) {
    for (const auto& e : entries_) {
        if (e.vector.dimension() != entries_.front().vector.dimension()) {
            throw DimensionError(entries_.front().vector.dimension(), e.vector.dimension());
        }
    }
}

Conversation Conversation::from_labels(std::span<const Label> labels, const BasinSet& basins) {
    std::vector<Entry> entries;
    for (const auto& label : labels) {
        entries.push_back(Entry{label, basins.centroid(label)});
    }
    return Conversation(std::move(entries));
}

std::size_t Conversation::dimension() const {
    if (entries_.empty()) {
        throw InvalidArgument("empty conversation has no dimension");
    }
    return entries_.front().vector.dimension();
}

std::vector<EmbeddingVector> Conversation::vectors() const {
    std::vector<EmbeddingVector> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) {
        out.push_back(e.vector);
    }
    return out;
}

std::string Conversation::symbols() const {
    std::string out;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i) out += ',';
        out += entries_[i].label;
    }
    return out;
}

void Conversation::push_back(Entry entry) {
    if (!entries_.empty() && entry.vector.dimension() != dimension()) {
        throw DimensionError(dimension(), entry.vector.dimension());
    }
    entries_.push_back(std::move(entry));
}

Conversation Conversation::appended(std::span<const Entry> extra) const {
    Conversation out = *this;
    for (const auto& e : extra) {
        out.push_back(e);
    }
    return out;
}

void DynamicsConfig::validate() const {
    if (!(t_eff > 0.0)) {
        throw InvalidArgument("t_eff must be positive");
    }
    if (!(decode_temperature >= 0.0)) {
        throw InvalidArgument("decode temperature must be non-negative");
    }
    if (max_steps < 1) {
        throw InvalidArgument("max_steps must be >= 1");
    }
    if (candidates.empty()) {
        throw InvalidArgument("candidate list is empty");
    }
}

std::string RolloutTrace::symbols() const {
    std::string out;
    for (const auto& s : steps) {
        out += s.chosen;
    }
    return out;
}

EmbeddingVector context_vector(const Conversation& conv, double t_eff) {
    if (conv.empty()) {
        throw InvalidArgument("context of an empty conversation");
    }
    const auto keys = conv.vectors();
    return attend(keys.back(), keys, keys, t_eff);
}

namespace {

std::vector<std::pair<Label, double>> candidate_scores(const EmbeddingVector& context, const BasinSet& basins,
                                                       std::span<const Label> candidates) {
    std::vector<std::pair<Label, double>> scores;
    scores.reserve(candidates.size());
    for (const auto& label : candidates) {
        scores.emplace_back(label, dot(context, basins.centroid(label)));
    }
    return scores;
}

Label choose(const std::vector<std::pair<Label, double>>& scores, double temperature, Rng& rng) {
    if (temperature == 0.0) {
        double best = scores.front().second;
        for (const auto& s : scores) {
            best = std::max(best, s.second);
        }
        const Label* winner = nullptr;
        for (const auto& [label, score] : scores) {
            if (score == best) {
                if (label == kBadBasin) {
                    return label;
                }
                if (!winner) {
                    winner = &label;
                }
            }
        }
        return *winner;
    }
    std::vector<double> raw;
    raw.reserve(scores.size());
    for (const auto& s : scores) {
        raw.push_back(s.second);
    }
    const auto probs = softmax(raw, temperature);
    const double u = rng.uniform01();
    double cumulative = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cumulative += probs[i];
        if (u < cumulative) {
            return scores[i].first;
        }
    }
    return scores.back().first;
}

bool favors_bad(const EmbeddingVector& context, const BasinSet& basins) {
    return dot(context, basins.bad()) >= dot(context, basins.good());
}

} // namespace

Label next_symbol(const EmbeddingVector& context, const BasinSet& basins, std::span<const Label> candidates,
                  double temperature, Rng& rng) {
    if (candidates.empty()) {
        throw InvalidArgument("candidate list is empty");
    }
    if (temperature < 0.0) {
        throw InvalidArgument("decode temperature must be non-negative");
    }
    return choose(candidate_scores(context, basins, candidates), temperature, rng);
}

RolloutTrace rollout(const Conversation& prompt, const BasinSet& basins, const DynamicsConfig& cfg) {
    cfg.validate();
    basins.require_tipping_pair();
    if (prompt.empty()) {
        throw InvalidArgument("rollout needs a non-empty prompt");
    }
    if (prompt.dimension() != basins.dimension()) {
        throw DimensionError(prompt.dimension(), basins.dimension());
    }
    for (const auto& label : cfg.candidates) {
        basins.at(label);
    }

    Rng rng(cfg.rng_seed);
    Conversation conv = prompt;
    RolloutTrace trace;
    trace.steps.reserve(static_cast<std::size_t>(cfg.max_steps));
    for (int step = 0; step < cfg.max_steps; ++step) {
        auto context = context_vector(conv, cfg.t_eff);
        if (!trace.first_hit && favors_bad(context, basins)) {
            trace.first_hit = step;
        }
        auto scores = candidate_scores(context, basins, cfg.candidates);
        Label chosen = choose(scores, cfg.decode_temperature, rng);
        conv.push_back(Entry{chosen, basins.centroid(chosen)});
        trace.steps.push_back(TraceStep{std::move(context), std::move(scores), std::move(chosen)});
    }
    return trace;
}

std::optional<int> first_hit_from_contexts(std::span<const TraceStep> steps, const BasinSet& basins) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& c = steps[i].context;
        double to_good = 0.0;
        double to_bad = 0.0;
        const auto& good = basins.good();
        const auto& bad = basins.bad();
        // Plain loops: independent of the kernel dispatch used by rollout().
        for (std::size_t k = 0; k < c.dimension(); ++k) {
            to_good += c[k] * good[k];
            to_bad += c[k] * bad[k];
        }
        if (to_bad >= to_good) {
            return static_cast<int>(i);
        }
    }
    return std::nullopt;
}

Continuation one_step_continuation(const Conversation& prompt, const BasinSet& basins, const DynamicsConfig& cfg) {
    DynamicsConfig greedy = cfg;
    greedy.decode_temperature = 0.0;
    greedy.max_steps = 1;
    const auto trace = rollout(prompt, basins, greedy);
    const auto& chosen = trace.steps.front().chosen;
    Continuation out{prompt, chosen == kBadBasin};
    out.extended.push_back(Entry{chosen, basins.centroid(chosen)});
    return out;
}

std::string trace_jsonl(const RolloutTrace& trace) {
    std::ostringstream out;
    for (std::size_t i = 0; i < trace.steps.size(); ++i) {
        const auto& s = trace.steps[i];
        detail::json scores = detail::json::object();
        for (const auto& [label, value] : s.scores) {
            scores[label] = value;
        }
        detail::json line{{"step", i}, {"context", detail::write_vector(s.context)}, {"scores", scores},
                          {"chosen", s.chosen}};
        out << line.dump() << '\n';
    }
    return out.str();
}

RolloutTrace parse_trace_jsonl(std::string_view text, const std::string& source) {
    RolloutTrace trace;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const std::string where = source + ":" + std::to_string(lineno);
        const auto doc = detail::parse_json_text(line, where);
        TraceStep step;
        step.context = detail::read_vector(detail::require_field(doc, "context", where), where + "/context");
        const auto& scores = detail::require_field(doc, "scores", where);
        if (!scores.is_object()) {
            throw FormatError(where + "/scores", "must be an object");
        }
        for (const auto& [label, value] : scores.items()) {
            if (!value.is_number()) {
                throw FormatError(where + "/scores/" + label, "must be a number");
            }
            step.scores.emplace_back(label, value.get<double>());
        }
        const auto& chosen = detail::require_field(doc, "chosen", where);
        if (!chosen.is_string()) {
            throw FormatError(where + "/chosen", "must be a string");
        }
        step.chosen = chosen.get<std::string>();
        trace.steps.push_back(std::move(step));
    }
    for (std::size_t i = 0; i < trace.steps.size() && !trace.first_hit; ++i) {
        const auto& scores = trace.steps[i].scores;
        const auto find = [&](const Label& label) -> std::optional<double> {
            for (const auto& s : scores) {
                if (s.first == label) return s.second;
            }
            return std::nullopt;
        };
        const auto good = find(kGoodBasin);
        const auto bad = find(kBadBasin);
        if (good && bad && *bad >= *good) {
            trace.first_hit = static_cast<int>(i);
        }
    }
    return trace;
}

} // namespace tipping

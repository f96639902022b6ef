#pragma once

// Coarse-grained effective-head generation: the context ("compass needle")
// vector, next-symbol choice, and greedy/stochastic rollouts with the
// observed first-hit time.

#include "tipping/geometry.hpp"
#include "tipping/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tipping {

struct Entry {
    Label label;  // basin label, or a descriptive tag for inline vectors
    EmbeddingVector vector;
};

class Conversation {
public:
    Conversation() = default;
    explicit Conversation(std::vector<Entry> entries);

    // Resolve labels against the basin centroids.
    static Conversation from_labels(std::span<const Label> labels, const BasinSet& basins);

    bool empty() const noexcept { return entries_.empty(); }
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t dimension() const;
    const Entry& operator[](std::size_t i) const { return entries_[i]; }
    const Entry& back() const { return entries_.back(); }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::vector<EmbeddingVector> vectors() const;
    std::string symbols() const;  // labels joined with ','

    void push_back(Entry entry);
    Conversation appended(std::span<const Entry> extra) const;

private:
    std::vector<Entry> entries_;
};

struct DynamicsConfig {
    double t_eff = 1.0;               // attention temperature
    double decode_temperature = 0.0;  // 0 = greedy
    int max_steps = 300;
    std::uint64_t rng_seed = 0;
    std::vector<Label> candidates{kGoodBasin, kBadBasin};

    void validate() const;
};

struct TraceStep {
    EmbeddingVector context;
    std::vector<std::pair<Label, double>> scores;  // candidate order
    Label chosen;
};

struct RolloutTrace {
    std::vector<TraceStep> steps;
    std::optional<int> first_hit;  // B symbols emitted before the context first favors D

    std::string symbols() const;   // e.g. "BDDD"
};

// Attention-weighted sum of every entry using the last entry as query.
EmbeddingVector context_vector(const Conversation& conv, double t_eff);

// Greedy (T = 0) or softmax-sampled choice among candidates. Greedy ties go
// to D when D is among the tied candidates, else to the first in order.
Label next_symbol(const EmbeddingVector& context, const BasinSet& basins, std::span<const Label> candidates,
                  double temperature, Rng& rng);

RolloutTrace rollout(const Conversation& prompt, const BasinSet& basins, const DynamicsConfig& cfg);

// First-hit recomputed from stored contexts: index of the first step whose
// context c has c.D >= c.B.
std::optional<int> first_hit_from_contexts(std::span<const TraceStep> steps, const BasinSet& basins);

struct Continuation {
    Conversation extended;
    bool d_first = false;
};

// One greedy symbol.
Continuation one_step_continuation(const Conversation& prompt, const BasinSet& basins, const DynamicsConfig& cfg);

// One JSON object per step: {"step", "context", "scores", "chosen"}.
std::string trace_jsonl(const RolloutTrace& trace);
RolloutTrace parse_trace_jsonl(std::string_view text, const std::string& source = "<memory>");

} // namespace tipping

#pragma once

// Batch harness: prompt x geometry x decode-temperature x seed sweeps,
// predicted-vs-observed comparison with binned counts and exact intervals,
// and CSV/SVG report emission.

#include "tipping/dynamics.hpp"
#include "tipping/geometry.hpp"
#include "tipping/predictor.hpp"
#include "tipping/stats.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tipping {

struct Geometry {
    std::string name;
    BasinSet basins;
};

struct PromptSpec {
    std::string name;
    std::vector<Label> labels;                 // resolved against each geometry
    std::vector<EmbeddingVector> vectors;      // inline alternative to labels
    bool control = false;                      // excluded from the comparison
    std::optional<std::string> geometry;       // restrict to one geometry
    std::optional<std::vector<SentenceLabel>> sentence_labels;

    Conversation conversation(const BasinSet& basins) const;
};

struct ExperimentOutputs {
    std::optional<std::filesystem::path> results_csv;
    std::optional<std::filesystem::path> summary_csv;
    std::optional<std::filesystem::path> summary_json;
    std::optional<std::filesystem::path> histogram_svg;
    std::optional<std::filesystem::path> trajectory_svg;
};

struct ExperimentSpec {
    std::vector<Geometry> geometries;
    std::vector<PromptSpec> prompts;
    double t_eff = 1.0;
    std::vector<double> decode_temperatures{0.0};
    std::vector<std::uint64_t> seeds{0};
    int max_steps = 300;
    double epsilon_boundary = 0.01;
    PredictionMode mode = PredictionMode::kOneStepGate;
    ExperimentOutputs outputs;
    unsigned threads = 0;  // 0 = hardware concurrency

    // Throws InvalidArgument when a prompt references a label missing from a
    // geometry it runs on, or names are unusable.
    void validate() const;
};

// JSON spec. Relative paths (basin files, sentence labels, outputs) resolve
// against base_dir.
ExperimentSpec parse_experiment_spec(std::string_view text, const std::filesystem::path& base_dir,
                                     const std::string& source = "<memory>");
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

struct ResultRecord {
    std::string prompt;
    std::string geometry;
    double temperature = 0.0;
    std::uint64_t seed = 0;
    bool control = false;
    NStar n_star_pred = NStar::stable();
    double raw_value = 0.0;
    ObservedTip n_star_obs_tok;
    std::optional<ObservedTip> n_star_obs_sent;  // outer: labels supplied; inner: "no D"
    TimingClass timing_class = TimingClass::kDelayed;
    double delta_hat = 0.0;
    bool agree_tok = false;
    std::optional<bool> agree_sent;
    std::string error;  // non-empty when this cell failed

    // Context path of the rollout, kept only for two-dimensional geometries.
    std::vector<EmbeddingVector> trajectory;
    std::vector<EmbeddingVector> prompt_vectors;
    std::optional<EmbeddingVector> good;
    std::optional<EmbeddingVector> bad;
};

using LogSink = std::function<void(const std::string&)>;

// Cells run in parallel; records come back sorted by (prompt, geometry,
// temperature, seed), so output is bit-identical for identical input.
std::vector<ResultRecord> run_experiment(const ExperimentSpec& spec, const LogSink& log = {});

// Histogram bins {0, 1, 2, 3+, no-D}.
inline constexpr int kBinCount = 5;
std::string bin_name(int bin);
int bin_of(const NStar& n);
int bin_of(const ObservedTip& n);

struct BinSummary {
    std::string name;
    int predicted = 0;
    int observed = 0;
    Interval predicted_ci;  // Clopper-Pearson on the fraction in this bin
    Interval observed_ci;
    bool overlap = true;
};

struct ComparisonSummary {
    int total = 0;          // non-control records without errors
    int controls = 0;
    int failed = 0;
    std::vector<BinSummary> bins;  // empty when total == 0
    int agreements = 0;
    double agreement_rate = 0.0;
    Interval agreement_ci;
    double p_value = 1.0;  // one-sided binomial test against 1/2
    BaselineComparison baseline;
    ConfusionMatrix confusion;  // D within the window predicted vs observed
    bool all_bins_overlap = true;
};

ComparisonSummary compare(const std::vector<ResultRecord>& records, int window = 300);

std::string results_csv_header();
std::string results_csv(const std::vector<ResultRecord>& records);
std::vector<ResultRecord> parse_results_csv(std::string_view text, const std::string& source = "<memory>");

std::string summary_csv(const ComparisonSummary& summary);
std::string summary_json(const ComparisonSummary& summary);
std::string histogram_svg(const ComparisonSummary& summary);
// nullopt unless at least one record carries a 2-D trajectory.
std::optional<std::string> trajectory_svg(const std::vector<ResultRecord>& records);

// Writes whichever outputs are configured. Returns notices (e.g. a skipped
// trajectory plot). Throws Error when a path cannot be written.
std::vector<std::string> emit_report(const ComparisonSummary& summary, const std::vector<ResultRecord>& records,
                                     const ExperimentOutputs& outputs);

} // namespace tipping

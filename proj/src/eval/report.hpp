#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eval/judge.hpp"
#include "pipeline/pipeline.hpp"

namespace ttarag {

struct QueryOutcome {
    std::string query_id;
    std::string domain;
    std::string question;
    std::vector<std::string> golds;
    std::string prediction;
    bool correct = false;
    bool fallback = false;
    std::string fallback_reason;
    std::vector<std::string> retrieved_ids;
    std::vector<double> pair_losses;  // pre-update loss per adaptation pair
    StageTimings timings;
};

struct DomainScore {
    std::string domain;
    std::size_t queries = 0;
    std::size_t correct = 0;
    double accuracy = 0.0;                   // percent
    std::optional<double> delta_vs_naive;    // percentage points
};

struct RunReport {
    AnswerMode mode = AnswerMode::naive;
    JudgeKind judge = JudgeKind::exact;
    std::vector<DomainScore> domains;  // sorted by name
    double overall_accuracy = 0.0;     // query-weighted mean of domain accuracies
    std::optional<double> overall_delta_vs_naive;
    std::vector<double> loss_trajectory;  // mean pre-update loss at each pair position
    std::size_t fallbacks = 0;
    double total_seconds = 0.0;  // sum of per-query answer times
    double avg_seconds = 0.0;
    double wall_seconds = 0.0;
    std::vector<QueryOutcome> outcomes;  // sorted by query id
};

/// Everything a run needs besides the dataset. The model is only read; each
/// replica works on its own clone restored from the model's parameters.
struct RunContext {
    const Bm25Index& index;
    const Vocab& vocab;
    const TransformerLm& model;
    const Judge& judge;
    std::size_t replicas = 1;
};

/// Answers every record in `mode`, judges and aggregates. Throws
/// std::invalid_argument on an empty dataset.
RunReport evaluate_run(std::span<const QueryRecord> dataset, const RunContext& ctx, const PipelineConfig& config,
                       AnswerMode mode);

/// Recomputes per-domain and overall accuracy from the outcomes.
void aggregate(RunReport& report);

/// Fills the Δ fields of `report` against a naive run. Throws
/// std::invalid_argument unless both runs cover the same query ids.
void attach_naive_baseline(RunReport& report, const RunReport& naive);

enum class SweepAxis { learning_rate, pair_count };

const char* to_string(SweepAxis axis);
/// Accepts "lr"/"learning-rate" and "pairs"/"pair-count".
SweepAxis parse_sweep_axis(std::string_view text);

struct SweepRow {
    double value = 0.0;
    double accuracy = 0.0;
    double avg_seconds = 0.0;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::learning_rate;
    AnswerMode mode = AnswerMode::ttarag;
    SweepRow baseline;  // naive run; value unused
    std::vector<SweepRow> rows;
};

/// One evaluate_run per grid value with everything else fixed, plus a
/// naive baseline.
SweepTable run_sweep(std::span<const QueryRecord> dataset, const RunContext& ctx, const PipelineConfig& config,
                     SweepAxis axis, std::span<const double> grid, AnswerMode mode = AnswerMode::ttarag);

/// Naive, TTARAG and whole-passage runs on the same queries.
struct AblationReport {
    RunReport naive;
    RunReport ttarag;
    RunReport woseg;
};

AblationReport run_ablation(std::span<const QueryRecord> dataset, const RunContext& ctx,
                            const PipelineConfig& config);

/// Plain-text accuracy table: one row per report, one column per domain
/// plus overall, then a Δ row for every non-naive report when a naive
/// report is present, then a timing block.
std::string format_summary(std::span<const RunReport> reports);

/// domain,queries,correct,accuracy,delta_vs_naive rows and an overall row.
std::string report_csv(const RunReport& report);
/// axis value, accuracy, avg seconds; first data row is the naive baseline.
std::string sweep_csv(const SweepTable& table);

std::string report_to_json(const RunReport& report);
RunReport report_from_json(std::string_view json);
std::string sweep_to_json(const SweepTable& table);
SweepTable sweep_from_json(std::string_view json);

/// Per-query predictions, one JSON object per line.
std::string answers_jsonl(const RunReport& report);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ttarag

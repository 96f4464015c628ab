#pragma once

#include "cider/metrics.hpp"
#include "cider/model.hpp"
#include "cider/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace cider {

struct PredictionRecord {
    std::string participant_id;
    std::vector<double> chunk_logits;
    int vote_label = 0;
    double score = 0.0;  // sigmoid(mean chunk logit)
    int true_label = 0;
};

/// Eval-mode forward over every chunk, then majority vote per recording pair.
std::vector<PredictionRecord> predict_examples(const ModelParams<float>& params, const std::vector<Example>& examples);

struct TaskMetrics {
    double auc = 0.0;
    double uar = 0.0;
    Interval auc_ci;
    Interval uar_ci;
    int n_pos = 0;
    int n_neg = 0;
};

/// AUC over recording-level scores, UAR over vote labels, Hanley-McNeil and
/// normal-approximation intervals (n = number of recording pairs).
TaskMetrics compute_metrics(const std::vector<PredictionRecord>& records, double level = 0.95);
TaskMetrics compute_metrics(std::span<const double> scores, std::span<const int> predicted,
                            std::span<const int> truth, double level = 0.95);

TaskMetrics evaluate_task(const ModelParams<float>& params, const std::vector<Example>& test,
                          std::vector<PredictionRecord>* records = nullptr);

/// Summary of one model family on one task across repeated runs.
struct ModelSummary {
    std::string model;  // "cider" or "baseline"
    int task = 0;
    std::vector<double> run_auc;
    std::vector<double> run_uar;
    MeanStd auc;
    MeanStd uar;
    Interval auc_ci;  // Hanley-McNeil around the mean AUC
    Interval uar_ci;  // normal approximation around the mean UAR
    int n_pos = 0;
    int n_neg = 0;
    int test_pairs = 0;
    int test_files = 0;
    int train_dev_pairs = 0;
    int train_dev_files = 0;
    nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

ModelSummary summarize_runs(const std::string& model, int task, const std::vector<TaskMetrics>& runs, double level = 0.95);

struct Comparison {
    TTestResult auc;
    TTestResult uar;
};

/// CIdeR vs baseline on per-run values; significance flagged at both 0.05 and 0.01.
Comparison compare_runs(const ModelSummary& cider, const ModelSummary& baseline, double alpha = 0.05);

struct MetricsReport {
    std::vector<ModelSummary> tasks;
};

nlohmann::ordered_json summary_to_json(const ModelSummary& s);
ModelSummary summary_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::ordered_json& j);
void write_report(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport read_report(const std::filesystem::path& path);

/// Fixed-width table: one row per task, AUC +- std and UAR +- std per model.
/// Values significantly better than the other model at alpha=0.05 are marked
/// with '*', at 0.01 with '**'.
std::string render_table(const MetricsReport& cider, const std::optional<MetricsReport>& baseline);

void write_scores_csv(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);

}  // namespace cider

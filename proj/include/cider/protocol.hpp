#pragma once

#include "cider/baseline.hpp"
#include "cider/config.hpp"
#include "cider/dataset.hpp"
#include "cider/evaluator.hpp"
#include "cider/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace cider {

/// Model inputs for every recording pair of a cohort, keyed by participant.
struct ExampleStore {
    std::map<std::string, std::vector<Example>> by_participant;

    const std::vector<Example>& of(const std::string& participant_id) const;
};

/// Decodes, resamples, chunks and transforms every recording pair of the
/// cohort's members (parallel over pairs).
ExampleStore build_examples(const TaskCohort& cohort, const SpectrogramConfig& config, int threads = 0);

/// Per-pair and per-file counts of a participant set.
struct PairCounts {
    int pairs = 0;
    int files = 0;
};

/// Examples of one rotation. Test examples are kept apart from the
/// train/dev split handed to fit().
struct RotationData {
    Rotation rotation;
    TrainDevSplit train_dev;
    std::vector<Example> test;
};

RotationData rotation_examples(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                               const Rotation& rotation);

/// Seed of run `run` (0-based) on the rotation with dev fold `dev_fold`.
std::uint64_t fit_seed(std::uint64_t base_seed, int task, int run, int dev_fold);

struct FitRecord {
    int task = 0;
    int run = 0;
    int dev_fold = 0;
    std::array<int, 2> train_folds{};
    std::uint64_t seed = 0;
    RunResult result;
};

using FitProgress = std::function<void(const FitRecord& partial, int epoch, double train_loss, double dev_auc)>;

/// runs x 3 rotations fits (parallel over fits); records are ordered by run, then dev fold.
std::vector<FitRecord> train_task(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                                  const ProtocolConfig& config, const FitProgress& progress = {});

/// Test metrics of one trained model.
struct ModelEvaluation {
    int run = 0;
    int dev_fold = 0;
    int best_epoch = 0;
    TaskMetrics metrics;
    std::vector<PredictionRecord> predictions;
};

/// Evaluates each model on the fixed test fold. The per-run value is the
/// mean over that run's rotation models; the summary aggregates runs.
struct TaskEvaluation {
    ModelSummary summary;
    std::vector<ModelEvaluation> models;
};

TaskEvaluation evaluate_models(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                               const std::vector<std::pair<FitRecord, const ModelParams<float>*>>& models,
                               const ProtocolConfig& config);

/// Convenience: train_task followed by evaluate_models.
struct TaskOutcome {
    std::vector<FitRecord> fits;
    TaskEvaluation evaluation;
};
TaskOutcome run_cider_task(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                           const ProtocolConfig& config, const FitProgress& progress = {});

/// Baseline features for every recording pair of the cohort, in cohort order.
/// With a cache path, a matching "FEAT" file is reused and a missing one is written.
std::map<std::string, std::vector<FeatureVector>> build_features(const TaskCohort& cohort,
                                                                 const FeatureConfig& config, int threads = 0,
                                                                 const std::filesystem::path& cache = {});

struct BaselineOutcome {
    TuneResult tuning;
    ModelSummary summary;
    std::vector<BaselineModel> models;  // one per rotation, dev fold order
    std::vector<TaskMetrics> metrics;
};

/// C tuned on the three dev folds, then one model per rotation (trained on
/// its two train folds) scored on the test fold; the rotation models play
/// the role of the repeated runs.
BaselineOutcome run_baseline_task(const TaskCohort& cohort,
                                  const std::map<std::string, std::vector<FeatureVector>>& features,
                                  const FoldAssignment& folds, const ProtocolConfig& config);

/// Throws LeakageDetected if any participant of the test fold appears in
/// the given id set.
void assert_no_test_participants(const std::set<std::string>& seen, const FoldAssignment& folds);

/// Lower the glibc mmap threshold churn for the large short-lived tensors of
/// training. No-op on other C libraries.
void tune_allocator();

}  // namespace cider

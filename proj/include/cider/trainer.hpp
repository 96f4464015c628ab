#pragma once

#include "cider/dsp.hpp"
#include "cider/metrics.hpp"
#include "cider/model.hpp"
#include "cider/rng.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace cider {

/// Dev metric whose earliest maximum picks the returned epoch.
enum class SelectionMetric { Auc, Uar };

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 16;
    int max_epochs = 50;
    std::uint64_t seed = 0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    /// "auto": w_pos = N / (2 N_pos), w_neg = N / (2 N_neg) on the training split.
    bool auto_class_weights = true;
    double w_pos = 1.0;
    double w_neg = 1.0;
    SelectionMetric selection = SelectionMetric::Auc;

    void validate() const;
};

/// One recording pair, already chunked and converted to model inputs.
struct Example {
    std::string participant_id;
    int label = 0;
    std::shared_ptr<const std::vector<ModelInput>> chunks;
};

/// The only data fit() accepts: training and development examples. The
/// held-out test fold has no way into this type.
struct TrainDevSplit {
    std::vector<Example> train;
    std::vector<Example> dev;
};

struct RunResult {
    int best_epoch = 0;  // 1-based
    std::vector<double> dev_auc_by_epoch;
    std::vector<double> dev_uar_by_epoch;
    std::vector<double> train_loss_by_epoch;
    ModelParams<float> final_params;
    std::uint64_t seed = 0;
    /// Every participant whose data fit() touched.
    std::set<std::string> participants_seen;
};

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;
    std::vector<std::vector<T>> v;
    std::int64_t step = 0;
};

/// One bias-corrected Adam update of a flat parameter vector; t >= 1.
template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::int64_t t,
                 const TrainConfig& config);

/// Updates every trainable tensor of `params`; `grads[i]` pairs with
/// `params.tensors[i]` (ignored for non-trainable entries; empty = zero).
template <typename T>
void adam_step(ModelParams<T>& params, const std::vector<std::vector<T>>& grads, AdamState<T>& state,
               const TrainConfig& config);

/// Uniform choice of one chunk. Throws EmptyList.
const ModelInput& sample_chunk(const std::vector<ModelInput>& inputs, Rng& rng);

struct ClassWeights {
    double w_pos = 1.0;
    double w_neg = 1.0;
};

/// Auto weights from the training labels; throws NoPositives / NoNegatives.
ClassWeights auto_class_weights(std::span<const Example> train);

using EpochCallback = std::function<void(int epoch, double train_loss, double dev_auc)>;

/// Adam training with one uniformly sampled chunk per recording pair per
/// epoch; after every epoch the development AUC is measured with
/// majority-vote inference, and the parameters of the best epoch (earliest
/// on ties) are returned.
RunResult fit(const TrainDevSplit& split, const CiderConfig& model_config, const TrainConfig& train_config,
              const EpochCallback& on_epoch = {});

/// One optimization step on a fixed batch; returns the loss before the update.
double train_step(ModelParams<float>& params, AdamState<float>& state, const std::vector<const ModelInput*>& batch,
                  std::span<const float> labels, ClassWeights weights, const TrainConfig& config);

/// Mean and sample standard deviation per metric across runs; throws TooFewRuns.
struct RunAggregate {
    MeanStd auc;
    MeanStd uar;
};
RunAggregate aggregate_runs(std::span<const double> run_auc, std::span<const double> run_uar);

}  // namespace cider

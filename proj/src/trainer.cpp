#include "cider/trainer.hpp"

#include "cider/error.hpp"
#include "cider/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cider {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be positive");
    if (batch_size < 1) throw Error(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (max_epochs < 1) throw Error(ErrorKind::InvalidConfig, "max_epochs must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw Error(ErrorKind::InvalidConfig, "Adam betas must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw Error(ErrorKind::InvalidConfig, "adam_eps must be positive");
    if (!auto_class_weights && !(w_pos > 0.0 && w_neg > 0.0)) {
        throw Error(ErrorKind::InvalidConfig, "class weights must be positive");
    }
}

template <typename T>
void adam_update(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::int64_t t,
                 const TrainConfig& config) {
    if (t < 1) throw Error(ErrorKind::InvalidArgument, "Adam step index starts at 1");
    const double b1 = config.adam_beta1, b2 = config.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads.empty() ? 0.0 : static_cast<double>(grads[i]);
        const double mi = b1 * m[i] + (1.0 - b1) * g;
        const double vi = b2 * v[i] + (1.0 - b2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double step = config.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + config.adam_eps);
        params[i] = static_cast<T>(params[i] - step);
    }
}

template <typename T>
void adam_step(ModelParams<T>& params, const std::vector<std::vector<T>>& grads, AdamState<T>& state,
               const TrainConfig& config) {
    if (grads.size() != params.tensors.size()) {
        throw Error(ErrorKind::DimensionMismatch, "one gradient entry per parameter tensor expected");
    }
    if (state.m.empty()) {
        for (const auto& t : params.tensors) {
            state.m.emplace_back(t.numel(), T(0));
            state.v.emplace_back(t.numel(), T(0));
        }
    }
    ++state.step;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (!params.trainable[i]) continue;
        auto& data = params.tensors[i].data;
        if (!grads[i].empty() && grads[i].size() != data.size()) {
            throw Error(ErrorKind::DimensionMismatch, "gradient size mismatch for " + params.names[i]);
        }
        adam_update<T>(data, grads[i], state.m[i], state.v[i], state.step, config);
    }
}

const ModelInput& sample_chunk(const std::vector<ModelInput>& inputs, Rng& rng) {
    if (inputs.empty()) throw Error(ErrorKind::EmptyList, "no chunks to sample from");
    return inputs[static_cast<std::size_t>(rng.below(inputs.size()))];
}

ClassWeights auto_class_weights(std::span<const Example> train) {
    std::size_t pos = 0;
    for (const auto& e : train) pos += e.label == 1 ? 1 : 0;
    const std::size_t neg = train.size() - pos;
    if (pos == 0) throw Error(ErrorKind::NoPositives, "training split has no positive examples");
    if (neg == 0) throw Error(ErrorKind::NoNegatives, "training split has no negative examples");
    const double n = static_cast<double>(train.size());
    return {n / (2.0 * static_cast<double>(pos)), n / (2.0 * static_cast<double>(neg))};
}

double train_step(ModelParams<float>& params, AdamState<float>& state, const std::vector<const ModelInput*>& batch,
                  std::span<const float> labels, ClassWeights weights, const TrainConfig& config) {
    ad::Graph<float> graph;
    auto x = graph.leaf(make_batch<float>(batch));
    auto result = forward(graph, params, x, ad::Mode::Train);
    auto prob = ad::sigmoid(result.logits);
    auto loss = ad::weighted_bce<float>(prob, labels, static_cast<float>(weights.w_pos),
                                        static_cast<float>(weights.w_neg));
    const double value = loss.value().data[0];
    graph.backward(loss);

    std::vector<std::vector<float>> grads(params.tensors.size());
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        grads[i] = graph.grad(result.param_vars[i]);
    }
    adam_step(params, grads, state, config);
    return value;
}

RunResult fit(const TrainDevSplit& split, const CiderConfig& model_config, const TrainConfig& train_config,
              const EpochCallback& on_epoch) {
    train_config.validate();
    if (split.train.empty()) throw Error(ErrorKind::EmptyDataset, "empty training split");
    if (split.dev.empty()) throw Error(ErrorKind::EmptyDataset, "empty development split");
    {
        std::set<std::string> train_ids;
        for (const auto& e : split.train) train_ids.insert(e.participant_id);
        for (const auto& e : split.dev) {
            if (train_ids.contains(e.participant_id)) {
                throw Error(ErrorKind::LeakageDetected, "participant " + e.participant_id + " in both train and dev");
            }
        }
    }

    const ClassWeights weights = train_config.auto_class_weights
                                     ? auto_class_weights(split.train)
                                     : ClassWeights{train_config.w_pos, train_config.w_neg};

    RunResult result;
    result.seed = train_config.seed;
    ModelParams<float> params = build_model<float>(model_config, train_config.seed);
    AdamState<float> state;
    Rng rng(mix_seed({train_config.seed, 0x5452414EULL}));

    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);
    double best_score = -1.0;

    for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
        rng.shuffle(order.begin(), order.end());
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train_config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
            std::vector<const ModelInput*> batch;
            std::vector<float> labels;
            for (std::size_t k = start; k < end; ++k) {
                const Example& ex = split.train[order[k]];
                result.participants_seen.insert(ex.participant_id);
                batch.push_back(&sample_chunk(*ex.chunks, rng));
                labels.push_back(static_cast<float>(ex.label));
            }
            const double loss = train_step(params, state, batch, labels, weights, train_config);
            loss_sum += loss * static_cast<double>(end - start);
        }
        const double train_loss = loss_sum / static_cast<double>(order.size());

        for (const auto& e : split.dev) result.participants_seen.insert(e.participant_id);
        const TaskMetrics dev = evaluate_task(params, split.dev);
        result.dev_auc_by_epoch.push_back(dev.auc);
        result.dev_uar_by_epoch.push_back(dev.uar);
        result.train_loss_by_epoch.push_back(train_loss);
        const double score = train_config.selection == SelectionMetric::Auc ? dev.auc : dev.uar;
        if (score > best_score) {
            best_score = score;
            result.best_epoch = epoch;
            result.final_params = params;
        }
        if (on_epoch) on_epoch(epoch, train_loss, dev.auc);
    }
    return result;
}

RunAggregate aggregate_runs(std::span<const double> run_auc, std::span<const double> run_uar) {
    if (run_auc.size() < 2 || run_uar.size() < 2) {
        throw Error(ErrorKind::TooFewRuns, "aggregation needs at least two runs");
    }
    return {mean_std(run_auc), mean_std(run_uar)};
}

template void adam_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                 std::int64_t, const TrainConfig&);
template void adam_update<double>(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                                  std::int64_t, const TrainConfig&);
template void adam_step<float>(ModelParams<float>&, const std::vector<std::vector<float>>&, AdamState<float>&,
                               const TrainConfig&);
template void adam_step<double>(ModelParams<double>&, const std::vector<std::vector<double>>&, AdamState<double>&,
                                const TrainConfig&);

}  // namespace cider

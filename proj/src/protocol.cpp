#include "cider/protocol.hpp"

#include "cider/error.hpp"
#include "cider/parallel.hpp"

#include <algorithm>
#include <mutex>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace cider {

const std::vector<Example>& ExampleStore::of(const std::string& participant_id) const {
    const auto it = by_participant.find(participant_id);
    if (it == by_participant.end()) {
        throw Error(ErrorKind::InvalidArgument, "no examples for participant " + participant_id);
    }
    return it->second;
}

ExampleStore build_examples(const TaskCohort& cohort, const SpectrogramConfig& config, int threads) {
    config.validate();
    struct Job {
        const Participant* participant;
        const RecordingPair* pair;
    };
    std::vector<Job> jobs;
    for (const Participant* p : cohort.members) {
        for (const auto& r : p->recordings) jobs.push_back({p, &r});
    }
    std::vector<std::shared_ptr<const std::vector<ModelInput>>> chunks(jobs.size());
    parallel_for(jobs.size(), worker_count(threads), [&](std::size_t i) {
        const AudioClip breath = conform_rate(read_wav(jobs[i].pair->breath_path), config);
        const AudioClip cough = conform_rate(read_wav(jobs[i].pair->cough_path), config);
        chunks[i] = std::make_shared<const std::vector<ModelInput>>(pair_segments(breath, cough, config));
    });
    ExampleStore store;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const std::string& id = jobs[i].participant->id;
        store.by_participant[id].push_back({id, cohort.label_of.at(id), std::move(chunks[i])});
    }
    return store;
}

RotationData rotation_examples(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                               const Rotation& rotation) {
    RotationData out;
    out.rotation = rotation;
    for (const Participant* p : cohort.members) {
        const int f = folds.fold(p->id);
        std::vector<Example>* dst = nullptr;
        if (f == rotation.test_fold) dst = &out.test;
        else if (f == rotation.dev_fold) dst = &out.train_dev.dev;
        else if (f == rotation.train_folds[0] || f == rotation.train_folds[1]) dst = &out.train_dev.train;
        if (!dst) continue;
        const auto& ex = store.of(p->id);
        dst->insert(dst->end(), ex.begin(), ex.end());
    }
    return out;
}

std::uint64_t fit_seed(std::uint64_t base_seed, int task, int run, int dev_fold) {
    return mix_seed({base_seed, 0x464954ULL, static_cast<std::uint64_t>(task), static_cast<std::uint64_t>(run),
                     static_cast<std::uint64_t>(dev_fold)});
}

void assert_no_test_participants(const std::set<std::string>& seen, const FoldAssignment& folds) {
    for (const auto& id : seen) {
        const auto it = folds.fold_of.find(id);
        if (it != folds.fold_of.end() && it->second == folds.test_fold) {
            throw Error(ErrorKind::LeakageDetected, "test-fold participant " + id + " reached training");
        }
    }
}

std::vector<FitRecord> train_task(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                                  const ProtocolConfig& config, const FitProgress& progress) {
    config.validate();
    const auto rots = rotations(folds);
    std::vector<RotationData> data;
    for (const auto& r : rots) data.push_back(rotation_examples(cohort, store, folds, r));

    const std::size_t jobs = static_cast<std::size_t>(config.runs) * rots.size();
    std::vector<FitRecord> records(jobs);
    std::mutex progress_mutex;
    parallel_for(jobs, worker_count(config.threads), [&](std::size_t j) {
        const int run = static_cast<int>(j / rots.size());
        const std::size_t r = j % rots.size();
        FitRecord rec;
        rec.task = cohort.task;
        rec.run = run;
        rec.dev_fold = rots[r].dev_fold;
        rec.train_folds = rots[r].train_folds;
        rec.seed = fit_seed(config.seed, cohort.task, run, rots[r].dev_fold);
        TrainConfig tc = config.train;
        tc.seed = rec.seed;
        EpochCallback cb;
        if (progress) {
            cb = [&](int epoch, double loss, double auc) {
                std::lock_guard lock(progress_mutex);
                progress(rec, epoch, loss, auc);
            };
        }
        rec.result = fit(data[r].train_dev, config.model, tc, cb);
        assert_no_test_participants(rec.result.participants_seen, folds);
        records[j] = std::move(rec);
    });
    return records;
}

namespace {

PairCounts count_pairs(const std::vector<Example>& examples) {
    return {static_cast<int>(examples.size()), static_cast<int>(2 * examples.size())};
}

}  // namespace

TaskEvaluation evaluate_models(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                               const std::vector<std::pair<FitRecord, const ModelParams<float>*>>& models,
                               const ProtocolConfig& config) {
    if (models.empty()) throw Error(ErrorKind::TooFewRuns, "no models to evaluate");
    const auto rots = rotations(folds);
    const RotationData data = rotation_examples(cohort, store, folds, rots[0]);
    if (data.test.empty()) throw Error(ErrorKind::EmptyDataset, "test fold is empty for task " + std::to_string(cohort.task));

    TaskEvaluation out;
    out.models.resize(models.size());
    parallel_for(models.size(), worker_count(config.threads), [&](std::size_t i) {
        ModelEvaluation& e = out.models[i];
        e.run = models[i].first.run;
        e.dev_fold = models[i].first.dev_fold;
        e.best_epoch = models[i].first.result.best_epoch;
        e.metrics = evaluate_task(*models[i].second, data.test, &e.predictions);
    });

    std::map<int, std::vector<const ModelEvaluation*>> by_run;
    for (const auto& e : out.models) by_run[e.run].push_back(&e);
    std::vector<TaskMetrics> per_run;
    for (const auto& [run, evals] : by_run) {
        TaskMetrics m = evals.front()->metrics;
        double auc = 0.0, uar_sum = 0.0;
        for (const auto* e : evals) {
            auc += e->metrics.auc;
            uar_sum += e->metrics.uar;
        }
        m.auc = auc / static_cast<double>(evals.size());
        m.uar = uar_sum / static_cast<double>(evals.size());
        per_run.push_back(m);
    }
    out.summary = summarize_runs("cider", cohort.task, per_run, config.ci_level);
    const PairCounts test = count_pairs(data.test);
    const PairCounts td = count_pairs(data.train_dev.train);
    const PairCounts dv = count_pairs(data.train_dev.dev);
    out.summary.test_pairs = test.pairs;
    out.summary.test_files = test.files;
    out.summary.train_dev_pairs = td.pairs + dv.pairs;
    out.summary.train_dev_files = td.files + dv.files;
    nlohmann::ordered_json per_model = nlohmann::ordered_json::array();
    for (const auto& e : out.models) {
        per_model.push_back({{"run", e.run},
                             {"dev_fold", e.dev_fold},
                             {"best_epoch", e.best_epoch},
                             {"auc", e.metrics.auc},
                             {"uar", e.metrics.uar}});
    }
    out.summary.extra["models"] = per_model;
    return out;
}

TaskOutcome run_cider_task(const TaskCohort& cohort, const ExampleStore& store, const FoldAssignment& folds,
                           const ProtocolConfig& config, const FitProgress& progress) {
    TaskOutcome out;
    out.fits = train_task(cohort, store, folds, config, progress);
    std::vector<std::pair<FitRecord, const ModelParams<float>*>> models;
    for (const auto& f : out.fits) models.emplace_back(f, &f.result.final_params);
    out.evaluation = evaluate_models(cohort, store, folds, models, config);
    return out;
}

std::map<std::string, std::vector<FeatureVector>> build_features(const TaskCohort& cohort,
                                                                 const FeatureConfig& config, int threads,
                                                                 const std::filesystem::path& cache) {
    struct Job {
        const Participant* participant;
        const RecordingPair* pair;
        std::string row_id;
    };
    std::vector<Job> jobs;
    for (const Participant* p : cohort.members) {
        for (std::size_t i = 0; i < p->recordings.size(); ++i) {
            jobs.push_back({p, &p->recordings[i], p->id + "#" + std::to_string(i)});
        }
    }

    std::vector<FeatureVector> rows;
    bool cached = false;
    if (!cache.empty() && std::filesystem::exists(cache)) {
        rows = read_feature_cache(cache);
        cached = rows.size() == jobs.size();
        for (std::size_t i = 0; cached && i < rows.size(); ++i) {
            cached = rows[i].recording_id == jobs[i].row_id && rows[i].values.size() == kFeaturesPerPair;
        }
    }
    if (!cached) {
        rows.assign(jobs.size(), {});
        parallel_for(jobs.size(), worker_count(threads), [&](std::size_t i) {
            rows[i] = extract_features(*jobs[i].pair, config, jobs[i].row_id);
        });
        if (!cache.empty()) write_feature_cache(cache, rows);
    }

    std::map<std::string, std::vector<FeatureVector>> out;
    for (std::size_t i = 0; i < jobs.size(); ++i) out[jobs[i].participant->id].push_back(std::move(rows[i]));
    return out;
}

BaselineOutcome run_baseline_task(const TaskCohort& cohort,
                                  const std::map<std::string, std::vector<FeatureVector>>& features,
                                  const FoldAssignment& folds, const ProtocolConfig& config) {
    config.validate();
    const auto rots = rotations(folds);
    auto gather = [&](auto&& keep) {
        std::vector<const FeatureVector*> rows;
        std::vector<int> labels;
        for (const Participant* p : cohort.members) {
            if (!keep(folds.fold(p->id))) continue;
            const auto it = features.find(p->id);
            if (it == features.end()) throw Error(ErrorKind::InvalidArgument, "no features for " + p->id);
            for (const auto& fv : it->second) {
                rows.push_back(&fv);
                labels.push_back(cohort.label_of.at(p->id));
            }
        }
        return make_rows(rows, labels);
    };

    std::vector<BaselineRotation> tuning_sets;
    for (const auto& r : rots) {
        tuning_sets.push_back({gather([&](int f) { return f == r.train_folds[0] || f == r.train_folds[1]; }),
                               gather([&](int f) { return f == r.dev_fold; })});
    }
    const LabeledRows test = gather([&](int f) { return f == folds.test_fold; });

    BaselineOutcome out;
    out.tuning = tune_complexity(tuning_sets, config.baseline);
    std::vector<int> truth;
    for (int y : test.y) truth.push_back(y == 1 ? 1 : 0);
    for (const auto& set : tuning_sets) {
        BaselineModel m = fit_baseline(set.train, out.tuning.best_c, config.baseline);
        const Eigen::VectorXd s = m.scores(test.x);
        std::vector<double> scores(s.data(), s.data() + s.size());
        std::vector<int> predicted;
        for (double v : scores) predicted.push_back(v >= 0.0 ? 1 : 0);
        out.metrics.push_back(compute_metrics(scores, predicted, truth, config.ci_level));
        out.models.push_back(std::move(m));
    }
    out.summary = summarize_runs("baseline", cohort.task, out.metrics, config.ci_level);
    out.summary.test_pairs = static_cast<int>(test.y.size());
    out.summary.test_files = 2 * out.summary.test_pairs;
    out.summary.train_dev_pairs = static_cast<int>(tuning_sets[0].train.y.size() + tuning_sets[0].dev.y.size());
    out.summary.train_dev_files = 2 * out.summary.train_dev_pairs;
    out.summary.extra["best_c"] = out.tuning.best_c;
    out.summary.extra["c_grid"] = out.tuning.grid;
    out.summary.extra["mean_dev_auc"] = out.tuning.mean_dev_auc;
    return out;
}

void tune_allocator() {
#if defined(__GLIBC__)
    // Keep freed activation buffers in the heap instead of returning them to
    // the kernel after every batch.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace cider

#include "commands.hpp"

#include "cider/config.hpp"
#include "cider/dataset.hpp"
#include "cider/error.hpp"
#include "cider/evaluator.hpp"
#include "cider/protocol.hpp"
#include "cider/synth.hpp"
#include "cider/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

namespace cider::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct SynthArgs {
    std::string out;
    std::uint64_t seed = 1;
    std::string preset = "full-cohort";
    std::string counts;
    double snr_db = 6.0;
    double band_lo = 5000.0;
    double band_hi = 7000.0;
    double min_seconds = 1.0;
    double max_seconds = 19.0;
    int threads = 0;
};

struct FoldArgs {
    std::string manifest;
    std::uint64_t seed = 0;
    std::string out;
};

struct TrainArgs {
    std::string manifest;
    std::string folds;
    int task = 4;
    std::optional<int> runs;
    std::string config;
    std::string out = "runs";
    std::optional<int> max_epochs;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

struct EvalArgs {
    std::string checkpoints;
    int task = 4;
    std::string baseline;
    std::string out;
    std::optional<int> threads;
};

struct BaselineArgs {
    std::string manifest;
    std::string folds;
    int task = 4;
    std::string config;
    std::string out = "runs";
    std::optional<int> threads;
};

struct ReportArgs {
    std::vector<std::string> cider;
    std::vector<std::string> baseline;
    std::string out;
};

fs::path task_dir(const fs::path& root, int task) { return root / ("task" + std::to_string(task)); }

void write_json(const fs::path& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedHeader, path.string() + ": " + e.what());
    }
}

ProtocolConfig config_from_text(const std::string& text) {
    ProtocolConfig c;
    for (const auto& [k, v] : parse_key_values(text, "run manifest")) apply_setting(c, k, v);
    c.validate();
    return c;
}

ProtocolConfig resolve_config(const std::string& path, const std::optional<int>& runs,
                              const std::optional<int>& max_epochs, const std::optional<std::uint64_t>& seed,
                              const std::optional<int>& threads) {
    ProtocolConfig c = path.empty() ? ProtocolConfig{} : load_config(path);
    if (runs) c.runs = *runs;
    if (max_epochs) c.train.max_epochs = *max_epochs;
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    c.validate();
    return c;
}

std::map<Stratum, int> parse_counts(const std::string& text) {
    std::vector<int> values;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(std::stoi(item));
    if (values.size() != kAllStrata.size()) {
        throw Error(ErrorKind::InvalidConfig, "--counts needs 5 comma-separated values");
    }
    std::map<Stratum, int> out;
    for (std::size_t i = 0; i < values.size(); ++i) out[kAllStrata[i]] = values[i];
    return out;
}

ordered_json ttest_json(const TTestResult& t) {
    return {{"t", t.t}, {"p", t.p}, {"df", t.df}, {"significant_0.05", t.p < 0.05}, {"significant_0.01", t.p < 0.01}};
}

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// ---------------------------------------------------------------------------

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    if (a.preset != "full-cohort") throw Error(ErrorKind::InvalidConfig, "unknown preset " + a.preset);
    SynthConfig c;
    c.seed = a.seed;
    if (!a.counts.empty()) c.counts = parse_counts(a.counts);
    c.snr_db = a.snr_db;
    c.band_lo = a.band_lo;
    c.band_hi = a.band_hi;
    c.min_seconds = a.min_seconds;
    c.max_seconds = a.max_seconds;
    const fs::path manifest = generate_corpus(c, a.out, a.threads);
    const auto participants = load_manifest(manifest);
    int positives = 0;
    for (const auto& p : participants) positives += p.covid_positive ? 1 : 0;
    out << "wrote " << participants.size() << " participants (" << positives << " positive) to "
        << manifest.string() << '\n';
    return kExitOk;
}

int cmd_folds(const FoldArgs& a, std::ostream& out, std::ostream& err) {
    const auto participants = load_manifest(a.manifest);
    std::vector<std::string> warnings;
    const auto folds = make_folds(participants, a.seed, &warnings);
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    write_folds(a.out, folds, participants);

    // Recount from the written file so the summary reflects what was saved.
    const auto saved = read_folds(a.out);
    check_folds_cover(saved, participants);
    int worst = 0;
    for (const auto& [s, row] : stratum_fold_tallies(saved, participants)) {
        const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
        worst = std::max(worst, *hi - *lo);
        out << stratum_name(s) << ':';
        for (int n : row) out << ' ' << n;
        out << "  spread " << (*hi - *lo) << '\n';
    }
    out << "participants " << saved.fold_of.size() << ", test fold " << saved.test_fold << ", max spread " << worst
        << '\n';
    return kExitOk;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
    tune_allocator();
    const ProtocolConfig config = resolve_config(a.config, a.runs, a.max_epochs, a.seed, a.threads);
    const auto participants = load_manifest(a.manifest);
    const auto folds = read_folds(a.folds);
    check_folds_cover(folds, participants);
    const TaskCohort cohort = select_task(participants, a.task);
    const ExampleStore store = build_examples(cohort, config.spectrogram, config.threads);

    const fs::path dir = task_dir(a.out, a.task);
    fs::create_directories(dir);
    auto fits = train_task(cohort, store, folds, config, [&](const FitRecord& r, int epoch, double loss, double auc) {
        out << "task " << r.task << " run " << r.run << " dev fold " << r.dev_fold << " epoch " << epoch
            << " loss " << loss << " dev auc " << auc << '\n'
            << std::flush;
    });

    const fs::path log_path = dir / "train_log.csv";
    std::ofstream log(log_path);
    if (!log) throw Error(ErrorKind::IoFailure, "cannot write " + log_path.string());
    log << "run,dev_fold,epoch,train_loss,dev_auc,dev_uar\n" << std::setprecision(17);
    ordered_json checkpoints = ordered_json::array();
    ordered_json seeds = ordered_json::array();
    for (const auto& f : fits) {
        for (std::size_t e = 0; e < f.result.dev_auc_by_epoch.size(); ++e) {
            log << f.run << ',' << f.dev_fold << ',' << e + 1 << ',' << f.result.train_loss_by_epoch[e] << ','
                << f.result.dev_auc_by_epoch[e] << ',' << f.result.dev_uar_by_epoch[e] << '\n';
        }
        const std::string name = "run" + std::to_string(f.run) + "_rot" + std::to_string(f.dev_fold) + ".ckpt";
        ordered_json meta;
        meta["task"] = f.task;
        meta["run"] = f.run;
        meta["dev_fold"] = f.dev_fold;
        meta["train_folds"] = f.train_folds;
        meta["test_fold"] = folds.test_fold;
        meta["folds_seed"] = folds.seed;
        meta["seed"] = f.seed;
        meta["best_epoch"] = f.result.best_epoch;
        meta["dev_auc_by_epoch"] = f.result.dev_auc_by_epoch;
        meta["dev_uar_by_epoch"] = f.result.dev_uar_by_epoch;
        meta["train_loss_by_epoch"] = f.result.train_loss_by_epoch;
        save_model(dir / name, f.result.final_params, meta);
        checkpoints.push_back(name);
        seeds.push_back(f.seed);
    }

    ordered_json manifest;
    manifest["tool"] = "cider";
    manifest["version"] = kVersion;
    manifest["command"] = "train";
    manifest["task"] = a.task;
    manifest["manifest"] = absolute(a.manifest);
    manifest["folds"] = absolute(a.folds);
    manifest["folds_seed"] = folds.seed;
    manifest["config"] = config_to_text(config);
    manifest["seeds"] = seeds;
    manifest["checkpoints"] = checkpoints;
    manifest["train_log"] = "train_log.csv";
    manifest["report"] = "cider_report.json";
    write_json(dir / "run_manifest.json", manifest);
    out << "wrote " << fits.size() << " checkpoints to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_evaluate(const EvalArgs& a, std::ostream& out) {
    tune_allocator();
    const fs::path dir = task_dir(a.checkpoints, a.task);
    ordered_json manifest = read_json(dir / "run_manifest.json");
    if (manifest.at("task").get<int>() != a.task) {
        throw Error(ErrorKind::InvalidArgument, "run manifest belongs to task " + manifest.at("task").dump());
    }
    ProtocolConfig config = config_from_text(manifest.at("config").get<std::string>());
    if (a.threads) config.threads = *a.threads;
    const auto participants = load_manifest(manifest.at("manifest").get<std::string>());
    const auto folds = read_folds(manifest.at("folds").get<std::string>());
    check_folds_cover(folds, participants);
    const TaskCohort cohort = select_task(participants, a.task);

    std::vector<std::pair<FitRecord, ModelParams<float>>> loaded;
    for (const auto& name : manifest.at("checkpoints")) {
        const fs::path path = dir / name.get<std::string>();
        ordered_json meta;
        ModelParams<float> params = load_model(path, &meta);
        const int dev = meta.at("dev_fold").get<int>();
        const auto train = meta.at("train_folds").get<std::array<int, 2>>();
        if (meta.at("test_fold").get<int>() != folds.test_fold || dev == folds.test_fold ||
            train[0] == folds.test_fold || train[1] == folds.test_fold) {
            throw Error(ErrorKind::LeakageDetected, path.string() + " was trained or tuned on the test fold");
        }
        if (meta.at("folds_seed").get<std::uint64_t>() != folds.seed) {
            throw Error(ErrorKind::LeakageDetected, path.string() + " was trained on a different fold assignment");
        }
        FitRecord r;
        r.task = a.task;
        r.run = meta.at("run").get<int>();
        r.dev_fold = dev;
        r.train_folds = train;
        r.seed = meta.at("seed").get<std::uint64_t>();
        r.result.best_epoch = meta.at("best_epoch").get<int>();
        loaded.emplace_back(std::move(r), std::move(params));
    }

    // Only test-fold audio is needed here.
    TaskCohort test_cohort = cohort;
    test_cohort.members.clear();
    int train_dev_pairs = 0;
    for (const Participant* p : cohort.members) {
        if (folds.fold(p->id) == folds.test_fold) test_cohort.members.push_back(p);
        else train_dev_pairs += static_cast<int>(p->recordings.size());
    }
    const ExampleStore store = build_examples(test_cohort, config.spectrogram, config.threads);
    std::vector<std::pair<FitRecord, const ModelParams<float>*>> models;
    for (const auto& [r, p] : loaded) models.emplace_back(r, &p);
    TaskEvaluation eval = evaluate_models(test_cohort, store, folds, models, config);
    eval.summary.train_dev_pairs = train_dev_pairs;
    eval.summary.train_dev_files = 2 * train_dev_pairs;

    if (!a.baseline.empty()) {
        const MetricsReport base = read_report(a.baseline);
        for (const auto& s : base.tasks) {
            if (s.task != a.task) continue;
            if (s.run_auc.size() >= 2 && eval.summary.run_auc.size() >= 2) {
                const Comparison cmp = compare_runs(eval.summary, s);
                eval.summary.extra["ttest_vs_baseline"] = {{"auc", ttest_json(cmp.auc)}, {"uar", ttest_json(cmp.uar)}};
            }
        }
    }
    for (const auto& m : eval.models) {
        write_scores_csv(dir / ("scores_run" + std::to_string(m.run) + "_rot" + std::to_string(m.dev_fold) + ".csv"),
                         m.predictions);
    }
    MetricsReport report;
    report.tasks.push_back(eval.summary);
    const fs::path report_path = a.out.empty() ? dir / manifest.value("report", "cider_report.json") : fs::path(a.out);
    write_report(report_path, report);
    out << render_table(report, std::nullopt);
    out << "AUC 95% CI [" << eval.summary.auc_ci.lo << ", " << eval.summary.auc_ci.hi << "], UAR 95% CI ["
        << eval.summary.uar_ci.lo << ", " << eval.summary.uar_ci.hi << "]\n";
    out << "test: " << eval.summary.test_pairs << " pairs / " << eval.summary.test_files << " files; train+dev: "
        << eval.summary.train_dev_pairs << " pairs / " << eval.summary.train_dev_files << " files\n";
    out << "wrote " << report_path.string() << '\n';
    return kExitOk;
}

int cmd_baseline(const BaselineArgs& a, std::ostream& out) {
    const ProtocolConfig config = resolve_config(a.config, std::nullopt, std::nullopt, std::nullopt, a.threads);
    const auto participants = load_manifest(a.manifest);
    const auto folds = read_folds(a.folds);
    check_folds_cover(folds, participants);
    const TaskCohort cohort = select_task(participants, a.task);
    const fs::path dir = task_dir(a.out, a.task);
    fs::create_directories(dir);

    const auto features = build_features(cohort, config.baseline.features, config.threads, dir / "features.feat");
    const BaselineOutcome outcome = run_baseline_task(cohort, features, folds, config);
    const auto rots = rotations(folds);
    for (std::size_t i = 0; i < outcome.models.size(); ++i) {
        auto tensors = pca_to_tensors(outcome.models[i].pca);
        for (auto& t : svm_to_tensors(outcome.models[i].svm)) tensors.push_back(std::move(t));
        ad::write_checkpoint(dir / ("baseline_rot" + std::to_string(rots[i].dev_fold) + ".ckpt"), tensors);
    }
    MetricsReport report;
    report.tasks.push_back(outcome.summary);
    const fs::path report_path = dir / "baseline_report.json";
    write_report(report_path, report);

    out << "C grid:";
    for (std::size_t g = 0; g < outcome.tuning.grid.size(); ++g) {
        out << ' ' << outcome.tuning.grid[g] << "->" << outcome.tuning.mean_dev_auc[g];
    }
    out << "\nselected C " << outcome.tuning.best_c << " (mean dev AUC " << outcome.tuning.best_dev_auc << ")\n";
    out << "test AUC " << outcome.summary.auc.mean << " +- " << outcome.summary.auc.std << ", UAR "
        << outcome.summary.uar.mean << " +- " << outcome.summary.uar.std << '\n';
    out << "wrote " << report_path.string() << '\n';
    return kExitOk;
}

MetricsReport merge_reports(const std::vector<std::string>& paths) {
    MetricsReport merged;
    for (const auto& p : paths) {
        for (auto& s : read_report(p).tasks) merged.tasks.push_back(std::move(s));
    }
    std::stable_sort(merged.tasks.begin(), merged.tasks.end(),
                     [](const ModelSummary& x, const ModelSummary& y) { return x.task < y.task; });
    return merged;
}

int cmd_report(const ReportArgs& a, std::ostream& out) {
    const MetricsReport cider = merge_reports(a.cider);
    std::optional<MetricsReport> baseline;
    if (!a.baseline.empty()) baseline = merge_reports(a.baseline);
    out << render_table(cider, baseline);

    ordered_json comparisons = ordered_json::array();
    if (baseline) {
        for (const auto& c : cider.tasks) {
            for (const auto& b : baseline->tasks) {
                if (b.task != c.task || c.run_auc.size() < 2 || b.run_auc.size() < 2) continue;
                const Comparison cmp = compare_runs(c, b);
                comparisons.push_back({{"task", c.task}, {"auc", ttest_json(cmp.auc)}, {"uar", ttest_json(cmp.uar)}});
                out << "task " << c.task << ": AUC t=" << cmp.auc.t << " p=" << cmp.auc.p << "; UAR t=" << cmp.uar.t
                    << " p=" << cmp.uar.p << '\n';
            }
        }
    }
    if (!a.out.empty()) {
        ordered_json j;
        j["cider"] = report_to_json(cider);
        j["baseline"] = baseline ? report_to_json(*baseline) : ordered_json(nullptr);
        j["comparisons"] = comparisons;
        write_json(a.out, j);
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"CIdeR: breath/cough spectrogram CNN, SVM baseline and evaluation protocol"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate the synthetic breath/cough corpus");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.seed, "Corpus seed");
    s->add_option("--preset", synth.preset, "Cohort preset")->check(CLI::IsMember({"full-cohort"}));
    s->add_option("--counts", synth.counts, "Participants per stratum (5 comma-separated values)");
    s->add_option("--snr", synth.snr_db, "Signature level below the recording power, dB");
    s->add_option("--band-lo", synth.band_lo, "Signature band lower edge, Hz");
    s->add_option("--band-hi", synth.band_hi, "Signature band upper edge, Hz");
    s->add_option("--min-seconds", synth.min_seconds, "Shortest recording, s");
    s->add_option("--max-seconds", synth.max_seconds, "Longest recording, s");
    s->add_option("--threads", synth.threads, "Worker threads (0 = auto)");

    FoldArgs folds;
    auto* f = app.add_subcommand("folds", "Assign participants to stratified folds");
    f->add_option("--manifest", folds.manifest, "Manifest CSV")->required();
    f->add_option("--seed", folds.seed, "Fold seed");
    f->add_option("--out", folds.out, "Folds JSON to write")->required();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train runs x 3 rotations for one task");
    t->add_option("--manifest", train.manifest, "Manifest CSV")->required();
    t->add_option("--folds", train.folds, "Folds JSON")->required();
    t->add_option("--task", train.task, "Task 1-4")->required()->check(CLI::Range(1, 4));
    t->add_option("--runs", train.runs, "Training runs per rotation");
    t->add_option("--config", train.config, "key=value config file");
    t->add_option("--out", train.out, "Output root");
    t->add_option("--max-epochs", train.max_epochs, "Override max_epochs");
    t->add_option("--seed", train.seed, "Override the protocol seed");
    t->add_option("--threads", train.threads, "Worker threads (0 = auto)");

    EvalArgs eval;
    auto* e = app.add_subcommand("evaluate", "Score trained checkpoints on the test fold");
    e->add_option("--checkpoints", eval.checkpoints, "Output root used by train")->required();
    e->add_option("--task", eval.task, "Task 1-4")->required()->check(CLI::Range(1, 4));
    e->add_option("--baseline", eval.baseline, "Baseline report for the t-test");
    e->add_option("--out", eval.out, "Report path (default <root>/task<T>/cider_report.json)");
    e->add_option("--threads", eval.threads, "Worker threads (0 = auto)");

    BaselineArgs base;
    auto* b = app.add_subcommand("baseline", "Features + PCA + linear SVM reference");
    b->add_option("--manifest", base.manifest, "Manifest CSV")->required();
    b->add_option("--folds", base.folds, "Folds JSON")->required();
    b->add_option("--task", base.task, "Task 1-4")->required()->check(CLI::Range(1, 4));
    b->add_option("--config", base.config, "key=value config file");
    b->add_option("--out", base.out, "Output root");
    b->add_option("--threads", base.threads, "Worker threads (0 = auto)");

    ReportArgs report;
    auto* r = app.add_subcommand("report", "Combine reports into a results table");
    r->add_option("--cider", report.cider, "CIdeR report(s)")->required();
    r->add_option("--baseline", report.baseline, "Baseline report(s)");
    r->add_option("--out", report.out, "Combined JSON output");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (f->parsed()) return cmd_folds(folds, out, err);
        if (t->parsed()) return cmd_train(train, out);
        if (e->parsed()) return cmd_evaluate(eval, out);
        if (b->parsed()) return cmd_baseline(base, out);
        if (r->parsed()) return cmd_report(report, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitFailure;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace cider::cli

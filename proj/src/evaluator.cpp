#include "cider/evaluator.hpp"

#include "cider/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cider {

std::vector<PredictionRecord> predict_examples(const ModelParams<float>& params, const std::vector<Example>& examples) {
    std::vector<const ModelInput*> inputs;
    for (const auto& e : examples) {
        if (!e.chunks || e.chunks->empty()) {
            throw Error(ErrorKind::EmptyChunks, "example " + e.participant_id + " has no chunks");
        }
        for (const auto& c : *e.chunks) inputs.push_back(&c);
    }
    const std::vector<float> logits = predict_logits(params, inputs);

    std::vector<PredictionRecord> records;
    records.reserve(examples.size());
    std::size_t offset = 0;
    for (const auto& e : examples) {
        PredictionRecord r;
        r.participant_id = e.participant_id;
        r.true_label = e.label;
        r.chunk_logits.assign(logits.begin() + static_cast<std::ptrdiff_t>(offset),
                              logits.begin() + static_cast<std::ptrdiff_t>(offset + e.chunks->size()));
        offset += e.chunks->size();
        const VoteResult vote = majority_vote(r.chunk_logits);
        r.vote_label = vote.label;
        r.score = vote.score;
        records.push_back(std::move(r));
    }
    return records;
}

TaskMetrics compute_metrics(std::span<const double> scores, std::span<const int> predicted, std::span<const int> truth,
                            double level) {
    if (scores.size() != truth.size() || predicted.size() != truth.size()) {
        throw Error(ErrorKind::DimensionMismatch, "scores, predictions and labels must have equal length");
    }
    TaskMetrics m;
    m.auc = auc_roc(scores, truth);
    m.uar = uar(predicted, truth);
    for (int y : truth) (y == 1 ? m.n_pos : m.n_neg) += 1;
    m.auc_ci = auc_ci_hanley_mcneil(m.auc, m.n_pos, m.n_neg, level);
    m.uar_ci = uar_ci_normal(m.uar, m.n_pos + m.n_neg, level);
    return m;
}

TaskMetrics compute_metrics(const std::vector<PredictionRecord>& records, double level) {
    std::vector<double> scores;
    std::vector<int> predicted, truth;
    for (const auto& r : records) {
        scores.push_back(r.score);
        predicted.push_back(r.vote_label);
        truth.push_back(r.true_label);
    }
    return compute_metrics(scores, predicted, truth, level);
}

TaskMetrics evaluate_task(const ModelParams<float>& params, const std::vector<Example>& test,
                          std::vector<PredictionRecord>* records) {
    auto preds = predict_examples(params, test);
    TaskMetrics m = compute_metrics(preds);
    if (records) *records = std::move(preds);
    return m;
}

ModelSummary summarize_runs(const std::string& model, int task, const std::vector<TaskMetrics>& runs, double level) {
    if (runs.empty()) throw Error(ErrorKind::TooFewRuns, "no runs to summarize");
    ModelSummary s;
    s.model = model;
    s.task = task;
    for (const auto& r : runs) {
        s.run_auc.push_back(r.auc);
        s.run_uar.push_back(r.uar);
    }
    s.auc = mean_std(s.run_auc);
    s.uar = mean_std(s.run_uar);
    s.n_pos = runs.front().n_pos;
    s.n_neg = runs.front().n_neg;
    s.auc_ci = auc_ci_hanley_mcneil(s.auc.mean, s.n_pos, s.n_neg, level);
    s.uar_ci = uar_ci_normal(s.uar.mean, s.n_pos + s.n_neg, level);
    return s;
}

Comparison compare_runs(const ModelSummary& cider, const ModelSummary& baseline, double alpha) {
    return {two_sample_ttest(cider.run_auc, baseline.run_auc, alpha),
            two_sample_ttest(cider.run_uar, baseline.run_uar, alpha)};
}

namespace {

nlohmann::ordered_json interval_json(Interval i) { return nlohmann::ordered_json::array({i.lo, i.hi}); }

Interval interval_from(const nlohmann::ordered_json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

nlohmann::ordered_json summary_to_json(const ModelSummary& s) {
    nlohmann::ordered_json j;
    j["model"] = s.model;
    j["task"] = s.task;
    j["auc"] = s.auc.mean;
    j["auc_std"] = s.auc.std;
    j["auc_ci"] = interval_json(s.auc_ci);
    j["uar"] = s.uar.mean;
    j["uar_std"] = s.uar.std;
    j["uar_ci"] = interval_json(s.uar_ci);
    j["run_auc"] = s.run_auc;
    j["run_uar"] = s.run_uar;
    j["n_pos"] = s.n_pos;
    j["n_neg"] = s.n_neg;
    j["test_pairs"] = s.test_pairs;
    j["test_files"] = s.test_files;
    j["train_dev_pairs"] = s.train_dev_pairs;
    j["train_dev_files"] = s.train_dev_files;
    j["extra"] = s.extra;
    return j;
}

ModelSummary summary_from_json(const nlohmann::ordered_json& j) {
    ModelSummary s;
    s.model = j.at("model").get<std::string>();
    s.task = j.at("task").get<int>();
    s.auc = {j.at("auc").get<double>(), j.at("auc_std").get<double>()};
    s.auc_ci = interval_from(j.at("auc_ci"));
    s.uar = {j.at("uar").get<double>(), j.at("uar_std").get<double>()};
    s.uar_ci = interval_from(j.at("uar_ci"));
    s.run_auc = j.at("run_auc").get<std::vector<double>>();
    s.run_uar = j.at("run_uar").get<std::vector<double>>();
    s.n_pos = j.at("n_pos").get<int>();
    s.n_neg = j.at("n_neg").get<int>();
    s.test_pairs = j.value("test_pairs", 0);
    s.test_files = j.value("test_files", 0);
    s.train_dev_pairs = j.value("train_dev_pairs", 0);
    s.train_dev_files = j.value("train_dev_files", 0);
    s.extra = j.value("extra", nlohmann::ordered_json::object());
    return s;
}

nlohmann::ordered_json report_to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    j["tasks"] = nlohmann::ordered_json::array();
    for (const auto& s : report.tasks) j["tasks"].push_back(summary_to_json(s));
    return j;
}

MetricsReport report_from_json(const nlohmann::ordered_json& j) {
    MetricsReport r;
    for (const auto& t : j.at("tasks")) r.tasks.push_back(summary_from_json(t));
    return r;
}

void write_report(const std::filesystem::path& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << report_to_json(report).dump(2) << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + path.string());
}

MetricsReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
    try {
        return report_from_json(nlohmann::ordered_json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::MalformedHeader, path.string() + ": " + e.what());
    }
}

namespace {

const ModelSummary* find_task(const MetricsReport& r, int task) {
    for (const auto& s : r.tasks) {
        if (s.task == task) return &s;
    }
    return nullptr;
}

std::string cell(const MeanStd& v, const char* mark) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.3f +- %.3f%s", v.mean, v.std, mark);
    return buf;
}

// '*' / '**' when `mine` beats `other` with p below 0.05 / 0.01.
const char* significance(const TTestResult& t, double mine, double other) {
    if (!(mine > other)) return "";
    if (t.p < 0.01) return "**";
    if (t.p < 0.05) return "*";
    return "";
}

}  // namespace

std::string render_table(const MetricsReport& cider, const std::optional<MetricsReport>& baseline) {
    std::vector<int> tasks;
    for (const auto& s : cider.tasks) tasks.push_back(s.task);
    if (baseline) {
        for (const auto& s : baseline->tasks) {
            if (!find_task(cider, s.task)) tasks.push_back(s.task);
        }
    }
    std::sort(tasks.begin(), tasks.end());

    std::ostringstream out;
    out << std::left << std::setw(6) << "Task" << std::setw(20) << "CIdeR AUC" << std::setw(20) << "CIdeR UAR";
    if (baseline) out << std::setw(20) << "Baseline AUC" << std::setw(20) << "Baseline UAR";
    out << '\n';

    const std::string empty = "-";
    for (int task : tasks) {
        const ModelSummary* c = find_task(cider, task);
        const ModelSummary* b = baseline ? find_task(*baseline, task) : nullptr;
        std::string c_auc = c ? cell(c->auc, "") : empty;
        std::string c_uar = c ? cell(c->uar, "") : empty;
        std::string b_auc = b ? cell(b->auc, "") : empty;
        std::string b_uar = b ? cell(b->uar, "") : empty;
        if (c && b && c->run_auc.size() >= 2 && b->run_auc.size() >= 2) {
            const Comparison cmp = compare_runs(*c, *b);
            c_auc = cell(c->auc, significance(cmp.auc, c->auc.mean, b->auc.mean));
            c_uar = cell(c->uar, significance(cmp.uar, c->uar.mean, b->uar.mean));
            b_auc = cell(b->auc, significance(cmp.auc, b->auc.mean, c->auc.mean));
            b_uar = cell(b->uar, significance(cmp.uar, b->uar.mean, c->uar.mean));
        }
        out << std::setw(6) << task << std::setw(20) << c_auc << std::setw(20) << c_uar;
        if (baseline) out << std::setw(20) << b_auc << std::setw(20) << b_uar;
        out << '\n';
    }
    if (baseline) out << "* p < 0.05, ** p < 0.01 (two-sided pooled t-test over runs)\n";
    return out.str();
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<PredictionRecord>& records) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
    out << "participant_id,true_label,vote_label,score,chunks\n";
    out << std::setprecision(17);
    for (const auto& r : records) {
        out << r.participant_id << ',' << r.true_label << ',' << r.vote_label << ',' << r.score << ','
            << r.chunk_logits.size() << '\n';
    }
}

}  // namespace cider

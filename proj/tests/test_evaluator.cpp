#include "cider/error.hpp"
#include "cider/evaluator.hpp"

#include "oracles.hpp"
#include "tempdir.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace cider;

namespace {

std::vector<Example> random_examples(int count, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<float> u(-80.0f, 0.0f);
    std::vector<Example> out;
    for (int i = 0; i < count; ++i) {
        auto chunks = std::make_shared<std::vector<ModelInput>>(static_cast<std::size_t>(1 + i % 3));
        for (auto& c : *chunks) {
            c.freq_bins = 32;
            c.frames = 32;
            c.data.resize(2 * 32 * 32);
            for (auto& v : c.data) v = u(gen);
        }
        out.push_back({"E" + std::to_string(i), i % 2, chunks});
    }
    return out;
}

ModelSummary summary(const std::string& model, int task, std::vector<double> auc, std::vector<double> uar) {
    std::vector<TaskMetrics> runs;
    for (std::size_t i = 0; i < auc.size(); ++i) {
        TaskMetrics m;
        m.auc = auc[i];
        m.uar = uar[i];
        m.n_pos = 20;
        m.n_neg = 60;
        runs.push_back(m);
    }
    return summarize_runs(model, task, runs);
}

}  // namespace

TEST_CASE("per-pair predictions vote over chunk logits") {
    CiderConfig c;
    c.channels = {4, 4, 8, 8};
    const auto params = build_model<float>(c, 3);
    const auto ex = random_examples(6, 1);
    const auto records = predict_examples(params, ex);
    REQUIRE(records.size() == ex.size());
    for (std::size_t i = 0; i < ex.size(); ++i) {
        CHECK(records[i].participant_id == ex[i].participant_id);
        CHECK(records[i].true_label == ex[i].label);
        REQUIRE(records[i].chunk_logits.size() == ex[i].chunks->size());
        const auto direct = predict_logits(params, {&(*ex[i].chunks)[0]});
        CHECK(records[i].chunk_logits[0] == doctest::Approx(direct[0]).epsilon(1e-5));
        const auto vote = majority_vote(records[i].chunk_logits);
        CHECK(records[i].vote_label == vote.label);
        CHECK(records[i].score == vote.score);
    }
    std::vector<Example> empty{{"Z", 0, std::make_shared<std::vector<ModelInput>>()}};
    CHECK_THROWS_AS(predict_examples(params, empty), Error);
}

TEST_CASE("metrics from scores, votes and labels") {
    const std::vector<double> scores{0.9, 0.8, 0.3, 0.6, 0.2};
    const std::vector<int> pred{1, 1, 0, 1, 0};
    const std::vector<int> truth{1, 1, 1, 0, 0};
    const auto m = compute_metrics(scores, pred, truth);
    CHECK(m.auc == oracle::pairwise_auc(scores, truth));
    CHECK(m.uar == doctest::Approx(0.5 * (2.0 / 3.0 + 0.5)));
    CHECK(m.n_pos == 3);
    CHECK(m.n_neg == 2);
    const auto ci = auc_ci_hanley_mcneil(m.auc, 3, 2);
    CHECK(m.auc_ci.lo == ci.lo);
    CHECK(m.auc_ci.hi == ci.hi);
    CHECK_THROWS_AS(compute_metrics(scores, pred, std::vector<int>{1, 0}), Error);
}

TEST_CASE("run summaries aggregate mean and sample std") {
    const auto s = summary("cider", 4, {0.8, 0.9, 0.85}, {0.7, 0.75, 0.8});
    CHECK(s.auc.mean == doctest::Approx(0.85));
    CHECK(s.auc.std == doctest::Approx(0.05));
    CHECK(s.uar.mean == doctest::Approx(0.75));
    const auto ci = auc_ci_hanley_mcneil(0.85, 20, 60);
    CHECK(s.auc_ci.lo == doctest::Approx(ci.lo));
    CHECK_THROWS_AS(summarize_runs("cider", 1, {}), Error);
}

TEST_CASE("report JSON round trip") {
    TempDir dir("eval");
    MetricsReport r;
    r.tasks.push_back(summary("cider", 1, {0.7, 0.72}, {0.6, 0.61}));
    r.tasks.push_back(summary("cider", 4, {0.9, 0.95}, {0.8, 0.85}));
    r.tasks[1].test_pairs = 89;
    r.tasks[1].extra["note"] = "x";
    write_report(dir / "r.json", r);
    const auto back = read_report(dir / "r.json");
    REQUIRE(back.tasks.size() == 2);
    CHECK(back.tasks[1].run_auc == r.tasks[1].run_auc);
    CHECK(back.tasks[1].test_pairs == 89);
    CHECK(back.tasks[1].extra["note"] == "x");
    CHECK(report_to_json(back) == report_to_json(r));

    std::ofstream(dir / "bad.json") << "{";
    CHECK_THROWS_AS(read_report(dir / "bad.json"), Error);
    CHECK_THROWS_AS(read_report(dir / "none.json"), Error);
}

TEST_CASE("table marks significant differences") {
    MetricsReport c, b;
    c.tasks.push_back(summary("cider", 4, {0.82, 0.85, 0.80}, {0.75, 0.70, 0.72}));
    b.tasks.push_back(summary("baseline", 4, {0.70, 0.72, 0.74}, {0.71, 0.74, 0.70}));
    const std::string table = render_table(c, b);
    std::istringstream lines(table);
    std::string header, row, legend;
    std::getline(lines, header);
    std::getline(lines, row);
    std::getline(lines, legend);
    CHECK(header.find("Baseline AUC") != std::string::npos);
    // t ~ 5.57 on 4 dof: p < 0.01 for AUC; UAR means are close and unmarked.
    CHECK(row.find("0.823 +- 0.025**") != std::string::npos);
    CHECK(row.find("0.720 +- 0.020 ") != std::string::npos);
    CHECK(row.find("0.723 +- 0.025 ") != std::string::npos);
    CHECK(legend.find("p < 0.05") != std::string::npos);

    const std::string alone = render_table(c, std::nullopt);
    CHECK(alone.find("Baseline") == std::string::npos);
    CHECK(alone.find('*') == std::string::npos);

    const auto cmp = compare_runs(c.tasks[0], b.tasks[0]);
    CHECK(cmp.auc.significant);
    CHECK_FALSE(cmp.uar.significant);
}

TEST_CASE("scores CSV") {
    TempDir dir("csv");
    std::vector<PredictionRecord> recs(2);
    recs[0] = {"A", {0.5, -1.0}, 0, 0.4, 1};
    recs[1] = {"B", {2.0}, 1, 0.88, 1};
    write_scores_csv(dir / "s.csv", recs);
    std::ifstream in(dir / "s.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "participant_id,true_label,vote_label,score,chunks");
    std::getline(in, line);
    CHECK(line == "A,1,0,0.40000000000000002,2");
    std::getline(in, line);
    CHECK(line.rfind("B,1,1,", 0) == 0);
}

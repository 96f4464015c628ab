#include "commands.hpp"

#include "cider/dataset.hpp"
#include "cider/evaluator.hpp"

#include "tempdir.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <sstream>

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cider::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

// Small network and 2 s segments keep the end-to-end run short.
void write_small_config(const std::filesystem::path& path) {
    std::ofstream(path) << "channels = 4,4,8,8\n"
                           "segment_seconds = 2\n"
                           "batch_size = 8\n"
                           "learning_rate = 1e-3\n"
                           "baseline_iterations = 2000\n";
}

}  // namespace

TEST_CASE("usage errors exit with 2, help with 0") {
    CHECK(run({}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"frobnicate"}).code == 2);
    const auto missing = run({"synth"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("--out") != std::string::npos);
    CHECK(run({"train", "--manifest", "m", "--folds", "f", "--task", "5"}).code == 2);
    CHECK(run({"synth", "--out", "x", "--preset", "other"}).code == 2);
}

TEST_CASE("missing inputs exit with 1") {
    TempDir dir("cli_missing");
    const auto r = run({"folds", "--manifest", (dir / "none.csv").string(), "--out", (dir / "f.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("error:") == 0);
    CHECK(run({"synth", "--out", (dir / "c").string(), "--counts", "1,2"}).code == 1);
}

TEST_CASE("end-to-end pipeline on a small corpus") {
    TempDir dir("cli");
    const auto corpus = dir / "corpus";
    const auto manifest = (corpus / "manifest.csv").string();
    const auto folds = (dir / "folds.json").string();
    const auto runs = (dir / "runs").string();
    const auto cfg = (dir / "small.cfg").string();
    write_small_config(cfg);

    auto synth = run({"synth", "--out", corpus.string(), "--counts", "12,4,4,8,4", "--max-seconds", "3"});
    REQUIRE(synth.code == 0);
    CHECK(synth.out.find("wrote 32 participants (12 positive)") != std::string::npos);

    auto f = run({"folds", "--manifest", manifest, "--seed", "5", "--out", folds});
    REQUIRE(f.code == 0);
    CHECK(f.out.find("participants 32, test fold 3") != std::string::npos);

    auto t = run({"train", "--manifest", manifest, "--folds", folds, "--task", "4", "--runs", "3", "--config", cfg,
                  "--max-epochs", "1", "--out", runs});
    INFO(t.err);
    REQUIRE(t.code == 0);
    const auto task_dir = dir / "runs" / "task4";
    int ckpts = 0;
    for (const auto& e : std::filesystem::directory_iterator(task_dir)) ckpts += e.path().extension() == ".ckpt";
    CHECK(ckpts == 9);
    std::ifstream man_in(task_dir / "run_manifest.json");
    const auto man = nlohmann::json::parse(man_in);
    CHECK(man["checkpoints"].size() == 9);
    CHECK(man["folds_seed"] == 5);
    CHECK(std::filesystem::exists(task_dir / "train_log.csv"));

    auto b = run({"baseline", "--manifest", manifest, "--folds", folds, "--task", "4", "--config", cfg, "--out", runs});
    INFO(b.err);
    REQUIRE(b.code == 0);
    CHECK(b.out.find("selected C") != std::string::npos);
    CHECK(std::filesystem::exists(task_dir / "baseline_report.json"));

    auto e = run({"evaluate", "--checkpoints", runs, "--task", "4", "--baseline",
                  (task_dir / "baseline_report.json").string()});
    INFO(e.err);
    REQUIRE(e.code == 0);
    const auto report = cider::read_report(task_dir / "cider_report.json");
    REQUIRE(report.tasks.size() == 1);
    CHECK(report.tasks[0].run_auc.size() == 3);
    CHECK(report.tasks[0].extra.contains("ttest_vs_baseline"));
    const auto participants = cider::load_manifest(manifest);
    const auto assignment = cider::read_folds(folds);
    int test_pairs = 0;
    for (const auto& p : participants) test_pairs += assignment.fold(p.id) == 3 ? 1 : 0;
    CHECK(report.tasks[0].test_pairs == test_pairs);
    CHECK(report.tasks[0].train_dev_pairs == 32 - test_pairs);
    CHECK(std::filesystem::exists(task_dir / "scores_run0_rot0.csv"));

    auto rep = run({"report", "--cider", (task_dir / "cider_report.json").string()});
    CHECK(rep.code == 0);
    CHECK(rep.out.find("Task") != std::string::npos);
    auto rep2 = run({"report", "--cider", (task_dir / "cider_report.json").string(), "--baseline",
                     (task_dir / "baseline_report.json").string(), "--out", (dir / "all.json").string()});
    CHECK(rep2.code == 0);
    CHECK(rep2.out.find("Baseline AUC") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "all.json"));

    SUBCASE("folds from another manifest are refused") {
        const auto other = dir / "other";
        REQUIRE(run({"synth", "--out", other.string(), "--counts", "6,2,2,4,2", "--max-seconds", "2"}).code == 0);
        const auto other_folds = (dir / "other_folds.json").string();
        REQUIRE(run({"folds", "--manifest", (other / "manifest.csv").string(), "--out", other_folds}).code == 0);
        auto bad = run({"train", "--manifest", manifest, "--folds", other_folds, "--task", "4", "--config", cfg,
                        "--max-epochs", "1", "--out", (dir / "bad").string()});
        CHECK(bad.code == 1);
        CHECK(bad.err.find("fold") != std::string::npos);
    }

    SUBCASE("evaluation refuses a checkpoint tuned on the test fold") {
        const auto meta_path = task_dir / "run1_rot2.ckpt.json";
        std::ifstream in(meta_path);
        auto meta = nlohmann::ordered_json::parse(in);
        in.close();
        meta["metadata"]["dev_fold"] = 3;
        std::ofstream(meta_path) << meta.dump(2);
        auto leak = run({"evaluate", "--checkpoints", runs, "--task", "4"});
        CHECK(leak.code == 1);
        CHECK(leak.err.find("LeakageDetected") != std::string::npos);
    }
}

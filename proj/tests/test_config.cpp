#include "cider/config.hpp"
#include "cider/error.hpp"

#include "tempdir.hpp"

#include <doctest.h>

#include <fstream>

using namespace cider;

TEST_CASE("defaults") {
    const ProtocolConfig c;
    CHECK(c.spectrogram.fft_n == 1024);
    CHECK(c.spectrogram.hop == 512);
    CHECK(c.spectrogram.sr == 24000);
    CHECK(c.spectrogram.segment_seconds == 8);
    CHECK(c.train.learning_rate == 1e-4);
    CHECK(c.train.batch_size == 16);
    CHECK(c.train.max_epochs == 50);
    CHECK(c.train.auto_class_weights);
    CHECK(c.runs == 3);
    CHECK(c.baseline.pca_k == 100);
    CHECK_NOTHROW(c.validate());
}

TEST_CASE("key = value parsing") {
    const auto kv = parse_key_values("# comment\n  fft_n = 2048  \n\nseed=7 # trailing\n");
    CHECK(kv.size() == 2);
    CHECK(kv.at("fft_n") == "2048");
    CHECK(kv.at("seed") == "7");
    CHECK_THROWS_AS(parse_key_values("fft_n 2048\n"), Error);
    CHECK_THROWS_AS(parse_key_values("= 3\n"), Error);
    CHECK_THROWS_AS(parse_key_values("seed = 1\nseed = 2\n"), Error);
}

TEST_CASE("settings apply and reject bad values") {
    ProtocolConfig c;
    apply_setting(c, "channels", "8, 16, 32, 64");
    CHECK(c.model.channels == std::array<int, 4>{8, 16, 32, 64});
    apply_setting(c, "class_weights", "2.5,0.5");
    CHECK_FALSE(c.train.auto_class_weights);
    CHECK(c.train.w_pos == 2.5);
    apply_setting(c, "class_weights", "auto");
    CHECK(c.train.auto_class_weights);
    apply_setting(c, "baseline_c_grid", "0.1,1");
    CHECK(c.baseline.c_grid == std::vector<double>{0.1, 1.0});
    CHECK(c.train.selection == SelectionMetric::Auc);
    apply_setting(c, "selection_metric", "uar");
    CHECK(c.train.selection == SelectionMetric::Uar);
    apply_setting(c, "baseline_balanced", "no");
    CHECK_FALSE(c.baseline.balanced);

    CHECK_THROWS_AS(apply_setting(c, "colour", "blue"), Error);
    CHECK_THROWS_AS(apply_setting(c, "fft_n", "10x"), Error);
    CHECK_THROWS_AS(apply_setting(c, "channels", "1,2,3"), Error);
    CHECK_THROWS_AS(apply_setting(c, "class_weights", "1"), Error);
    CHECK_THROWS_AS(apply_setting(c, "baseline_balanced", "maybe"), Error);
    CHECK_THROWS_AS(apply_setting(c, "selection_metric", "loss"), Error);
}

TEST_CASE("canonical text reloads to the same configuration") {
    TempDir dir("config");
    ProtocolConfig c;
    c.train.learning_rate = 3.3e-4;
    c.train.max_epochs = 6;
    c.seed = 99;
    c.baseline.c_grid = {1e-3, 0.5};
    c.train.auto_class_weights = false;
    c.train.w_pos = 1.0 / 3.0;
    c.train.selection = SelectionMetric::Uar;
    std::ofstream(dir / "c.cfg") << config_to_text(c);
    const auto back = load_config(dir / "c.cfg");
    CHECK(config_to_text(back) == config_to_text(c));
    CHECK(back.train.w_pos == c.train.w_pos);
    CHECK(protocol_config_to_json(back) == protocol_config_to_json(c));
}

TEST_CASE("load_config validates the result") {
    TempDir dir("config_bad");
    std::ofstream(dir / "c.cfg") << "runs = 0\n";
    CHECK_THROWS_AS(load_config(dir / "c.cfg"), Error);
    std::ofstream(dir / "d.cfg") << "fft_n = 1000\n";
    CHECK_THROWS_AS(load_config(dir / "d.cfg"), Error);
    CHECK_THROWS_AS(load_config(dir / "missing.cfg"), Error);
}

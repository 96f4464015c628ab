#include "cider/error.hpp"
#include "cider/metrics.hpp"
#include "cider/synth.hpp"

#include "oracles.hpp"
#include "tempdir.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

using namespace cider;

namespace {

std::vector<char> slurp(const std::filesystem::path& f) {
    std::ifstream in(f, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

double power(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s / static_cast<double>(x.size());
}

double peak(const std::vector<double>& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

SynthConfig small_counts(std::uint64_t seed) {
    SynthConfig c;
    c.seed = seed;
    c.counts = {{Stratum::HealthyNoSymptoms, 30}, {Stratum::CovidCough, 10}, {Stratum::CovidNoCough, 10}};
    c.max_seconds = 4.0;
    return c;
}

}  // namespace

TEST_CASE("default cohort sizes") {
    const SynthConfig c;
    CHECK(c.participants() == 356);
    const auto cohort = synth_cohort(c);
    REQUIRE(cohort.size() == 356);
    int positives = 0;
    for (const auto& p : cohort) positives += p.covid_positive ? 1 : 0;
    CHECK(positives == 62);
    CHECK(cohort.front().id == "S0001");
    CHECK(cohort.back().id == "S0356");
    CHECK(cohort.back().stratum == Stratum::CovidCough);
    CHECK(cohort[0].recordings[0].breath_path == std::filesystem::path("audio") / "S0001_breath.wav");
}

TEST_CASE("participant audio depends only on config, index and label") {
    SynthConfig c;
    c.max_seconds = 3.0;
    const auto a = synthesize_participant(c, 7, true);
    const auto b = synthesize_participant(c, 7, true);
    CHECK(a.breath.samples == b.breath.samples);
    CHECK(a.cough.samples == b.cough.samples);
    CHECK(synthesize_participant(c, 8, true).breath.samples != a.breath.samples);
    c.seed = 2;
    CHECK(synthesize_participant(c, 7, true).breath.samples != a.breath.samples);
    for (const auto& clip : {a.breath, a.cough}) {
        CHECK(clip.sample_rate == 24000);
        CHECK(clip.duration_seconds() >= 1.0);
        CHECK(clip.duration_seconds() <= 3.0);
        CHECK(peak(clip.samples) <= 0.99 + 1e-12);
    }
}

TEST_CASE("signature is band-limited noise at the requested SNR") {
    SynthConfig c;
    c.max_seconds = 4.0;
    int checked = 0;
    for (std::size_t idx = 0; idx < 6; ++idx) {
        const auto neg = synthesize_participant(c, idx, false);
        const auto pos = synthesize_participant(c, idx, true);
        REQUIRE(neg.breath.samples.size() == pos.breath.samples.size());
        if (peak(pos.breath.samples) >= 0.99) continue;  // renormalized; the difference is no longer pure
        std::vector<double> diff(neg.breath.samples.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = pos.breath.samples[i] - neg.breath.samples[i];
        CHECK(10.0 * std::log10(power(neg.breath.samples) / power(diff)) == doctest::Approx(6.0).epsilon(1e-9));

        // Spectrum of a 2048-sample stretch from the middle of the added component.
        const std::size_t mid = diff.size() / 2;
        const std::vector<double> seg(diff.begin() + static_cast<std::ptrdiff_t>(mid - 1024),
                                      diff.begin() + static_cast<std::ptrdiff_t>(mid + 1024));
        double in_band = 0.0, total = 0.0;
        for (int k = 1; k < 1024; ++k) {
            const double f = k * 24000.0 / 2048.0;
            const double m = oracle::dft_magnitude(seg, k);
            total += m * m;
            if (f >= 4500.0 && f <= 7700.0) in_band += m * m;
        }
        CHECK(in_band / total > 0.8);
        ++checked;
    }
    CHECK(checked >= 3);
}

TEST_CASE("oracle score separates the classes, and not without a signature") {
    SynthConfig c;
    c.max_seconds = 3.0;
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 60; ++i) {
        const bool pos = i % 3 == 0;
        const auto a = synthesize_participant(c, i, pos);
        scores.push_back(oracle_score(a.breath, a.cough, c));
        labels.push_back(pos ? 1 : 0);
    }
    CHECK(auc_roc(scores, labels) >= 0.99);

    SynthConfig none = c;
    none.band_lo = none.band_hi = 0.0;
    CHECK_FALSE(none.has_signature());
    std::vector<double> flat, probe;
    for (std::size_t i = 0; i < 60; ++i) {
        const auto a = synthesize_participant(none, i, labels[i] == 1);
        flat.push_back(oracle_score(a.breath, a.cough, none));
        probe.push_back(oracle_score(a.breath, a.cough, c));  // same band, but nothing was added
    }
    CHECK(auc_roc(flat, labels) == 0.5);
    CHECK(std::abs(auc_roc(probe, labels) - 0.5) < 0.2);
}

TEST_CASE("corpus files are byte-identical across thread counts") {
    TempDir a("synth_a"), b("synth_b");
    const auto cfg = small_counts(4);
    const auto ma = generate_corpus(cfg, a.path(), 1);
    const auto mb = generate_corpus(cfg, b.path(), 2);
    CHECK(slurp(ma) == slurp(mb));
    const auto ps = load_manifest(ma);
    REQUIRE(ps.size() == 50);
    int pos = 0;
    for (const auto& p : ps) pos += p.covid_positive ? 1 : 0;
    CHECK(pos == 20);
    for (const auto& p : ps) {
        for (const auto& f : {p.recordings[0].breath_path, p.recordings[0].cough_path}) {
            CHECK(slurp(f) == slurp(b.path() / f.lexically_relative(a.path())));
        }
    }
    const auto clip = read_wav(ps[0].recordings[0].breath_path);
    const auto direct = synthesize_participant(cfg, 0, false).breath;
    REQUIRE(clip.samples.size() == direct.samples.size());
    for (std::size_t i = 0; i < clip.samples.size(); i += 101) CHECK(std::abs(clip.samples[i] - direct.samples[i]) <= 1.0 / 32768.0);
}

TEST_CASE("generator settings are validated") {
    auto expect_bad = [](auto mutate) {
        SynthConfig c;
        mutate(c);
        CHECK_THROWS_AS(c.validate(), Error);
    };
    expect_bad([](SynthConfig& c) { c.counts = {}; });
    expect_bad([](SynthConfig& c) { c.counts[Stratum::CovidCough] = -1; });
    expect_bad([](SynthConfig& c) { c.min_seconds = 0.5; });
    expect_bad([](SynthConfig& c) { c.max_seconds = 60.0; });
    expect_bad([](SynthConfig& c) { c.band_hi = 13000.0; });
    expect_bad([](SynthConfig& c) { c.band_lo = 8000.0; });
    CHECK_NOTHROW(SynthConfig{}.validate());
}

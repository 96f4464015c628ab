#include "cider/error.hpp"
#include "cider/metrics.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace cider;

TEST_CASE("majority vote") {
    const std::vector<double> modal{2.0, 1.0, -0.5};
    CHECK(majority_vote(modal).label == 1);

    const std::vector<double> tie{1.0, -2.0};
    const auto r = majority_vote(tie);
    CHECK(r.label == 0);
    CHECK(r.score == doctest::Approx(1.0 / (1.0 + std::exp(0.5))).epsilon(1e-12));  // sigmoid(-0.5) ~ 0.378

    const std::vector<double> boundary{0.0};
    CHECK(majority_vote(boundary).label == 1);

    const std::vector<double> tie_up{-1.0, 2.0};
    CHECK(majority_vote(tie_up).label == 1);
    const std::vector<double> down{-3.0, -1.0, 5.0};
    CHECK(majority_vote(down).label == 0);  // modal 0 even though the mean logit is positive

    CHECK_THROWS_AS(majority_vote(std::vector<double>{}), Error);
}

TEST_CASE("AUC reference cases") {
    const std::vector<double> sep{0.1, 0.2, 0.8, 0.9};
    const std::vector<int> y{0, 0, 1, 1};
    CHECK(auc_roc(sep, y) == 1.0);
    const std::vector<double> same(4, 0.3);
    CHECK(auc_roc(same, y) == 0.5);
    const std::vector<double> s{0.9, 0.4, 0.6, 0.2};
    const std::vector<int> l{1, 1, 0, 0};
    CHECK(auc_roc(s, l) == 0.75);
    const std::vector<int> one_class{1, 1, 1, 1};
    CHECK_THROWS_AS(auc_roc(s, one_class), Error);
}

TEST_CASE("rank AUC equals pairwise AUC on random instances") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 200)(gen);
        const int levels = std::uniform_int_distribution<int>(2, 50)(gen);  // few levels force ties
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            scores[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, levels)(gen) / 7.0;
            labels[static_cast<std::size_t>(i)] = std::uniform_int_distribution<int>(0, 1)(gen);
        }
        labels[0] = 0;
        labels[1] = 1;
        CHECK(auc_roc(scores, labels) == oracle::pairwise_auc(scores, labels));
    }
}

TEST_CASE("UAR from hand counts") {
    // class 1: 3 of 4 recalled; class 0: 1 of 2
    const std::vector<int> pred{1, 1, 1, 0, 0, 1};
    const std::vector<int> truth{1, 1, 1, 1, 0, 0};
    CHECK(uar(pred, truth) == doctest::Approx(0.5 * (0.75 + 0.5)).epsilon(1e-15));
    const std::vector<int> all_one(6, 1);
    CHECK(uar(all_one, truth) == 0.5);
    CHECK_THROWS_AS(uar(pred, all_one), Error);
}

TEST_CASE("Hanley-McNeil interval") {
    CHECK(hanley_mcneil_se(1.0, 10, 20) == 0.0);
    const auto perfect = auc_ci_hanley_mcneil(1.0, 10, 20);
    CHECK(perfect.lo == 1.0);
    CHECK(perfect.hi == 1.0);

    CHECK(hanley_mcneil_se(0.5, 100000, 100000) < 2e-3);

    const double se = hanley_mcneil_se(0.8, 10, 20);
    CHECK(std::abs(se - static_cast<double>(oracle::hanley_mcneil_se(0.8L, 10, 20))) < 1e-12);
    const auto ci = auc_ci_hanley_mcneil(0.8, 10, 20);
    CHECK(ci.lo == doctest::Approx(0.617).epsilon(1e-3));
    CHECK(ci.hi == doctest::Approx(0.983).epsilon(1e-3));
    CHECK(normal_quantile_two_sided(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));

    CHECK_THROWS_AS(hanley_mcneil_se(0.8, 0, 5), Error);
}

TEST_CASE("UAR normal-approximation interval") {
    const auto ci = uar_ci_normal(0.75, 48);
    const double half = 1.959963984540054 * std::sqrt(0.75 * 0.25 / 48.0);
    CHECK(ci.lo == doctest::Approx(0.75 - half));
    CHECK(ci.hi == doctest::Approx(0.75 + half));
    const auto clipped = uar_ci_normal(0.99, 3);
    CHECK(clipped.hi == 1.0);
}

TEST_CASE("incomplete beta and Student t tails against closed forms") {
    for (double x : {0.0, 0.1, 0.37, 0.5, 0.99, 1.0}) CHECK(incomplete_beta(1.0, 1.0, x) == doctest::Approx(x).epsilon(1e-12));
    for (double a : {0.5, 2.0, 7.5}) CHECK(incomplete_beta(a, a, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    // I_x(a, 1) = x^a
    CHECK(incomplete_beta(3.0, 1.0, 0.4) == doctest::Approx(0.064).epsilon(1e-12));
    const double pi = std::acos(-1.0);
    for (double t : {0.1, 1.0, 2.5, 30.0}) {
        CHECK(student_t_two_sided_p(t, 1.0) == doctest::Approx(1.0 - 2.0 / pi * std::atan(t)).epsilon(1e-10));
        CHECK(student_t_two_sided_p(t, 2.0) == doctest::Approx(1.0 - t / std::sqrt(t * t + 2.0)).epsilon(1e-10));
    }
}

TEST_CASE("two-sample t-test") {
    const std::vector<double> a{0.82, 0.85, 0.80}, b{0.70, 0.72, 0.74};
    const auto r = two_sample_ttest(a, b);
    CHECK(r.t == doctest::Approx(oracle::pooled_t(a, b)).epsilon(1e-12));
    CHECK(r.t == doctest::Approx(5.568).epsilon(1e-3));
    CHECK(r.df == 4.0);
    CHECK(r.p < 0.01);
    CHECK(r.significant);

    const auto same = two_sample_ttest(a, a);
    CHECK(same.t == 0.0);
    CHECK(same.p == 1.0);
    CHECK_FALSE(same.significant);

    const std::vector<double> ones(3, 1.0), twos(3, 2.0);
    const auto inf = two_sample_ttest(ones, twos);
    CHECK(std::isinf(inf.t));
    CHECK(inf.p == 0.0);
    CHECK(inf.significant);

    const auto w = two_sample_ttest(a, b, 0.05, true);
    CHECK(w.t == doctest::Approx(r.t));  // equal sizes: same statistic
    CHECK(w.df < 4.0);

    CHECK_THROWS_AS(two_sample_ttest(std::vector<double>{1.0}, b), Error);
}

TEST_CASE("t-test p-values agree with a simulated Gaussian null") {
    std::mt19937_64 gen(5);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> a(3), b(3);
        for (auto& v : a) v = z(gen) + 1.0;
        for (auto& v : b) v = z(gen);
        const auto r = two_sample_ttest(a, b);
        const double sim = oracle::gaussian_null_p(r.t, 3, 3, 200000, 100 + trial);
        CHECK(std::abs(r.p - sim) < 0.01);
    }
}

TEST_CASE("mean and sample standard deviation") {
    const std::vector<double> v{0.8, 0.9};
    const auto m = mean_std(v);
    CHECK(m.mean == doctest::Approx(0.85));
    CHECK(m.std == doctest::Approx(0.0707106781).epsilon(1e-8));
    const std::vector<double> one{0.3};
    CHECK(mean_std(one).std == 0.0);
}

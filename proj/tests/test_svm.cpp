#include "cider/error.hpp"
#include "cider/svm.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace cider;

namespace {

struct Blobs {
    Eigen::MatrixXd x;
    std::vector<int> y;
};

Blobs blobs(int n_pos, int n_neg, double gap, int d, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> z;
    Blobs b;
    b.x.resize(n_pos + n_neg, d);
    for (int i = 0; i < n_pos + n_neg; ++i) {
        const int label = i < n_pos ? 1 : -1;
        b.y.push_back(label);
        for (int j = 0; j < d; ++j) b.x(i, j) = z(gen) + (j == 0 ? label * gap : 0.0);
    }
    return b;
}

}  // namespace

TEST_CASE("class costs") {
    const std::vector<int> y{1, -1, -1, -1};
    const auto [cp, cn] = svm_class_costs(y, 2.0, true);
    CHECK(cp == doctest::Approx(4.0));
    CHECK(cn == doctest::Approx(4.0 / 3.0));
    const auto plain = svm_class_costs(y, 2.0, false);
    CHECK(plain.first == 2.0);
    CHECK(plain.second == 2.0);
    CHECK_THROWS_AS(svm_class_costs(std::vector<int>{1, 1}, 1.0, true), Error);
    CHECK_THROWS_AS(svm_class_costs(std::vector<int>{1, 0}, 1.0, true), Error);
}

TEST_CASE("two symmetric points give the maximum-margin separator") {
    Eigen::MatrixXd x(2, 2);
    x << 1.0, 0.0, -1.0, 0.0;
    const std::vector<int> y{1, -1};
    SvmConfig c;
    c.C = 10.0;
    const auto m = svm_train(x, y, c);
    CHECK(m.weights[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(std::abs(m.weights[1]) < 1e-9);
    CHECK(std::abs(m.bias) < 1e-2);
    CHECK(m.decision(x.row(0).transpose()) > 0.0);
    CHECK(m.decision(x.row(1).transpose()) < 0.0);
}

TEST_CASE("separable blobs are classified perfectly") {
    const auto b = blobs(40, 60, 4.0, 5, 1);
    SvmConfig c;
    c.C = 1.0;
    const auto m = svm_train(b.x, b.y, c);
    const Eigen::VectorXd s = m.decision_rows(b.x);
    for (int i = 0; i < s.size(); ++i) CHECK(s[i] * b.y[static_cast<std::size_t>(i)] > 0.0);
}

TEST_CASE("tiny problems reach the exact primal optimum within 1%") {
    for (std::uint64_t seed : {2u, 3u, 4u, 5u}) {
        const auto b = blobs(3, 3, 0.8, 2, seed);  // overlapping: some hinge terms stay active
        for (double C : {0.1, 1.0}) {
            SvmConfig c;
            c.C = C;
            const auto m = svm_train(b.x, b.y, c);
            const auto [cp, cn] = svm_class_costs(b.y, C, true);
            const auto exact = oracle::svm_exact(b.x, b.y, cp, cn);
            const double ours = svm_primal_objective(m.weights, m.bias, b.x, b.y, cp, cn);
            CHECK(ours == doctest::Approx(oracle::svm_primal(m.weights, m.bias, b.x, b.y, cp, cn)));
            INFO("seed " << seed << " C " << C << " ours " << ours << " exact " << exact.objective);
            CHECK(ours >= exact.objective - 1e-9);
            CHECK(ours <= 1.01 * exact.objective);
        }
    }
}

TEST_CASE("subgradient matches finite differences away from kinks") {
    const auto b = blobs(5, 7, 1.0, 3, 6);
    const auto [cp, cn] = svm_class_costs(b.y, 0.5, true);
    const Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(3, -0.3, 0.4);
    const double bias = 0.05;
    const Eigen::VectorXd g = svm_primal_subgradient(w, bias, b.x, b.y, cp, cn);
    const double h = 1e-6;
    for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd wp = w, wm = w;
        double bp = bias, bm = bias;
        if (j < 3) {
            wp[j] += h;
            wm[j] -= h;
        } else {
            bp += h;
            bm -= h;
        }
        const double fd = (svm_primal_objective(wp, bp, b.x, b.y, cp, cn) -
                           svm_primal_objective(wm, bm, b.x, b.y, cp, cn)) / (2 * h);
        CHECK(g[j] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("bias refit minimizes the hinge sum for fixed weights") {
    const auto b = blobs(6, 9, 0.5, 2, 7);
    const auto [cp, cn] = svm_class_costs(b.y, 1.0, true);
    const Eigen::VectorXd w = Eigen::VectorXd::Constant(2, 0.7);
    const double opt = svm_optimal_bias(w, b.x, b.y, cp, cn);
    const double best = svm_primal_objective(w, opt, b.x, b.y, cp, cn);
    for (double db = -3.0; db <= 3.0; db += 0.001) {
        CHECK(svm_primal_objective(w, opt + db, b.x, b.y, cp, cn) >= best - 1e-12);
    }
}

TEST_CASE("training is deterministic and ignores row order") {
    auto b = blobs(10, 14, 1.5, 4, 8);
    SvmConfig c;
    c.C = 0.01;
    c.iterations = 20000;
    const auto a = svm_train(b.x, b.y, c);
    const auto again = svm_train(b.x, b.y, c);
    CHECK(a.weights == again.weights);
    CHECK(a.bias == again.bias);

    std::vector<int> perm(b.y.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen(1);
    std::shuffle(perm.begin(), perm.end(), gen);
    Eigen::MatrixXd px(b.x.rows(), b.x.cols());
    std::vector<int> py(b.y.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        px.row(static_cast<Eigen::Index>(i)) = b.x.row(perm[i]);
        py[i] = b.y[static_cast<std::size_t>(perm[i])];
    }
    const auto p = svm_train(px, py, c);
    CHECK(p.weights == a.weights);
    CHECK(p.bias == a.bias);
}

TEST_CASE("tensor round trip and validation") {
    const auto b = blobs(5, 5, 2.0, 3, 9);
    const auto m = svm_train(b.x, b.y, SvmConfig{});
    const auto back = svm_from_tensors(svm_to_tensors(m));
    CHECK((back.weights - m.weights).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(back.bias == doctest::Approx(m.bias).epsilon(1e-6));
    SvmConfig bad;
    bad.iterations = 0;
    CHECK_THROWS_AS(svm_train(b.x, b.y, bad), Error);
    CHECK_THROWS_AS(svm_train(b.x, std::vector<int>{1, -1}, SvmConfig{}), Error);
}

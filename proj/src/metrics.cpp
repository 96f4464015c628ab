#include "cider/metrics.hpp"

#include "cider/autodiff.hpp"
#include "cider/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

namespace cider {

VoteResult majority_vote(std::span<const double> chunk_logits, double threshold) {
    if (chunk_logits.empty()) throw Error(ErrorKind::EmptyChunks, "majority vote over zero chunks");
    std::size_t positive = 0;
    double total = 0.0;
    for (double z : chunk_logits) {
        if (ad::sigmoid_value(z) >= threshold) ++positive;
        total += z;
    }
    const std::size_t negative = chunk_logits.size() - positive;
    VoteResult r;
    r.score = ad::sigmoid_value(total / static_cast<double>(chunk_logits.size()));
    if (positive != negative) {
        r.label = positive > negative ? 1 : 0;
    } else {
        r.label = r.score >= threshold ? 1 : 0;
    }
    return r;
}

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw Error(ErrorKind::DimensionMismatch, "scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Doubled mid-ranks keep the statistic integral, so the result is exact.
    std::int64_t n_pos = 0;
    std::int64_t rank2_pos = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const auto rank2 = static_cast<std::int64_t>(i + 1 + j);  // 2 * mean of ranks i+1..j
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) {
                ++n_pos;
                rank2_pos += rank2;
            }
        }
        i = j;
    }
    const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
    if (n_pos == 0 || n_neg == 0) throw Error(ErrorKind::SingleClass, "AUC needs both classes");
    const std::int64_t u2 = rank2_pos - n_pos * (n_pos + 1);
    return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double uar(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw Error(ErrorKind::DimensionMismatch, "prediction/label length mismatch");
    std::size_t hits[2] = {0, 0}, totals[2] = {0, 0};
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int c = truth[i] == 1 ? 1 : 0;
        ++totals[c];
        if (predicted[i] == truth[i]) ++hits[c];
    }
    if (totals[0] == 0 || totals[1] == 0) throw Error(ErrorKind::SingleClass, "UAR needs both classes");
    return 0.5 * (static_cast<double>(hits[0]) / totals[0] + static_cast<double>(hits[1]) / totals[1]);
}

double normal_quantile_two_sided(double level) {
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::InvalidArgument, "confidence level must be in (0, 1)");
    // Solve erfc(z / sqrt 2) = 1 - level by bisection.
    const double target = 1.0 - level;
    double lo = 0.0, hi = 40.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (std::erfc(mid / std::sqrt(2.0)) > target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

double hanley_mcneil_se(double auc, int n_pos, int n_neg) {
    if (n_pos < 1 || n_neg < 1) throw Error(ErrorKind::InvalidCounts, "Hanley-McNeil needs n_pos, n_neg >= 1");
    const double a = auc;
    const double q1 = a / (2.0 - a);
    const double q2 = 2.0 * a * a / (1.0 + a);
    const double var = (a * (1.0 - a) + (n_pos - 1) * (q1 - a * a) + (n_neg - 1) * (q2 - a * a)) /
                       (static_cast<double>(n_pos) * n_neg);
    return std::sqrt(std::max(var, 0.0));
}

Interval auc_ci_hanley_mcneil(double auc, int n_pos, int n_neg, double level) {
    const double half = normal_quantile_two_sided(level) * hanley_mcneil_se(auc, n_pos, n_neg);
    return {std::clamp(auc - half, 0.0, 1.0), std::clamp(auc + half, 0.0, 1.0)};
}

Interval uar_ci_normal(double uar_value, int n, double level) {
    if (n < 1) throw Error(ErrorKind::InvalidCounts, "normal-approximation CI needs n >= 1");
    const double half =
        normal_quantile_two_sided(level) * std::sqrt(std::max(uar_value * (1.0 - uar_value), 0.0) / n);
    return {std::clamp(uar_value - half, 0.0, 1.0), std::clamp(uar_value + half, 0.0, 1.0)};
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
    constexpr double kTiny = 1e-300;
    constexpr double kEps = 1e-15;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b, double alpha, bool welch) {
    if (a.size() < 2 || b.size() < 2) throw Error(ErrorKind::InvalidCounts, "t-test needs at least 2 values per sample");
    const auto ma = mean_std(a), mb = mean_std(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double va = ma.std * ma.std, vb = mb.std * mb.std;
    const double diff = ma.mean - mb.mean;

    TTestResult r;
    double se2;
    if (welch) {
        se2 = va / na + vb / nb;
        const double num = se2 * se2;
        const double den = (va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0);
        r.df = den > 0.0 ? num / den : na + nb - 2.0;
    } else {
        const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
        se2 = pooled * (1.0 / na + 1.0 / nb);
        r.df = na + nb - 2.0;
    }
    if (se2 <= 0.0) {
        if (diff == 0.0) {
            r.t = 0.0;
            r.p = 1.0;
        } else {
            r.t = diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            r.p = 0.0;
        }
    } else {
        r.t = diff / std::sqrt(se2);
        r.p = student_t_two_sided_p(r.t, r.df);
    }
    r.significant = r.p < alpha;
    return r;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::InvalidCounts, "mean of empty sample");
    MeanStd r;
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return r;
}

}  // namespace cider

#pragma once

#include <span>
#include <vector>

namespace cider {

struct VoteResult {
    int label = 0;
    double score = 0.0;  // sigmoid(mean logit)
};

/// Each chunk votes sigmoid(logit) >= threshold. The modal vote wins; a tied
/// vote falls back to sigmoid(mean logit) >= threshold. Throws EmptyChunks.
VoteResult majority_vote(std::span<const double> chunk_logits, double threshold = 0.5);

/// Mann-Whitney AUC with mid-ranks for ties: P(pos > neg) + P(pos == neg)/2.
/// Labels are 0/1. Throws SingleClass if either class is missing.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

/// Mean of per-class recalls.
double uar(std::span<const int> predicted, std::span<const int> truth);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Two-sided standard normal quantile for a confidence level, e.g. 0.95 -> 1.95996.
double normal_quantile_two_sided(double level);

double hanley_mcneil_se(double auc, int n_pos, int n_neg);
Interval auc_ci_hanley_mcneil(double auc, int n_pos, int n_neg, double level = 0.95);
Interval uar_ci_normal(double uar_value, int n, double level = 0.95);

struct TTestResult {
    double t = 0.0;
    double p = 1.0;
    double df = 0.0;
    bool significant = false;
};

/// Two-sided two-sample t-test. Pooled (Student) variance by default,
/// Welch-Satterthwaite when `welch` is set. Constant samples: equal means
/// give t=0, p=1; different means give t=+-inf, p=0.
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                             bool welch = false);

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction
/// (relative convergence 1e-15, so absolute error well under 1e-8).
double incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
};

MeanStd mean_std(std::span<const double> values);

}  // namespace cider

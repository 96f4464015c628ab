#pragma once

// Reference implementations used only by the tests. Each one computes the
// same quantity as a library routine by a different (usually slower, more
// direct) route.

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Fraction of (positive, negative) pairs ordered correctly; ties count 1/2.
double pairwise_auc(std::span<const double> scores, std::span<const int> labels);

/// Hanley-McNeil standard error evaluated term by term in long double.
long double hanley_mcneil_se(long double auc, int n_pos, int n_neg);

/// Pooled-variance t statistic written out from sums of squares.
double pooled_t(std::span<const double> a, std::span<const double> b);

/// Two-sided permutation p-value of the pooled t statistic over every
/// relabelling of the concatenated samples.
double permutation_p(std::span<const double> a, std::span<const double> b);

/// Two-sided p-value of the pooled t statistic under a Gaussian null,
/// estimated by simulating `trials` pairs of normal samples of the same sizes.
double gaussian_null_p(double t, int n1, int n2, int trials, std::uint64_t seed);

/// Direct O(n^2) DFT magnitude of bin k.
double dft_magnitude(std::span<const double> x, int k);

/// Cyclic Jacobi rotations on a symmetric matrix; eigenvalues descending.
struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // columns
};
EigenPairs jacobi_eigen(Eigen::MatrixXd a, double tol = 1e-14, int max_sweeps = 100);

/// Exact linear-SVM primal minimum for tiny problems: every assignment of
/// points to {outside margin, on margin, inside margin} gives a candidate
/// (w, b) from the stationarity and margin equations, b is refit by scanning
/// the hinge breakpoints, and the smallest primal value wins.
struct SvmOptimum {
    Eigen::VectorXd w;
    double b = 0.0;
    double objective = 0.0;
};
SvmOptimum svm_exact(const Eigen::MatrixXd& x, std::span<const int> y, double c_pos, double c_neg);

double svm_primal(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> y, double c_pos,
                  double c_neg);

}  // namespace oracle

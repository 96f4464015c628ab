#pragma once

#include "cider/checkpoint.hpp"

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cider {

struct SvmConfig {
    double C = 1.0;
    std::int64_t iterations = 100000;
    /// Scale C per class by N / (2 N_class).
    bool balanced = true;
};

struct SvmModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
    double C = 1.0;
    double c_pos = 1.0;  // effective per-example C for y = +1
    double c_neg = 1.0;  // and for y = -1

    double decision(const Eigen::VectorXd& x) const { return weights.dot(x) + bias; }
    Eigen::VectorXd decision_rows(const Eigen::MatrixXd& rows) const;
};

/// Per-class effective C values (c_pos, c_neg). Throws SingleClass.
std::pair<double, double> svm_class_costs(std::span<const int> labels, double C, bool balanced);

/// 0.5 |w|^2 + sum_i C_i max(0, 1 - y_i (w.x_i + b)), labels in {-1, +1}.
double svm_primal_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> labels,
                            double c_pos, double c_neg);

/// A subgradient of the primal objective (kink points take the zero branch);
/// the last entry is the derivative with respect to b.
Eigen::VectorXd svm_primal_subgradient(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                                       std::span<const int> labels, double c_pos, double c_neg);

/// Exact minimizer over b of the hinge sum for a fixed w (the objective is
/// piecewise linear and convex in b; the minimum sits at a breakpoint).
double svm_optimal_bias(const Eigen::VectorXd& w, const Eigen::MatrixXd& x, std::span<const int> labels, double c_pos,
                        double c_neg);

/// Averaged full-batch subgradient descent on g(w) = min_b primal(w, b),
/// with the bias solved exactly at every step and once more for the
/// averaged weights. Deterministic and independent of row order. Throws
/// SingleClass.
SvmModel svm_train(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config);

std::vector<ad::NamedTensor> svm_to_tensors(const SvmModel& model);
SvmModel svm_from_tensors(const std::vector<ad::NamedTensor>& tensors);

}  // namespace cider

#pragma once

#include "cider/checkpoint.hpp"

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cider {

/// Standardization followed by projection on the leading right singular
/// vectors of the standardized data.
struct PcaModel {
    Eigen::VectorXd mean;                // D
    Eigen::VectorXd scale;               // D, sample std; 1 for constant columns
    Eigen::MatrixXd components;          // k x D, orthonormal rows
    Eigen::VectorXd explained_variance;  // k, non-increasing

    int dims() const { return static_cast<int>(mean.size()); }
    int k() const { return static_cast<int>(components.rows()); }
};

/// Fits on the rows of `data` (N x D). k is truncated to min(N - 1, D, rank)
/// with a note appended to `warnings`. Each component's largest-magnitude
/// entry is made positive so the fit is sign-deterministic.
PcaModel pca_fit(const Eigen::MatrixXd& data, int k = 100, std::vector<std::string>* warnings = nullptr);

/// z = components * ((x - mean) / scale). Throws DimensionMismatch.
Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& x);
/// Row-wise transform of an N x D matrix.
Eigen::MatrixXd pca_transform_rows(const PcaModel& model, const Eigen::MatrixXd& rows);

std::vector<ad::NamedTensor> pca_to_tensors(const PcaModel& model);
PcaModel pca_from_tensors(const std::vector<ad::NamedTensor>& tensors);

}  // namespace cider

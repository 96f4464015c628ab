#pragma once

#include "cider/features.hpp"
#include "cider/pca.hpp"
#include "cider/svm.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cider {

std::vector<double> default_c_grid();  // 1e-5, 1e-4, ..., 1

struct BaselineConfig {
    FeatureConfig features;
    int pca_k = 100;
    std::vector<double> c_grid = default_c_grid();
    std::int64_t iterations = 100000;
    bool balanced = true;

    void validate() const;
};

/// Feature rows with labels in {-1, +1}.
struct LabeledRows {
    Eigen::MatrixXd x;
    std::vector<int> y;
    std::vector<std::string> ids;
};

LabeledRows make_rows(const std::vector<const FeatureVector*>& rows, const std::vector<int>& labels01);

struct BaselineModel {
    PcaModel pca;
    SvmModel svm;

    /// Raw decision values w.z + b on PCA projections.
    Eigen::VectorXd scores(const Eigen::MatrixXd& x) const;
};

/// PCA on `train`, then a linear SVM with complexity C on the projections.
BaselineModel fit_baseline(const LabeledRows& train, double C, const BaselineConfig& config,
                           std::vector<std::string>* warnings = nullptr);

struct BaselineRotation {
    LabeledRows train;
    LabeledRows dev;
};

struct TuneResult {
    double best_c = 0.0;
    double best_dev_auc = 0.0;
    std::vector<double> grid;          // ascending
    std::vector<double> mean_dev_auc;  // per grid point, averaged over rotations
};

/// Picks the C with the highest dev AUC averaged over the rotations; the
/// smallest C wins ties. PCA is fitted once per rotation and shared by all
/// grid points.
TuneResult tune_complexity(const std::vector<BaselineRotation>& rotations, const BaselineConfig& config);

}  // namespace cider

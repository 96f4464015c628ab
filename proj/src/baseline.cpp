#include "cider/baseline.hpp"

#include "cider/error.hpp"
#include "cider/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace cider {

std::vector<double> default_c_grid() { return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}; }

void BaselineConfig::validate() const {
    features.validate();
    if (pca_k < 1) throw Error(ErrorKind::InvalidConfig, "pca_k must be >= 1");
    if (c_grid.empty()) throw Error(ErrorKind::InvalidConfig, "C grid is empty");
    for (double c : c_grid) {
        if (!(c > 0.0)) throw Error(ErrorKind::InvalidConfig, "C grid values must be positive");
    }
    if (iterations < 1) throw Error(ErrorKind::InvalidConfig, "SVM iterations must be >= 1");
}

LabeledRows make_rows(const std::vector<const FeatureVector*>& rows, const std::vector<int>& labels01) {
    if (rows.size() != labels01.size()) throw Error(ErrorKind::DimensionMismatch, "rows and labels differ in length");
    if (rows.empty()) throw Error(ErrorKind::EmptyDataset, "no feature rows");
    const std::size_t d = rows.front()->values.size();
    LabeledRows out;
    out.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i]->values.size() != d) throw Error(ErrorKind::DimensionMismatch, "ragged feature rows");
        for (std::size_t j = 0; j < d; ++j) out.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i]->values[j];
        out.y.push_back(labels01[i] == 1 ? 1 : -1);
        out.ids.push_back(rows[i]->recording_id);
    }
    return out;
}

Eigen::VectorXd BaselineModel::scores(const Eigen::MatrixXd& x) const {
    return svm.decision_rows(pca_transform_rows(pca, x));
}

namespace {

SvmConfig svm_config(double C, const BaselineConfig& config) {
    SvmConfig s;
    s.C = C;
    s.iterations = config.iterations;
    s.balanced = config.balanced;
    return s;
}

std::vector<int> to01(const std::vector<int>& pm) {
    std::vector<int> out;
    out.reserve(pm.size());
    for (int y : pm) out.push_back(y == 1 ? 1 : 0);
    return out;
}

}  // namespace

BaselineModel fit_baseline(const LabeledRows& train, double C, const BaselineConfig& config,
                           std::vector<std::string>* warnings) {
    BaselineModel m;
    m.pca = pca_fit(train.x, config.pca_k, warnings);
    m.svm = svm_train(pca_transform_rows(m.pca, train.x), train.y, svm_config(C, config));
    return m;
}

TuneResult tune_complexity(const std::vector<BaselineRotation>& rotations, const BaselineConfig& config) {
    config.validate();
    if (rotations.empty()) throw Error(ErrorKind::EmptyList, "no rotations to tune on");
    TuneResult r;
    r.grid = config.c_grid;
    std::sort(r.grid.begin(), r.grid.end());
    r.mean_dev_auc.assign(r.grid.size(), 0.0);

    for (const auto& rot : rotations) {
        const PcaModel pca = pca_fit(rot.train.x, config.pca_k);
        const Eigen::MatrixXd z_train = pca_transform_rows(pca, rot.train.x);
        const Eigen::MatrixXd z_dev = pca_transform_rows(pca, rot.dev.x);
        const std::vector<int> dev01 = to01(rot.dev.y);
        for (std::size_t g = 0; g < r.grid.size(); ++g) {
            const SvmModel svm = svm_train(z_train, rot.train.y, svm_config(r.grid[g], config));
            const Eigen::VectorXd s = svm.decision_rows(z_dev);
            const std::vector<double> scores(s.data(), s.data() + s.size());
            r.mean_dev_auc[g] += auc_roc(scores, dev01) / static_cast<double>(rotations.size());
        }
    }
    r.best_c = r.grid.front();
    r.best_dev_auc = r.mean_dev_auc.front();
    for (std::size_t g = 1; g < r.grid.size(); ++g) {
        if (r.mean_dev_auc[g] > r.best_dev_auc) {
            r.best_dev_auc = r.mean_dev_auc[g];
            r.best_c = r.grid[g];
        }
    }
    return r;
}

}  // namespace cider

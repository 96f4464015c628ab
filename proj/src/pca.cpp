#include "cider/pca.hpp"

#include "cider/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cider {

PcaModel pca_fit(const Eigen::MatrixXd& data, int k, std::vector<std::string>* warnings) {
    const Eigen::Index n = data.rows();
    const Eigen::Index d = data.cols();
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "PCA needs at least two rows");
    if (d < 1) throw Error(ErrorKind::InvalidArgument, "PCA needs at least one column");
    if (k < 1) throw Error(ErrorKind::InvalidArgument, "PCA needs k >= 1");

    PcaModel model;
    model.mean = data.colwise().mean().transpose();
    const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
    model.scale = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!(model.scale[j] > 0.0)) model.scale[j] = 1.0;
    }
    const Eigen::MatrixXd z = centered.array().rowwise() / model.scale.transpose().array();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double tol = (s.size() > 0 ? s[0] : 0.0) * static_cast<double>(std::max(n, d)) *
                       std::numeric_limits<double>::epsilon();
    Eigen::Index rank = 0;
    while (rank < s.size() && s[rank] > tol) ++rank;

    const Eigen::Index limit = std::min({static_cast<Eigen::Index>(k), n - 1, d, rank});
    if (limit < k && warnings) {
        warnings->push_back("PCA: k reduced from " + std::to_string(k) + " to " + std::to_string(limit) +
                            " (rows=" + std::to_string(n) + ", cols=" + std::to_string(d) +
                            ", rank=" + std::to_string(rank) + ")");
    }
    if (limit < 1) throw Error(ErrorKind::InvalidArgument, "PCA input has rank 0");

    model.components = svd.matrixV().leftCols(limit).transpose();
    model.explained_variance = s.head(limit).array().square() / static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < limit; ++i) {
        Eigen::Index arg;
        model.components.row(i).cwiseAbs().maxCoeff(&arg);
        if (model.components(i, arg) < 0.0) model.components.row(i) *= -1.0;
    }
    return model;
}

Eigen::VectorXd pca_transform(const PcaModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.mean.size()) {
        throw Error(ErrorKind::DimensionMismatch, "PCA input has " + std::to_string(x.size()) + " values, expected " +
                                                      std::to_string(model.mean.size()));
    }
    const Eigen::VectorXd z = (x - model.mean).cwiseQuotient(model.scale);
    return model.components * z;
}

Eigen::MatrixXd pca_transform_rows(const PcaModel& model, const Eigen::MatrixXd& rows) {
    if (rows.cols() != model.mean.size()) {
        throw Error(ErrorKind::DimensionMismatch, "PCA input column count mismatch");
    }
    const Eigen::MatrixXd z =
        (rows.rowwise() - model.mean.transpose()).array().rowwise() / model.scale.transpose().array();
    return z * model.components.transpose();
}

namespace {

ad::Tensor<float> to_tensor(const Eigen::MatrixXd& m) {
    ad::Tensor<float> t({static_cast<int>(m.rows()), static_cast<int>(m.cols())});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.data[r * m.cols() + c] = static_cast<float>(m(r, c));
    }
    return t;
}

Eigen::MatrixXd from_tensor(const ad::Tensor<float>& t) {
    if (t.rank() != 2) throw Error(ErrorKind::ShapeMismatch, "expected a rank-2 tensor");
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (int r = 0; r < t.dim(0); ++r) {
        for (int c = 0; c < t.dim(1); ++c) m(r, c) = t.data[static_cast<std::size_t>(r) * t.dim(1) + c];
    }
    return m;
}

const ad::Tensor<float>& find(const std::vector<ad::NamedTensor>& tensors, const std::string& name) {
    for (const auto& nt : tensors) {
        if (nt.name == name) return nt.tensor;
    }
    throw Error(ErrorKind::MalformedHeader, "missing tensor " + name);
}

}  // namespace

std::vector<ad::NamedTensor> pca_to_tensors(const PcaModel& model) {
    return {{"pca.mean", to_tensor(model.mean.transpose())},
            {"pca.scale", to_tensor(model.scale.transpose())},
            {"pca.components", to_tensor(model.components)},
            {"pca.explained_variance", to_tensor(model.explained_variance.transpose())}};
}

PcaModel pca_from_tensors(const std::vector<ad::NamedTensor>& tensors) {
    PcaModel m;
    m.mean = from_tensor(find(tensors, "pca.mean")).row(0).transpose();
    m.scale = from_tensor(find(tensors, "pca.scale")).row(0).transpose();
    m.components = from_tensor(find(tensors, "pca.components"));
    m.explained_variance = from_tensor(find(tensors, "pca.explained_variance")).row(0).transpose();
    if (m.components.cols() != m.mean.size()) throw Error(ErrorKind::ShapeMismatch, "PCA tensors disagree on D");
    return m;
}

}  // namespace cider

#include "cider/svm.hpp"

#include "cider/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cider {

Eigen::VectorXd SvmModel::decision_rows(const Eigen::MatrixXd& rows) const {
    return (rows * weights).array() + bias;
}

std::pair<double, double> svm_class_costs(std::span<const int> labels, double C, bool balanced) {
    std::size_t pos = 0, neg = 0;
    for (int y : labels) {
        if (y == 1) ++pos;
        else if (y == -1) ++neg;
        else throw Error(ErrorKind::InvalidArgument, "SVM labels must be -1 or +1");
    }
    if (pos == 0 || neg == 0) throw Error(ErrorKind::SingleClass, "SVM needs both classes");
    if (!(C > 0.0)) throw Error(ErrorKind::InvalidArgument, "SVM C must be positive");
    if (!balanced) return {C, C};
    const double n = static_cast<double>(labels.size());
    return {C * n / (2.0 * static_cast<double>(pos)), C * n / (2.0 * static_cast<double>(neg))};
}

double svm_primal_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, std::span<const int> labels,
                            double c_pos, double c_neg) {
    double obj = 0.5 * w.squaredNorm();
    const Eigen::VectorXd s = x * w;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int y = labels[i];
        obj += (y == 1 ? c_pos : c_neg) * std::max(0.0, 1.0 - y * (s[i] + b));
    }
    return obj;
}

Eigen::VectorXd svm_primal_subgradient(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x,
                                       std::span<const int> labels, double c_pos, double c_neg) {
    Eigen::VectorXd g(w.size() + 1);
    g.head(w.size()) = w;
    g[w.size()] = 0.0;
    const Eigen::VectorXd s = x * w;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const int y = labels[i];
        if (1.0 - y * (s[i] + b) > 0.0) {
            const double c = y == 1 ? c_pos : c_neg;
            g.head(w.size()) -= c * y * x.row(i).transpose();
            g[w.size()] -= c * y;
        }
    }
    return g;
}

namespace {

struct BiasFit {
    double b = 0.0;
    // Row sitting exactly on the optimal breakpoint, or -1 when the optimum
    // is the midpoint of a flat stretch.
    Eigen::Index kink = -1;
};

// The hinge sum over b has slope -sum_{y=+1, b < t_i} c_pos + sum_{y=-1, b > t_i} c_neg
// with breakpoints t_i = y_i - s_i; walk them in order until it turns nonnegative.
BiasFit fit_bias(const Eigen::VectorXd& s, std::span<const int> labels, double c_pos, double c_neg,
                 std::vector<Eigen::Index>& order, std::vector<double>& breaks) {
    const auto n = static_cast<std::size_t>(s.size());
    breaks.resize(n);
    order.resize(n);
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        breaks[i] = labels[i] - s[static_cast<Eigen::Index>(i)];
        if (labels[i] == 1) slope -= c_pos;
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return breaks[static_cast<std::size_t>(a)] < breaks[static_cast<std::size_t>(b)] ||
               (breaks[static_cast<std::size_t>(a)] == breaks[static_cast<std::size_t>(b)] && a < b);
    });
    const double tol = 1e-12 * (c_pos + c_neg) * static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(order[k]);
        slope += labels[i] == 1 ? c_pos : c_neg;
        if (slope > tol) return {breaks[i], order[k]};
        if (slope >= -tol) {
            const double next = k + 1 < n ? breaks[static_cast<std::size_t>(order[k + 1])] : breaks[i];
            return {0.5 * (breaks[i] + next), -1};
        }
    }
    return {breaks[static_cast<std::size_t>(order.back())], -1};
}

}  // namespace

double svm_optimal_bias(const Eigen::VectorXd& w, const Eigen::MatrixXd& x, std::span<const int> labels, double c_pos,
                        double c_neg) {
    std::vector<Eigen::Index> order;
    std::vector<double> breaks;
    return fit_bias(x * w, labels, c_pos, c_neg, order, breaks).b;
}

SvmModel svm_train(const Eigen::MatrixXd& x, std::span<const int> labels, const SvmConfig& config) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (static_cast<std::size_t>(n) != labels.size()) {
        throw Error(ErrorKind::DimensionMismatch, "SVM rows and labels differ in length");
    }
    if (config.iterations < 1) throw Error(ErrorKind::InvalidConfig, "SVM iterations must be >= 1");
    const auto [c_pos, c_neg] = svm_class_costs(labels, config.C, config.balanced);

    // Rows are put in a content-defined order so that every floating-point
    // sum, and therefore the model, is independent of the input row order.
    std::vector<Eigen::Index> canonical(static_cast<std::size_t>(n));
    std::iota(canonical.begin(), canonical.end(), 0);
    std::stable_sort(canonical.begin(), canonical.end(), [&](Eigen::Index a, Eigen::Index b) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (x(a, j) != x(b, j)) return x(a, j) < x(b, j);
        }
        return labels[a] < labels[b];
    });
    Eigen::MatrixXd xs(n, d);
    std::vector<int> ys(static_cast<std::size_t>(n));
    Eigen::VectorXd cy(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = canonical[static_cast<std::size_t>(i)];
        xs.row(i) = x.row(src);
        ys[static_cast<std::size_t>(i)] = labels[src];
        cy[i] = labels[src] == 1 ? c_pos : -c_neg;
    }

    // g(w) = min_b primal(w, b) is 1-strongly convex. Its subgradient is the
    // w-part of a primal subgradient whose b-part vanishes; a row on the
    // optimal breakpoint enters with the fraction that cancels the b-slope.
    // Step 1/t, average over the second half.
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd w_avg = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd s(n), active(n), g(d);
    std::vector<Eigen::Index> order;
    std::vector<double> breaks;
    const std::int64_t average_from = config.iterations / 2 + 1;
    std::int64_t averaged = 0;
    for (std::int64_t t = 1; t <= config.iterations; ++t) {
        s.noalias() = xs * w;
        const BiasFit fit = fit_bias(s, ys, c_pos, c_neg, order, breaks);
        double b_slope = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool on = i != fit.kink && 1.0 - ys[static_cast<std::size_t>(i)] * (s[i] + fit.b) > 0.0;
            active[i] = on ? cy[i] : 0.0;
            b_slope += active[i];
        }
        if (fit.kink >= 0) active[fit.kink] = cy[fit.kink] * std::clamp(-b_slope / cy[fit.kink], 0.0, 1.0);
        g.noalias() = xs.transpose() * active;
        w = (1.0 - 1.0 / static_cast<double>(t)) * w + g / static_cast<double>(t);
        if (t >= average_from) {
            ++averaged;
            w_avg += (w - w_avg) / static_cast<double>(averaged);
        }
    }

    SvmModel model;
    model.C = config.C;
    model.c_pos = c_pos;
    model.c_neg = c_neg;
    model.weights = w_avg;
    model.bias = svm_optimal_bias(w_avg, xs, ys, c_pos, c_neg);
    if (!model.weights.allFinite() || !std::isfinite(model.bias)) {
        throw Error(ErrorKind::InvalidArgument, "SVM training diverged");
    }
    return model;
}

std::vector<ad::NamedTensor> svm_to_tensors(const SvmModel& model) {
    ad::Tensor<float> w({static_cast<int>(model.weights.size())});
    for (Eigen::Index i = 0; i < model.weights.size(); ++i) w.data[i] = static_cast<float>(model.weights[i]);
    ad::Tensor<float> meta({4}, std::vector<float>{static_cast<float>(model.bias), static_cast<float>(model.C),
                                                   static_cast<float>(model.c_pos), static_cast<float>(model.c_neg)});
    return {{"svm.weights", std::move(w)}, {"svm.bias_c_cpos_cneg", std::move(meta)}};
}

SvmModel svm_from_tensors(const std::vector<ad::NamedTensor>& tensors) {
    SvmModel m;
    bool have_w = false, have_meta = false;
    for (const auto& nt : tensors) {
        if (nt.name == "svm.weights") {
            m.weights = Eigen::Map<const Eigen::VectorXf>(nt.tensor.data.data(), static_cast<Eigen::Index>(nt.tensor.numel()))
                            .cast<double>();
            have_w = true;
        } else if (nt.name == "svm.bias_c_cpos_cneg" && nt.tensor.numel() == 4) {
            m.bias = nt.tensor.data[0];
            m.C = nt.tensor.data[1];
            m.c_pos = nt.tensor.data[2];
            m.c_neg = nt.tensor.data[3];
            have_meta = true;
        }
    }
    if (!have_w || !have_meta) throw Error(ErrorKind::MalformedHeader, "SVM tensors missing");
    return m;
}

}  // namespace cider

#include "gradcheck.hpp"

#include "cider/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace gradcheck {

using cider::ad::Graph;
using cider::ad::Mode;
using cider::ad::Tensor;
using cider::ad::Var;

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
    double diff = 0.0, na = 0.0, nn = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nn += numeric[i] * numeric[i];
    }
    const double denom = std::sqrt(std::max(na, nn));
    return denom > 1e-300 ? std::sqrt(diff) / denom : std::sqrt(diff);
}

namespace {

double evaluate(std::vector<Tensor<double>>& inputs, const LossBuilder& build) {
    Graph<double> g;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(g.leaf(t, false));
    return build(g, leaves).value().data[0];
}

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : gen_(seed) {}

    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }

    Tensor<double> tensor(std::vector<int> shape, double lo = -1.0, double hi = 1.0) {
        Tensor<double> t(std::move(shape));
        for (auto& v : t.data) v = real(lo, hi);
        return t;
    }

    // Entries bounded away from zero so central differences never cross a kink.
    Tensor<double> tensor_off_zero(std::vector<int> shape, double gap) {
        Tensor<double> t(std::move(shape));
        for (auto& v : t.data) {
            v = real(gap, 1.0);
            if (integer(0, 1)) v = -v;
        }
        return t;
    }

    std::vector<double> coeffs(std::size_t n) {
        std::vector<double> c(n);
        for (auto& v : c) v = real(-1.0, 1.0);
        return c;
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

// Projects a tensor-valued output onto random coefficients to get a scalar.
template <typename Op>
LossBuilder projected(std::vector<double> coeffs, Op op) {
    return [coeffs = std::move(coeffs), op](Graph<double>& g, const std::vector<Var<double>>& v) {
        return cider::ad::weighted_sum<double>(op(g, v), coeffs);
    };
}

std::vector<int> conv_out_shape(const std::vector<int>& x, const std::vector<int>& k, int stride, int pad) {
    return {x[0], k[0], (x[2] + 2 * pad - k[2]) / stride + 1, (x[3] + 2 * pad - k[3]) / stride + 1};
}

}  // namespace

double compare(std::vector<Tensor<double>>& inputs, const LossBuilder& build, double eps) {
    Graph<double> g;
    std::vector<Var<double>> leaves;
    for (const auto& t : inputs) leaves.push_back(g.leaf(t, true));
    g.backward(build(g, leaves));

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        std::vector<double> analytic = g.grad(leaves[i]);
        analytic.resize(inputs[i].numel(), 0.0);
        std::vector<double> numeric(inputs[i].numel());
        for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
            const double saved = inputs[i].data[j];
            inputs[i].data[j] = saved + eps;
            const double up = evaluate(inputs, build);
            inputs[i].data[j] = saved - eps;
            const double down = evaluate(inputs, build);
            inputs[i].data[j] = saved;
            numeric[j] = (up - down) / (2.0 * eps);
        }
        worst = std::max(worst, relative_error(analytic, numeric));
    }
    return worst;
}

std::vector<Report> operator_suite(int trials, std::uint64_t seed) {
    Sampler s(seed);
    std::vector<Report> reports;
    auto run = [&](const std::string& name, auto&& one_trial) {
        Report r{name, trials, 0.0};
        for (int t = 0; t < trials; ++t) r.max_rel_error = std::max(r.max_rel_error, one_trial());
        reports.push_back(r);
    };

    run("conv2d", [&] {
        const int k = 2 * s.integer(0, 2) + 1;
        const int stride = s.integer(1, 2);
        const int pad = s.integer(0, k / 2);
        const std::vector<int> xs{s.integer(1, 2), s.integer(1, 3), s.integer(k, k + 4), s.integer(k, k + 4)};
        const std::vector<int> ks{s.integer(1, 3), xs[1], k, k};
        std::vector<Tensor<double>> in{s.tensor(xs), s.tensor(ks)};
        const auto os = conv_out_shape(xs, ks, stride, pad);
        return compare(in, projected(s.coeffs(cider::ad::shape_numel(os)), [=](auto&, const auto& v) {
                           return cider::ad::conv2d(v[0], v[1], stride, pad);
                       }));
    });

    run("batchnorm2d/train", [&] {
        std::vector<int> xs{s.integer(1, 3), s.integer(1, 3), s.integer(1, 4), s.integer(1, 4)};
        // With two values per channel the normalized output is +-1 and its gradient vanishes.
        while (xs[0] * xs[2] * xs[3] < 4) ++xs[2];
        const int c = xs[1];
        std::vector<Tensor<double>> in{s.tensor(xs, -2.0, 2.0), s.tensor({c}, 0.5, 2.0), s.tensor({c})};
        return compare(in, projected(s.coeffs(cider::ad::shape_numel(xs)), [=](auto&, const auto& v) {
                           Tensor<double> rm({c}, 0.0), rv({c}, 1.0);
                           return cider::ad::batchnorm2d(v[0], v[1], v[2], Mode::Train, rm, rv);
                       }));
    });

    run("batchnorm2d/eval", [&] {
        const std::vector<int> xs{s.integer(1, 3), s.integer(1, 3), s.integer(1, 4), s.integer(1, 4)};
        const int c = xs[1];
        const Tensor<double> mean = s.tensor({c}), var = s.tensor({c}, 0.2, 2.0);
        std::vector<Tensor<double>> in{s.tensor(xs, -2.0, 2.0), s.tensor({c}, 0.5, 2.0), s.tensor({c})};
        return compare(in, projected(s.coeffs(cider::ad::shape_numel(xs)), [=](auto&, const auto& v) {
                           Tensor<double> rm = mean, rv = var;
                           return cider::ad::batchnorm2d(v[0], v[1], v[2], Mode::Eval, rm, rv);
                       }));
    });

    run("relu", [&] {
        const std::vector<int> xs{s.integer(1, 3), s.integer(1, 4)};
        std::vector<Tensor<double>> in{s.tensor_off_zero(xs, 1e-2)};
        return compare(in, projected(s.coeffs(cider::ad::shape_numel(xs)),
                                     [](auto&, const auto& v) { return cider::ad::relu(v[0]); }));
    });

    run("add", [&] {
        const std::vector<int> xs{s.integer(1, 2), s.integer(1, 3), s.integer(1, 3), s.integer(1, 3)};
        std::vector<Tensor<double>> in{s.tensor(xs), s.tensor(xs)};
        return compare(in, projected(s.coeffs(cider::ad::shape_numel(xs)),
                                     [](auto&, const auto& v) { return cider::ad::add(v[0], v[1]); }));
    });

    run("global_avg_pool", [&] {
        const std::vector<int> xs{s.integer(1, 3), s.integer(1, 3), s.integer(1, 4), s.integer(1, 4)};
        std::vector<Tensor<double>> in{s.tensor(xs)};
        return compare(in, projected(s.coeffs(static_cast<std::size_t>(xs[0] * xs[1])),
                                     [](auto&, const auto& v) { return cider::ad::global_avg_pool(v[0]); }));
    });

    run("linear", [&] {
        const int n = s.integer(1, 4), d = s.integer(1, 5), k = s.integer(1, 3);
        std::vector<Tensor<double>> in{s.tensor({n, d}), s.tensor({d, k}), s.tensor({k})};
        return compare(in, projected(s.coeffs(static_cast<std::size_t>(n * k)),
                                     [](auto&, const auto& v) { return cider::ad::linear(v[0], v[1], v[2]); }));
    });

    run("sigmoid", [&] {
        const std::vector<int> xs{s.integer(1, 4), 1};
        std::vector<Tensor<double>> in{s.tensor(xs, -4.0, 4.0)};
        return compare(in, projected(s.coeffs(cider::ad::shape_numel(xs)),
                                     [](auto&, const auto& v) { return cider::ad::sigmoid(v[0]); }));
    });

    run("weighted_bce", [&] {
        const int n = s.integer(1, 6);
        std::vector<double> labels(static_cast<std::size_t>(n));
        for (auto& y : labels) y = s.integer(0, 1);
        const double wp = s.real(0.2, 3.0), wn = s.real(0.2, 3.0);
        std::vector<Tensor<double>> in{s.tensor({n, 1}, 0.05, 0.95)};
        return compare(in, [=](auto&, const auto& v) {
            return cider::ad::weighted_bce<double>(v[0], labels, wp, wn);
        });
    });

    run("weighted_sum", [&] {
        const std::vector<int> xs{s.integer(1, 3), s.integer(1, 5)};
        const auto c = s.coeffs(cider::ad::shape_numel(xs));
        std::vector<Tensor<double>> in{s.tensor(xs)};
        return compare(in, [=](auto&, const auto& v) { return cider::ad::weighted_sum<double>(v[0], c); });
    });

    run("sum", [&] {
        const std::vector<int> xs{s.integer(1, 3), s.integer(1, 5)};
        std::vector<Tensor<double>> in{s.tensor(xs)};
        return compare(in, [](auto&, const auto& v) { return cider::ad::sum(v[0]); });
    });

    return reports;
}

namespace {

double model_loss(Graph<double>& g, cider::ModelParams<double>& p, Var<double> x, const std::vector<double>& labels,
                  double wp, double wn, std::vector<Var<double>>* param_vars = nullptr) {
    auto fw = cider::forward(g, p, x, Mode::Train);
    auto loss = cider::ad::weighted_bce<double>(cider::ad::sigmoid(fw.logits), labels, wp, wn);
    if (param_vars) {
        *param_vars = fw.param_vars;
        g.backward(loss);
    }
    return loss.value().data[0];
}

// Sign pattern of every ReLU input in the tape. ReLU nodes are recognized as
// single-input nodes whose value is max(input, 0) elementwise.
std::vector<bool> relu_signs(const Graph<double>& g) {
    std::vector<bool> signs;
    for (std::size_t id = 0; id < g.size(); ++id) {
        const auto& n = g.node(id);
        if (n.inputs.size() != 1) continue;
        const auto& in = g.node(n.inputs[0]).value;
        if (in.shape != n.value.shape) continue;
        bool is_relu = true;
        for (std::size_t i = 0; i < in.numel() && is_relu; ++i) is_relu = n.value.data[i] == std::max(in.data[i], 0.0);
        if (!is_relu) continue;
        for (double v : in.data) signs.push_back(v > 0.0);
    }
    return signs;
}

// Checks the entries listed in `picks` ((tensor index or -1 for the input), entry).
ModelCheck model_trial(cider::ModelParams<double>& p, Tensor<double>& x, const std::vector<double>& labels, double wp,
                       double wn, const std::vector<std::pair<int, std::size_t>>& picks) {
    Graph<double> g;
    auto xv = g.leaf(x, true);
    std::vector<Var<double>> pv;
    model_loss(g, p, xv, labels, wp, wn, &pv);

    ModelCheck out;
    std::vector<double> analytic, numeric;
    for (const auto& [ti, j] : picks) {
        const auto& grad = ti < 0 ? g.grad(xv) : g.grad(pv[static_cast<std::size_t>(ti)]);
        double& slot = ti < 0 ? x.data[j] : p.tensors[static_cast<std::size_t>(ti)].data[j];
        const double saved = slot;
        std::vector<bool> signs;
        auto eval = [&] {
            Graph<double> h;
            const double v = model_loss(h, p, h.leaf(x, false), labels, wp, wn);
            signs = relu_signs(h);
            return v;
        };
        slot = saved + kEpsilon;
        const double up = eval();
        const auto up_signs = signs;
        slot = saved - kEpsilon;
        const double down = eval();
        slot = saved;
        if (signs != up_signs) {
            ++out.kinked;
            continue;
        }
        ++out.checked;
        analytic.push_back(grad.empty() ? 0.0 : grad[j]);
        numeric.push_back((up - down) / (2.0 * kEpsilon));
    }
    out.rel_error = relative_error(analytic, numeric);
    return out;
}

void accumulate(Report& r, const ModelCheck& c) {
    r.max_rel_error = std::max(r.max_rel_error, c.rel_error);
    r.checked += c.checked;
    r.kinked += c.kinked;
}

std::vector<std::pair<int, std::size_t>> all_entries(const cider::ModelParams<double>& p, const Tensor<double>& x) {
    std::vector<std::pair<int, std::size_t>> picks;
    for (std::size_t j = 0; j < x.numel(); ++j) picks.emplace_back(-1, j);
    for (std::size_t i = 0; i < p.tensors.size(); ++i) {
        if (!p.trainable[i]) continue;
        for (std::size_t j = 0; j < p.tensors[i].numel(); ++j) picks.emplace_back(static_cast<int>(i), j);
    }
    return picks;
}

}  // namespace

ModelCheck model_check(cider::ModelParams<double>& params, Tensor<double>& input, const std::vector<double>& labels,
                   double w_pos, double w_neg) {
    return model_trial(params, input, labels, w_pos, w_neg, all_entries(params, input));
}

Report model_suite(int trials, std::uint64_t seed) {
    Sampler s(seed);
    Report r{"cider forward (all entries)", trials, 0.0};
    for (int t = 0; t < trials; ++t) {
        cider::CiderConfig cfg;
        for (auto& c : cfg.channels) c = s.integer(1, 3);
        for (auto& st : cfg.strides) st = s.integer(1, 2);
        cfg.stem_stride = s.integer(1, 2);
        cfg.kernel = s.integer(0, 3) == 0 ? 1 : 3;
        auto p = cider::build_model<double>(cfg, static_cast<std::uint64_t>(t) + seed);
        for (std::size_t i = 0; i < p.tensors.size(); ++i) {
            // Nonzero biases, scales and running statistics so every path carries gradient.
            if (!p.trainable[i] || p.names[i].find(".conv") != std::string::npos ||
                p.names[i].find(".proj") != std::string::npos) {
                continue;
            }
            for (auto& v : p.tensors[i].data) v += s.real(-0.3, 0.3);
        }
        const int n = s.integer(2, 3);
        const int ts = cfg.total_stride();
        const int extent = std::max(ts, 4);
        Tensor<double> x = s.tensor({n, 2, extent + s.integer(0, 4), extent + s.integer(0, 4)});
        std::vector<double> labels(static_cast<std::size_t>(n));
        for (auto& y : labels) y = s.integer(0, 1);

        accumulate(r, model_check(p, x, labels, s.real(0.5, 2.0), s.real(0.5, 2.0)));
    }
    return r;
}

Report default_model_suite(int trials, int samples, std::uint64_t seed) {
    Sampler s(seed);
    Report r{"cider forward (default layout, sampled entries)", trials, 0.0};
    for (int t = 0; t < trials; ++t) {
        auto p = cider::build_model<double>(cider::CiderConfig{}, seed + static_cast<std::uint64_t>(t));
        Tensor<double> x = s.tensor({2, 2, 64, 64});
        const std::vector<double> labels{0.0, 1.0};
        std::vector<std::pair<int, std::size_t>> picks;
        for (int k = 0; k < samples; ++k) {
            const auto i = static_cast<std::size_t>(s.integer(0, static_cast<int>(p.tensors.size()) - 1));
            if (!p.trainable[i]) {
                --k;
                continue;
            }
            picks.emplace_back(static_cast<int>(i),
                               static_cast<std::size_t>(s.integer(0, static_cast<int>(p.tensors[i].numel()) - 1)));
        }
        accumulate(r, model_trial(p, x, labels, 1.5, 0.75, picks));
    }
    return r;
}

}  // namespace gradcheck

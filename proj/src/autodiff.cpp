#include "cider/autodiff.hpp"

#include "cider/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cider::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorKind::ShapeMismatch, what);
}

struct ConvGeometry {
    int n, c_in, h, w, c_out, k, stride, pad, h_out, w_out;

    std::size_t col_rows() const { return static_cast<std::size_t>(c_in) * k * k; }
    std::size_t col_cols() const { return static_cast<std::size_t>(h_out) * w_out; }
};

// col[(c*k + i)*k + j][oy*w_out + ox] = x[c][oy*stride + i - pad][ox*stride + j - pad]
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
    const std::size_t cols = g.col_cols();
    for (int c = 0; c < g.c_in; ++c) {
        const T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
        for (int i = 0; i < g.k; ++i) {
            for (int j = 0; j < g.k; ++j) {
                T* row = col + ((static_cast<std::size_t>(c) * g.k + i) * g.k + j) * cols;
                for (int oy = 0; oy < g.h_out; ++oy) {
                    const int y = oy * g.stride + i - g.pad;
                    T* dst = row + static_cast<std::size_t>(oy) * g.w_out;
                    if (y < 0 || y >= g.h) {
                        std::fill(dst, dst + g.w_out, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(y) * g.w;
                    for (int ox = 0; ox < g.w_out; ++ox) {
                        const int xx = ox * g.stride + j - g.pad;
                        dst[ox] = (xx >= 0 && xx < g.w) ? src[xx] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
    const std::size_t cols = g.col_cols();
    for (int c = 0; c < g.c_in; ++c) {
        T* plane = dx + static_cast<std::size_t>(c) * g.h * g.w;
        for (int i = 0; i < g.k; ++i) {
            for (int j = 0; j < g.k; ++j) {
                const T* row = col + ((static_cast<std::size_t>(c) * g.k + i) * g.k + j) * cols;
                for (int oy = 0; oy < g.h_out; ++oy) {
                    const int y = oy * g.stride + i - g.pad;
                    if (y < 0 || y >= g.h) continue;
                    const T* src = row + static_cast<std::size_t>(oy) * g.w_out;
                    T* dst = plane + static_cast<std::size_t>(y) * g.w;
                    for (int ox = 0; ox < g.w_out; ++ox) {
                        const int xx = ox * g.stride + j - g.pad;
                        if (xx >= 0 && xx < g.w) dst[xx] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw Error(ErrorKind::ShapeMismatch, "non-positive dimension in " + shape_string(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_string(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> dims, T fill) : shape(std::move(dims)), data(shape_numel(shape), fill) {}

template <typename T>
Tensor<T>::Tensor(std::vector<int> dims, std::vector<T> values) : shape(std::move(dims)), data(std::move(values)) {
    require(shape_numel(shape) == data.size(), "tensor data length does not match shape " + shape_string(shape));
}

template <typename T>
const Tensor<T>& Var<T>::value() const {
    return graph->node(id).value;
}

template <typename T>
Var<T> Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

template <typename T>
Var<T> Graph<T>::record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (std::size_t in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
    n.inputs = std::move(inputs);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

template <typename T>
std::vector<T>& Graph<T>::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.numel(), T(0));
    return n.grad;
}

template <typename T>
void Graph<T>::backward(Var<T> loss) {
    if (nodes_[loss.id].value.numel() != 1) {
        throw Error(ErrorKind::NonScalarLoss,
                    "backward needs a scalar loss, got shape " + shape_string(nodes_[loss.id].value.shape));
    }
    grad_buffer(loss.id)[0] += T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (n.backward && !n.grad.empty()) n.backward(*this, i);
    }
}

template <typename T>
T sigmoid_value(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, int stride, int padding) {
    const auto& x = input.value();
    const auto& w = kernel.value();
    require(x.rank() == 4 && w.rank() == 4, "conv2d expects rank-4 input and kernel");
    require(x.dim(1) == w.dim(1), "conv2d channel mismatch: input " + shape_string(x.shape) + " kernel " +
                                      shape_string(w.shape));
    require(w.dim(2) == w.dim(3) && w.dim(2) % 2 == 1, "conv2d kernel must be square with odd size");
    require(stride >= 1 && padding >= 0, "conv2d stride must be >= 1 and padding >= 0");

    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride, padding, 0, 0};
    g.h_out = (g.h + 2 * padding - g.k) / stride + 1;
    g.w_out = (g.w + 2 * padding - g.k) / stride + 1;
    require(g.h + 2 * padding >= g.k && g.w + 2 * padding >= g.k && g.h_out >= 1 && g.w_out >= 1,
            "conv2d output would be empty for input " + shape_string(x.shape));

    Tensor<T> out({g.n, g.c_out, g.h_out, g.w_out});
    const std::size_t rows = g.col_rows();
    const std::size_t cols = g.col_cols();
    const std::size_t in_plane = static_cast<std::size_t>(g.c_in) * g.h * g.w;
    const std::size_t out_plane = static_cast<std::size_t>(g.c_out) * cols;

    std::vector<T> col(rows * cols);
    ConstMapMat<T> wm(w.data.data(), g.c_out, static_cast<Eigen::Index>(rows));
    for (int n = 0; n < g.n; ++n) {
        im2col(x.data.data() + n * in_plane, g, col.data());
        ConstMapMat<T> cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        MapMat<T> om(out.data.data() + n * out_plane, g.c_out, static_cast<Eigen::Index>(cols));
        om.noalias() = wm * cm;
    }

    const std::size_t in_id = input.id;
    const std::size_t k_id = kernel.id;
    return input.graph->record(std::move(out), {in_id, k_id}, [g, in_id, k_id](Graph<T>& graph, std::size_t self) {
        const auto& xv = graph.node(in_id).value;
        const auto& wv = graph.node(k_id).value;
        const auto& dy = graph.node(self).grad;
        const std::size_t rows = g.col_rows();
        const std::size_t cols = g.col_cols();
        const std::size_t in_plane = static_cast<std::size_t>(g.c_in) * g.h * g.w;
        const std::size_t out_plane = static_cast<std::size_t>(g.c_out) * cols;
        const bool need_dx = graph.requires_grad(in_id);
        const bool need_dw = graph.requires_grad(k_id);

        std::vector<T> col(rows * cols);
        ConstMapMat<T> wm(wv.data.data(), g.c_out, static_cast<Eigen::Index>(rows));
        for (int n = 0; n < g.n; ++n) {
            ConstMapMat<T> dym(dy.data() + n * out_plane, g.c_out, static_cast<Eigen::Index>(cols));
            if (need_dw) {
                im2col(xv.data.data() + n * in_plane, g, col.data());
                ConstMapMat<T> cm(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
                MapMat<T> dwm(graph.grad_buffer(k_id).data(), g.c_out, static_cast<Eigen::Index>(rows));
                dwm.noalias() += dym * cm.transpose();
            }
            if (need_dx) {
                MapMat<T> dcol(col.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
                dcol.noalias() = wm.transpose() * dym;
                col2im_add(col.data(), g, graph.grad_buffer(in_id).data() + n * in_plane);
            }
        }
    });
}

template <typename T>
Var<T> batchnorm2d(Var<T> input, Var<T> gamma, Var<T> beta, Mode mode, Tensor<T>& running_mean,
                   Tensor<T>& running_var, T momentum, T eps) {
    const auto& x = input.value();
    require(x.rank() == 4, "batchnorm2d expects N x C x H x W");
    const int n = x.dim(0), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    const std::size_t count = static_cast<std::size_t>(n) * plane;
    const auto cs = static_cast<std::size_t>(c);
    require(gamma.value().numel() == cs && beta.value().numel() == cs && running_mean.numel() == cs &&
                running_var.numel() == cs,
            "batchnorm2d parameter length must equal channel count");
    if (mode == Mode::Train && count < 2) {
        throw Error(ErrorKind::DegenerateBatch, "train-mode batch norm needs at least 2 values per channel");
    }

    const auto& gv = gamma.value().data;
    const auto& bv = beta.value().data;
    std::vector<T> inv_std(cs);
    std::vector<T> xhat(x.numel());
    Tensor<T> out(x.shape);

    for (std::size_t ch = 0; ch < cs; ++ch) {
        T mean, var;
        if (mode == Mode::Train) {
            double s = 0.0;
            for (int b = 0; b < n; ++b) {
                const T* p = x.data.data() + (b * cs + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            mean = static_cast<T>(s / static_cast<double>(count));
            double ss = 0.0;
            for (int b = 0; b < n; ++b) {
                const T* p = x.data.data() + (b * cs + ch) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = static_cast<double>(p[i]) - mean;
                    ss += d * d;
                }
            }
            var = static_cast<T>(ss / static_cast<double>(count));
            const T unbiased = static_cast<T>(ss / static_cast<double>(count - 1));
            running_mean.data[ch] = (T(1) - momentum) * running_mean.data[ch] + momentum * mean;
            running_var.data[ch] = (T(1) - momentum) * running_var.data[ch] + momentum * unbiased;
        } else {
            mean = running_mean.data[ch];
            var = running_var.data[ch];
        }
        inv_std[ch] = T(1) / std::sqrt(var + eps);
        for (int b = 0; b < n; ++b) {
            const std::size_t off = (b * cs + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const T h = (x.data[off + i] - mean) * inv_std[ch];
                xhat[off + i] = h;
                out.data[off + i] = gv[ch] * h + bv[ch];
            }
        }
    }

    const std::size_t in_id = input.id, g_id = gamma.id, b_id = beta.id;
    return input.graph->record(
        std::move(out), {in_id, g_id, b_id},
        [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Graph<T>& graph, std::size_t self) {
            const auto& dy = graph.node(self).grad;
            const auto& gvals = graph.node(g_id).value.data;
            for (std::size_t ch = 0; ch < cs; ++ch) {
                double sum_dy = 0.0, sum_dy_xhat = 0.0;
                for (int b = 0; b < n; ++b) {
                    const std::size_t off = (b * cs + ch) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        sum_dy += dy[off + i];
                        sum_dy_xhat += static_cast<double>(dy[off + i]) * xhat[off + i];
                    }
                }
                if (graph.requires_grad(g_id)) graph.grad_buffer(g_id)[ch] += static_cast<T>(sum_dy_xhat);
                if (graph.requires_grad(b_id)) graph.grad_buffer(b_id)[ch] += static_cast<T>(sum_dy);
                if (!graph.requires_grad(in_id)) continue;
                auto& dx = graph.grad_buffer(in_id);
                const T scale = gvals[ch] * inv_std[ch];
                if (mode == Mode::Train) {
                    const T m = static_cast<T>(count);
                    const T mean_dy = static_cast<T>(sum_dy) / m;
                    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat) / m;
                    for (int b = 0; b < n; ++b) {
                        const std::size_t off = (b * cs + ch) * plane;
                        for (std::size_t i = 0; i < plane; ++i) {
                            dx[off + i] += scale * (dy[off + i] - mean_dy - xhat[off + i] * mean_dy_xhat);
                        }
                    }
                } else {
                    for (int b = 0; b < n; ++b) {
                        const std::size_t off = (b * cs + ch) * plane;
                        for (std::size_t i = 0; i < plane; ++i) dx[off + i] += scale * dy[off + i];
                    }
                }
            }
        });
}

template <typename T>
Var<T> relu(Var<T> input) {
    const auto& x = input.value();
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    const std::size_t in_id = input.id;
    return input.graph->record(std::move(out), {in_id}, [in_id](Graph<T>& graph, std::size_t self) {
        const auto& xv = graph.node(in_id).value.data;
        const auto& dy = graph.node(self).grad;
        auto& dx = graph.grad_buffer(in_id);
        for (std::size_t i = 0; i < xv.size(); ++i) {
            if (xv[i] > T(0)) dx[i] += dy[i];
        }
    });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    require(av.shape == bv.shape, "add shape mismatch: " + shape_string(av.shape) + " vs " + shape_string(bv.shape));
    Tensor<T> out(av.shape);
    for (std::size_t i = 0; i < av.numel(); ++i) out.data[i] = av.data[i] + bv.data[i];
    const std::size_t a_id = a.id, b_id = b.id;
    return a.graph->record(std::move(out), {a_id, b_id}, [a_id, b_id](Graph<T>& graph, std::size_t self) {
        const auto& dy = graph.node(self).grad;
        for (std::size_t id : {a_id, b_id}) {
            if (!graph.requires_grad(id)) continue;
            auto& dx = graph.grad_buffer(id);
            for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
        }
    });
}

template <typename T>
Var<T> global_avg_pool(Var<T> input) {
    const auto& x = input.value();
    require(x.rank() == 4, "global_avg_pool expects N x C x H x W");
    const int n = x.dim(0), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    Tensor<T> out({n, c});
    for (std::size_t nc = 0; nc < static_cast<std::size_t>(n) * c; ++nc) {
        double s = 0.0;
        const T* p = x.data.data() + nc * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        out.data[nc] = static_cast<T>(s / static_cast<double>(plane));
    }
    const std::size_t in_id = input.id;
    return input.graph->record(std::move(out), {in_id}, [in_id, plane](Graph<T>& graph, std::size_t self) {
        const auto& dy = graph.node(self).grad;
        auto& dx = graph.grad_buffer(in_id);
        const T inv = T(1) / static_cast<T>(plane);
        for (std::size_t nc = 0; nc < dy.size(); ++nc) {
            const T g = dy[nc] * inv;
            T* p = dx.data() + nc * plane;
            for (std::size_t i = 0; i < plane; ++i) p[i] += g;
        }
    });
}

template <typename T>
Var<T> linear(Var<T> input, Var<T> weight, Var<T> bias) {
    const auto& x = input.value();
    const auto& w = weight.value();
    const auto& b = bias.value();
    require(x.rank() == 2 && w.rank() == 2, "linear expects N x D input and D x K weight");
    require(x.dim(1) == w.dim(0), "linear inner dimension mismatch: " + shape_string(x.shape) + " x " +
                                      shape_string(w.shape));
    require(b.numel() == static_cast<std::size_t>(w.dim(1)), "linear bias length must equal K");
    const int n = x.dim(0), d = x.dim(1), k = w.dim(1);
    Tensor<T> out({n, k});
    {
        ConstMapMat<T> xm(x.data.data(), n, d);
        ConstMapMat<T> wm(w.data.data(), d, k);
        MapMat<T> om(out.data.data(), n, k);
        om.noalias() = xm * wm;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) om(i, j) += b.data[static_cast<std::size_t>(j)];
    }
    const std::size_t x_id = input.id, w_id = weight.id, b_id = bias.id;
    return input.graph->record(std::move(out), {x_id, w_id, b_id}, [=](Graph<T>& graph, std::size_t self) {
        ConstMapMat<T> dy(graph.node(self).grad.data(), n, k);
        if (graph.requires_grad(x_id)) {
            ConstMapMat<T> wm(graph.node(w_id).value.data.data(), d, k);
            MapMat<T> dx(graph.grad_buffer(x_id).data(), n, d);
            dx.noalias() += dy * wm.transpose();
        }
        if (graph.requires_grad(w_id)) {
            ConstMapMat<T> xm(graph.node(x_id).value.data.data(), n, d);
            MapMat<T> dw(graph.grad_buffer(w_id).data(), d, k);
            dw.noalias() += xm.transpose() * dy;
        }
        if (graph.requires_grad(b_id)) {
            auto& db = graph.grad_buffer(b_id);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < k; ++j) db[static_cast<std::size_t>(j)] += dy(i, j);
        }
    });
}

template <typename T>
Var<T> sigmoid(Var<T> input) {
    const auto& x = input.value();
    Tensor<T> out(x.shape);
    for (std::size_t i = 0; i < x.numel(); ++i) out.data[i] = sigmoid_value(x.data[i]);
    const std::size_t in_id = input.id;
    return input.graph->record(std::move(out), {in_id}, [in_id](Graph<T>& graph, std::size_t self) {
        const auto& s = graph.node(self).value.data;
        const auto& dy = graph.node(self).grad;
        auto& dx = graph.grad_buffer(in_id);
        for (std::size_t i = 0; i < s.size(); ++i) dx[i] += dy[i] * s[i] * (T(1) - s[i]);
    });
}

template <typename T>
Var<T> weighted_bce(Var<T> prob, std::span<const T> labels, T w_pos, T w_neg) {
    const auto& p = prob.value();
    require(p.numel() == labels.size(), "weighted_bce: probability and label counts differ");
    require(!labels.empty(), "weighted_bce: empty batch");
    const T lo = T(1e-7), hi = T(1) - T(1e-7);
    const auto n = static_cast<T>(labels.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const T q = std::clamp(p.data[i], lo, hi);
        loss -= static_cast<double>(w_pos * labels[i] * std::log(q) + w_neg * (T(1) - labels[i]) * std::log(T(1) - q));
    }
    Tensor<T> out({1}, std::vector<T>{static_cast<T>(loss / static_cast<double>(labels.size()))});
    std::vector<T> y(labels.begin(), labels.end());
    const std::size_t p_id = prob.id;
    return prob.graph->record(std::move(out), {p_id}, [=, y = std::move(y)](Graph<T>& graph, std::size_t self) {
        const T g = graph.node(self).grad[0];
        const auto& pv = graph.node(p_id).value.data;
        auto& dp = graph.grad_buffer(p_id);
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (pv[i] < lo || pv[i] > hi) continue;
            dp[i] += g * -(w_pos * y[i] / pv[i] - w_neg * (T(1) - y[i]) / (T(1) - pv[i])) / n;
        }
    });
}

template <typename T>
Var<T> weighted_sum(Var<T> input, std::span<const T> coeffs) {
    const auto& x = input.value();
    require(x.numel() == coeffs.size(), "weighted_sum: coefficient count mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) s += static_cast<double>(coeffs[i]) * x.data[i];
    std::vector<T> c(coeffs.begin(), coeffs.end());
    const std::size_t in_id = input.id;
    return input.graph->record(Tensor<T>({1}, std::vector<T>{static_cast<T>(s)}), {in_id},
                               [in_id, c = std::move(c)](Graph<T>& graph, std::size_t self) {
                                   const T g = graph.node(self).grad[0];
                                   auto& dx = graph.grad_buffer(in_id);
                                   for (std::size_t i = 0; i < c.size(); ++i) dx[i] += g * c[i];
                               });
}

template <typename T>
Var<T> sum(Var<T> input) {
    std::vector<T> ones(input.value().numel(), T(1));
    return weighted_sum<T>(input, ones);
}

#define CIDER_INSTANTIATE(T)                                                                                   \
    template struct Tensor<T>;                                                                                 \
    template struct Var<T>;                                                                                    \
    template class Graph<T>;                                                                                   \
    template T sigmoid_value<T>(T);                                                                            \
    template Var<T> conv2d<T>(Var<T>, Var<T>, int, int);                                                       \
    template Var<T> batchnorm2d<T>(Var<T>, Var<T>, Var<T>, Mode, Tensor<T>&, Tensor<T>&, T, T);                \
    template Var<T> relu<T>(Var<T>);                                                                           \
    template Var<T> add<T>(Var<T>, Var<T>);                                                                    \
    template Var<T> global_avg_pool<T>(Var<T>);                                                                \
    template Var<T> linear<T>(Var<T>, Var<T>, Var<T>);                                                         \
    template Var<T> sigmoid<T>(Var<T>);                                                                        \
    template Var<T> weighted_bce<T>(Var<T>, std::span<const T>, T, T);                                         \
    template Var<T> weighted_sum<T>(Var<T>, std::span<const T>);                                               \
    template Var<T> sum<T>(Var<T>);

CIDER_INSTANTIATE(float)
CIDER_INSTANTIATE(double)

#undef CIDER_INSTANTIATE

}  // namespace cider::ad

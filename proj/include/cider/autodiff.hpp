#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cider::ad {

/// Dense row-major tensor. Plain value type; autodiff bookkeeping lives in Graph.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, T fill = T(0));
    Tensor(std::vector<int> dims, std::vector<T> values);

    std::size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_string(const std::vector<int>& shape);

enum class Mode { Train, Eval };

template <typename T>
class Graph;

/// Handle to a node in a Graph.
template <typename T>
struct Var {
    Graph<T>* graph = nullptr;
    std::size_t id = 0;

    const Tensor<T>& value() const;
    const std::vector<int>& shape() const { return value().shape; }
};

/// Tape of operation records in creation order, which is a topological
/// order: every op can only consume nodes that already exist.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, std::size_t self)>;

    struct Node {
        Tensor<T> value;
        std::vector<T> grad;
        bool requires_grad = false;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
    };

    Var<T> leaf(Tensor<T> value, bool requires_grad = false);
    Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn backward);

    /// Reverse accumulation from a scalar node. Gradients of nodes consumed
    /// several times are summed over consumers. Throws NonScalarLoss.
    void backward(Var<T> loss);

    const Node& node(std::size_t id) const { return nodes_[id]; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    /// Gradient buffer of a node, zero-allocated on first access.
    std::vector<T>& grad_buffer(std::size_t id);
    /// Gradient after backward(); empty if the node received none.
    const std::vector<T>& grad(Var<T> v) const { return nodes_[v.id].grad; }

private:
    std::vector<Node> nodes_;
};

/// Cross-correlation. input N x Cin x H x W, kernel Cout x Cin x k x k (k odd).
template <typename T>
Var<T> conv2d(Var<T> input, Var<T> kernel, int stride, int padding);

/// Batch normalization over (N, H, W) per channel. In Train mode the batch
/// statistics normalize the input and the running buffers are updated as
/// running = (1 - momentum) * running + momentum * batch (unbiased variance).
template <typename T>
Var<T> batchnorm2d(Var<T> input, Var<T> gamma, Var<T> beta, Mode mode, Tensor<T>& running_mean,
                   Tensor<T>& running_var, T momentum = T(0.1), T eps = T(1e-5));

template <typename T>
Var<T> relu(Var<T> input);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

/// N x C x H x W -> N x C.
template <typename T>
Var<T> global_avg_pool(Var<T> input);

/// input N x D, weight D x K, bias K -> N x K.
template <typename T>
Var<T> linear(Var<T> input, Var<T> weight, Var<T> bias);

template <typename T>
Var<T> sigmoid(Var<T> input);

/// mean_i -[w_pos y log p + w_neg (1 - y) log(1 - p)], p clamped to [1e-7, 1 - 1e-7].
template <typename T>
Var<T> weighted_bce(Var<T> prob, std::span<const T> labels, T w_pos, T w_neg);

/// Scalar sum_i coeff_i * x_i. Used as a generic projection loss in gradient checks.
template <typename T>
Var<T> weighted_sum(Var<T> input, std::span<const T> coeffs);

template <typename T>
Var<T> sum(Var<T> input);

template <typename T>
T sigmoid_value(T x);

}  // namespace cider::ad

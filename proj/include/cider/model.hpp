#pragma once

#include "cider/autodiff.hpp"
#include "cider/checkpoint.hpp"
#include "cider/dsp.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace cider {

/// Residual CNN layout: a stem convolution followed by four residual blocks
/// of two convolutions each, i.e. nine convolutional layers. 1x1 strided
/// projections on dimension-changing skips are not counted as layers.
struct CiderConfig {
    std::array<int, 4> channels{16, 32, 64, 128};
    int kernel = 3;
    std::array<int, 4> strides{2, 2, 2, 2};
    int stem_stride = 2;
    int input_channels = 2;

    void validate() const;
    /// Total spatial downsampling; input F and W must be at least this.
    int total_stride() const;
};

/// Named learnable tensors plus batch-norm running buffers, in a fixed order.
template <typename T>
struct ModelParams {
    CiderConfig config;
    std::uint64_t seed = 0;
    std::vector<std::string> names;
    std::vector<ad::Tensor<T>> tensors;
    std::vector<bool> trainable;

    std::size_t index_of(const std::string& name) const;
    ad::Tensor<T>& at(const std::string& name) { return tensors[index_of(name)]; }
    const ad::Tensor<T>& at(const std::string& name) const { return tensors[index_of(name)]; }

    /// Number of learnable scalars (running statistics excluded).
    std::size_t parameter_count() const;

    template <typename U>
    ModelParams<U> cast() const {
        ModelParams<U> out;
        out.config = config;
        out.seed = seed;
        out.names = names;
        out.trainable = trainable;
        for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
        return out;
    }
};

/// Deterministic He-uniform initialization (bound sqrt(6 / fan_in)) for
/// convolutions, gamma=1, beta=0, running stats (0, 1), zero head bias.
template <typename T>
ModelParams<T> build_model(const CiderConfig& config, std::uint64_t seed);

struct ForwardOptions {
    /// Test hook: drop the residual skip path in every block.
    bool disable_skip = false;
};

struct ForwardTrace {
    int conv_layers = 0;
    int projections = 0;
};

template <typename T>
struct ForwardResult {
    ad::Var<T> logits;                  // N x 1
    std::vector<ad::Var<T>> param_vars;  // one per params.tensors entry (buffers included, no grad)
    ForwardTrace trace;
};

/// Records the network on `graph`. Train mode updates running statistics in
/// `params`; eval mode leaves them untouched.
template <typename T>
ForwardResult<T> forward(ad::Graph<T>& graph, ModelParams<T>& params, ad::Var<T> input, ad::Mode mode,
                         const ForwardOptions& options = {});

/// Stack model inputs into an N x 2 x F x W tensor.
template <typename T>
ad::Tensor<T> make_batch(const std::vector<const ModelInput*>& inputs);

/// Eval-mode logits for a batch, processed in groups of `batch_size`.
std::vector<float> predict_logits(const ModelParams<float>& params, const std::vector<const ModelInput*>& inputs,
                                  std::size_t batch_size = 16);

std::vector<ad::NamedTensor> to_named_tensors(const ModelParams<float>& params);

/// Checkpoint + "<path>.json" sidecar holding the config, seed, and caller metadata.
void save_model(const std::filesystem::path& path, const ModelParams<float>& params,
                const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());
ModelParams<float> load_model(const std::filesystem::path& path, nlohmann::ordered_json* metadata = nullptr);

nlohmann::ordered_json config_to_json(const CiderConfig& config);
CiderConfig config_from_json(const nlohmann::ordered_json& j);

}  // namespace cider

#include "cider/model.hpp"

#include "cider/error.hpp"
#include "cider/rng.hpp"

#include <cmath>
#include <fstream>

namespace cider {

using ad::Mode;
using ad::Tensor;
using ad::Var;

void CiderConfig::validate() const {
    for (int c : channels) {
        if (c <= 0) throw Error(ErrorKind::InvalidConfig, "channel counts must be positive");
    }
    for (int s : strides) {
        if (s <= 0) throw Error(ErrorKind::InvalidConfig, "strides must be positive");
    }
    if (kernel <= 0 || kernel % 2 == 0) throw Error(ErrorKind::InvalidConfig, "kernel must be odd and positive");
    if (stem_stride <= 0) throw Error(ErrorKind::InvalidConfig, "stem_stride must be positive");
    if (input_channels != 2) throw Error(ErrorKind::InvalidConfig, "input must have exactly 2 channels");
}

int CiderConfig::total_stride() const {
    int s = stem_stride;
    for (int b : strides) s *= b;
    return s;
}

template <typename T>
std::size_t ModelParams<T>::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return i;
    }
    throw Error(ErrorKind::InvalidArgument, "no parameter named " + name);
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (trainable[i]) n += tensors[i].numel();
    }
    return n;
}

namespace {

bool needs_projection(int in_channels, int out_channels, int stride) {
    return in_channels != out_channels || stride != 1;
}

template <typename T>
void add_conv(ModelParams<T>& p, const std::string& name, int c_out, int c_in, int k, Rng& rng) {
    const double bound = std::sqrt(6.0 / (static_cast<double>(c_in) * k * k));
    Tensor<T> w({c_out, c_in, k, k});
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
    p.names.push_back(name);
    p.tensors.push_back(std::move(w));
    p.trainable.push_back(true);
}

template <typename T>
void add_bn(ModelParams<T>& p, const std::string& name, int c) {
    p.names.insert(p.names.end(), {name + ".gamma", name + ".beta", name + ".running_mean", name + ".running_var"});
    p.tensors.push_back(Tensor<T>({c}, T(1)));
    p.tensors.push_back(Tensor<T>({c}, T(0)));
    p.tensors.push_back(Tensor<T>({c}, T(0)));
    p.tensors.push_back(Tensor<T>({c}, T(1)));
    p.trainable.insert(p.trainable.end(), {true, true, false, false});
}

template <typename T>
struct Builder {
    ad::Graph<T>& graph;
    ModelParams<T>& params;
    ForwardResult<T>& result;
    Mode mode;

    Var<T> var(const std::string& name) { return result.param_vars[params.index_of(name)]; }

    Var<T> conv(Var<T> x, const std::string& name, int stride) {
        const int k = params.at(name).dim(2);
        return ad::conv2d(x, var(name), stride, k / 2);
    }

    Var<T> bn(Var<T> x, const std::string& name) {
        return ad::batchnorm2d(x, var(name + ".gamma"), var(name + ".beta"), mode,
                               params.at(name + ".running_mean"), params.at(name + ".running_var"));
    }
};

}  // namespace

template <typename T>
ModelParams<T> build_model(const CiderConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams<T> p;
    p.config = config;
    p.seed = seed;
    Rng rng(mix_seed({seed, 0x43494445ULL}));
    const int k = config.kernel;

    add_conv(p, "stem.conv", config.channels[0], config.input_channels, k, rng);
    add_bn(p, "stem.bn", config.channels[0]);
    int in = config.channels[0];
    for (int b = 0; b < 4; ++b) {
        const int out = config.channels[b];
        const std::string prefix = "block" + std::to_string(b + 1);
        add_conv(p, prefix + ".conv1", out, in, k, rng);
        add_bn(p, prefix + ".bn1", out);
        add_conv(p, prefix + ".conv2", out, out, k, rng);
        add_bn(p, prefix + ".bn2", out);
        if (needs_projection(in, out, config.strides[b])) {
            add_conv(p, prefix + ".proj", out, in, 1, rng);
            add_bn(p, prefix + ".proj_bn", out);
        }
        in = out;
    }

    const double head_bound = 1.0 / std::sqrt(static_cast<double>(in));
    Tensor<T> head({in, 1});
    for (auto& v : head.data) v = static_cast<T>(rng.uniform(-head_bound, head_bound));
    p.names.push_back("head.weight");
    p.tensors.push_back(std::move(head));
    p.trainable.push_back(true);
    p.names.push_back("head.bias");
    p.tensors.push_back(Tensor<T>({1}, T(0)));
    p.trainable.push_back(true);
    return p;
}

template <typename T>
ForwardResult<T> forward(ad::Graph<T>& graph, ModelParams<T>& params, Var<T> input, Mode mode,
                         const ForwardOptions& options) {
    const auto& cfg = params.config;
    const auto& x = input.value();
    if (x.rank() != 4 || x.dim(1) != cfg.input_channels) {
        throw Error(ErrorKind::ShapeMismatch, "model input must be N x 2 x F x W, got " + ad::shape_string(x.shape));
    }
    const int min_extent = cfg.total_stride();
    if (x.dim(2) < min_extent || x.dim(3) < min_extent) {
        throw Error(ErrorKind::ShapeTooSmall, "spatial dims " + ad::shape_string(x.shape) +
                                                  " smaller than total stride " + std::to_string(min_extent));
    }

    ForwardResult<T> result;
    result.param_vars.reserve(params.tensors.size());
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        result.param_vars.push_back(graph.leaf(params.tensors[i], params.trainable[i]));
    }
    Builder<T> b{graph, params, result, mode};

    Var<T> h = ad::relu(b.bn(b.conv(input, "stem.conv", cfg.stem_stride), "stem.bn"));
    ++result.trace.conv_layers;

    int in = cfg.channels[0];
    for (int blk = 0; blk < 4; ++blk) {
        const int out = cfg.channels[blk];
        const int stride = cfg.strides[blk];
        const std::string prefix = "block" + std::to_string(blk + 1);

        Var<T> y = ad::relu(b.bn(b.conv(h, prefix + ".conv1", stride), prefix + ".bn1"));
        y = b.bn(b.conv(y, prefix + ".conv2", 1), prefix + ".bn2");
        result.trace.conv_layers += 2;

        if (!options.disable_skip) {
            Var<T> skip = h;
            if (needs_projection(in, out, stride)) {
                skip = b.bn(b.conv(h, prefix + ".proj", stride), prefix + ".proj_bn");
                ++result.trace.projections;
            }
            y = ad::add(y, skip);
        }
        h = ad::relu(y);
        in = out;
    }

    Var<T> pooled = ad::global_avg_pool(h);
    result.logits = ad::linear(pooled, b.var("head.weight"), b.var("head.bias"));
    return result;
}

template <typename T>
Tensor<T> make_batch(const std::vector<const ModelInput*>& inputs) {
    if (inputs.empty()) throw Error(ErrorKind::EmptyList, "empty batch");
    const int f = inputs.front()->freq_bins;
    const int w = inputs.front()->frames;
    Tensor<T> batch({static_cast<int>(inputs.size()), 2, f, w});
    const std::size_t per = static_cast<std::size_t>(2) * f * w;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i]->freq_bins != f || inputs[i]->frames != w) {
            throw Error(ErrorKind::ShapeMismatch, "inputs in a batch must share F and W");
        }
        std::copy(inputs[i]->data.begin(), inputs[i]->data.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(i * per));
    }
    return batch;
}

std::vector<float> predict_logits(const ModelParams<float>& params, const std::vector<const ModelInput*>& inputs,
                                  std::size_t batch_size) {
    std::vector<float> logits;
    logits.reserve(inputs.size());
    // Eval mode never writes the running buffers.
    auto& shared = const_cast<ModelParams<float>&>(params);
    for (std::size_t start = 0; start < inputs.size(); start += batch_size) {
        const std::size_t end = std::min(inputs.size(), start + batch_size);
        std::vector<const ModelInput*> group(inputs.begin() + static_cast<std::ptrdiff_t>(start),
                                             inputs.begin() + static_cast<std::ptrdiff_t>(end));
        ad::Graph<float> graph;
        auto x = graph.leaf(make_batch<float>(group));
        auto result = forward(graph, shared, x, Mode::Eval);
        const auto& out = result.logits.value().data;
        logits.insert(logits.end(), out.begin(), out.end());
    }
    return logits;
}

std::vector<ad::NamedTensor> to_named_tensors(const ModelParams<float>& params) {
    std::vector<ad::NamedTensor> out;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) out.push_back({params.names[i], params.tensors[i]});
    return out;
}

nlohmann::ordered_json config_to_json(const CiderConfig& config) {
    nlohmann::ordered_json j;
    j["channels"] = config.channels;
    j["kernel"] = config.kernel;
    j["strides"] = config.strides;
    j["stem_stride"] = config.stem_stride;
    j["input_channels"] = config.input_channels;
    return j;
}

CiderConfig config_from_json(const nlohmann::ordered_json& j) {
    CiderConfig c;
    c.channels = j.at("channels").get<std::array<int, 4>>();
    c.kernel = j.at("kernel").get<int>();
    c.strides = j.at("strides").get<std::array<int, 4>>();
    c.stem_stride = j.at("stem_stride").get<int>();
    c.input_channels = j.value("input_channels", 2);
    c.validate();
    return c;
}

void save_model(const std::filesystem::path& path, const ModelParams<float>& params,
                const nlohmann::ordered_json& metadata) {
    ad::write_checkpoint(path, to_named_tensors(params));
    nlohmann::ordered_json side;
    side["config"] = config_to_json(params.config);
    side["seed"] = params.seed;
    side["metadata"] = metadata;
    std::ofstream out(path.string() + ".json");
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write sidecar for " + path.string());
    out << side.dump(2) << '\n';
}

ModelParams<float> load_model(const std::filesystem::path& path, nlohmann::ordered_json* metadata) {
    std::ifstream in(path.string() + ".json");
    if (!in) throw Error(ErrorKind::MissingFile, "missing sidecar " + path.string() + ".json");
    const auto side = nlohmann::ordered_json::parse(in);
    auto params = build_model<float>(config_from_json(side.at("config")), side.at("seed").get<std::uint64_t>());
    const auto stored = ad::read_checkpoint(path);
    if (stored.size() != params.tensors.size()) {
        throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor count does not match config");
    }
    for (const auto& nt : stored) {
        auto& dst = params.at(nt.name);
        if (dst.shape != nt.tensor.shape) {
            throw Error(ErrorKind::ShapeMismatch, "checkpoint tensor " + nt.name + " has wrong shape");
        }
        dst = nt.tensor;
    }
    if (metadata) *metadata = side.value("metadata", nlohmann::ordered_json::object());
    return params;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template ModelParams<float> build_model<float>(const CiderConfig&, std::uint64_t);
template ModelParams<double> build_model<double>(const CiderConfig&, std::uint64_t);
template ForwardResult<float> forward<float>(ad::Graph<float>&, ModelParams<float>&, Var<float>, Mode,
                                             const ForwardOptions&);
template ForwardResult<double> forward<double>(ad::Graph<double>&, ModelParams<double>&, Var<double>, Mode,
                                               const ForwardOptions&);
template Tensor<float> make_batch<float>(const std::vector<const ModelInput*>&);
template Tensor<double> make_batch<double>(const std::vector<const ModelInput*>&);

}  // namespace cider

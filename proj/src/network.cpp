#include "disordernet/network.hpp"

#include <algorithm>
#include <cmath>

#include "disordernet/error.hpp"

namespace dnet {

using layers::ConvParams;
using layers::DenseParams;
using layers::Mode;

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d: return "Conv2D";
        case LayerKind::maxpool2d: return "MaxPooling2D";
        case LayerKind::flatten: return "Flatten";
        case LayerKind::dropout: return "Dropout";
        case LayerKind::dense: return "Dense";
    }
    return "Unknown";
}

LayerSpec LayerSpec::conv(std::size_t filters, std::size_t kernel, Activation act) {
    return LayerSpec{LayerKind::conv2d, filters, kernel, 1, act, 0.0};
}

LayerSpec LayerSpec::maxpool(std::size_t window) {
    return LayerSpec{LayerKind::maxpool2d, 0, window, window, Activation::none, 0.0};
}

LayerSpec LayerSpec::flatten() { return LayerSpec{LayerKind::flatten, 0, 0, 1, Activation::none, 0.0}; }

LayerSpec LayerSpec::dropout(double rate) {
    return LayerSpec{LayerKind::dropout, 0, 0, 1, Activation::none, rate};
}

LayerSpec LayerSpec::dense(std::size_t units, Activation act) {
    return LayerSpec{LayerKind::dense, units, 0, 1, act, 0.0};
}

namespace {

Shape layer_output_shape(const LayerSpec& layer, const Shape& in, std::size_t index) {
    const auto where = [&] { return "layer " + std::to_string(index) + " (" + to_string(layer.kind) + ")"; };
    switch (layer.kind) {
        case LayerKind::conv2d: {
            if (in.rank() != 3) throw ShapeError(where() + ": expects (H, W, C) input, got " + in.str());
            if (layer.units == 0 || layer.kernel == 0 || layer.stride == 0) {
                throw ShapeError(where() + ": filters, kernel and stride must be positive");
            }
            if (in[0] < layer.kernel || in[1] < layer.kernel) {
                throw ShapeError(where() + ": input " + in.str() + " smaller than kernel");
            }
            return Shape{(in[0] - layer.kernel) / layer.stride + 1, (in[1] - layer.kernel) / layer.stride + 1,
                         layer.units};
        }
        case LayerKind::maxpool2d: {
            if (in.rank() != 3) throw ShapeError(where() + ": expects (H, W, C) input, got " + in.str());
            if (layer.kernel == 0 || layer.stride == 0) throw ShapeError(where() + ": window must be positive");
            if (in[0] < layer.kernel || in[1] < layer.kernel) {
                throw ShapeError(where() + ": input " + in.str() + " smaller than pool window");
            }
            return Shape{(in[0] - layer.kernel) / layer.stride + 1, (in[1] - layer.kernel) / layer.stride + 1, in[2]};
        }
        case LayerKind::flatten: return Shape{in.elements()};
        case LayerKind::dropout:
            if (!(layer.rate >= 0.0 && layer.rate < 1.0)) {
                throw ParamError(where() + ": dropout rate must be in [0, 1)");
            }
            return in;
        case LayerKind::dense:
            if (in.rank() != 1) throw ShapeError(where() + ": expects flat input, got " + in.str());
            if (layer.units == 0) throw ShapeError(where() + ": units must be positive");
            return Shape{layer.units};
    }
    throw ShapeError(where() + ": unknown layer kind");
}

std::size_t layer_parameter_count(const LayerSpec& layer, const Shape& in) {
    switch (layer.kind) {
        case LayerKind::conv2d: return layers::conv_parameter_count(layer.kernel, layer.kernel, in[2], layer.units);
        case LayerKind::dense: return layers::dense_parameter_count(in[0], layer.units);
        default: return 0;
    }
}

void apply_activation(Activation act, Tensor& t) {
    switch (act) {
        case Activation::none: return;
        case Activation::relu: t = layers::relu(t); return;
        case Activation::sigmoid: t = layers::sigmoid(t); return;
    }
}

Tensor activation_backward(Activation act, const Tensor& output, const Tensor& grad) {
    switch (act) {
        case Activation::none: return grad;
        // output > 0 exactly where the pre-activation was > 0.
        case Activation::relu: return layers::relu_backward(output, grad);
        case Activation::sigmoid: return layers::sigmoid_backward(output, grad);
    }
    return grad;
}

void init_uniform(Tensor& t, double limit, Rng& rng) {
    for (auto& v : t.data()) v = rng.uniform(-limit, limit);
}

}  // namespace

std::vector<Shape> NetworkSpec::output_shapes() const {
    std::vector<Shape> shapes;
    Shape current = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        current = layer_output_shape(layers[i], current, i);
        shapes.push_back(current);
    }
    return shapes;
}

std::vector<std::size_t> NetworkSpec::parameter_counts() const {
    std::vector<std::size_t> counts;
    Shape current = input;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        counts.push_back(layer_parameter_count(layers[i], current));
        current = layer_output_shape(layers[i], current, i);
    }
    return counts;
}

std::size_t NetworkSpec::total_parameters() const {
    std::size_t total = 0;
    for (auto c : parameter_counts()) total += c;
    return total;
}

NetworkSpec disordernet_spec(double dropout_rate) {
    return NetworkSpec{
        Shape{kPatchSize, kPatchSize, kPatchChannels},
        {
            LayerSpec::conv(32, 3),
            LayerSpec::maxpool(2),
            LayerSpec::conv(64, 3),
            LayerSpec::maxpool(2),
            LayerSpec::conv(128, 3),
            LayerSpec::maxpool(2),
            LayerSpec::conv(128, 3),
            LayerSpec::maxpool(2),
            LayerSpec::flatten(),
            LayerSpec::dropout(dropout_rate),
            LayerSpec::dense(512, Activation::relu),
            LayerSpec::dense(1, Activation::sigmoid),
        },
    };
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed), rng_(seed) {
    const auto shapes = spec_.output_shapes();
    if (shapes.empty() || shapes.back().elements() != 1) {
        throw ShapeError("network must end in a single output unit");
    }
    Shape in = spec_.input;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& layer = spec_.layers[i];
        Rng init(derive_seed(seed, i));
        if (layer.kind == LayerKind::conv2d) {
            auto p = layers::make_conv(layer.kernel, layer.kernel, in[2], layer.units, layer.stride);
            const double fan_in = static_cast<double>(layer.kernel * layer.kernel * in[2]);
            const double fan_out = static_cast<double>(layer.kernel * layer.kernel * layer.units);
            const double limit = layer.activation == Activation::relu ? std::sqrt(6.0 / fan_in)
                                                                      : std::sqrt(6.0 / (fan_in + fan_out));
            init_uniform(p.kernels, limit, init);
            params_.emplace_back(std::move(p));
        } else if (layer.kind == LayerKind::dense) {
            auto p = layers::make_dense(in[0], layer.units);
            const double fan_in = static_cast<double>(in[0]);
            const double fan_out = static_cast<double>(layer.units);
            const double limit = layer.activation == Activation::relu ? std::sqrt(6.0 / fan_in)
                                                                      : std::sqrt(6.0 / (fan_in + fan_out));
            init_uniform(p.weights, limit, init);
            params_.emplace_back(std::move(p));
        } else {
            params_.emplace_back(std::monostate{});
        }
        in = shapes[i];
    }
}

Network::Network(NetworkSpec spec, std::vector<LayerParams> params, std::uint64_t seed)
    : spec_(std::move(spec)), params_(std::move(params)), seed_(seed), rng_(seed) {
    const auto shapes = spec_.output_shapes();
    if (shapes.empty() || shapes.back().elements() != 1) {
        throw ShapeError("network must end in a single output unit");
    }
    if (params_.size() != spec_.layers.size()) {
        throw ShapeError("parameter list has " + std::to_string(params_.size()) + " entries for " +
                         std::to_string(spec_.layers.size()) + " layers");
    }
    Shape in = spec_.input;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& layer = spec_.layers[i];
        const auto bad = [&] { return ShapeError("parameters for layer " + std::to_string(i) + " do not match its spec"); };
        if (layer.kind == LayerKind::conv2d) {
            const auto* p = std::get_if<ConvParams>(&params_[i]);
            if (!p || p->kernels.shape() != Shape{layer.kernel, layer.kernel, in[2], layer.units} ||
                p->biases.shape() != Shape{layer.units}) {
                throw bad();
            }
        } else if (layer.kind == LayerKind::dense) {
            const auto* p = std::get_if<DenseParams>(&params_[i]);
            if (!p || p->weights.shape() != Shape{in[0], layer.units} || p->biases.shape() != Shape{layer.units}) {
                throw bad();
            }
        } else if (!std::holds_alternative<std::monostate>(params_[i])) {
            throw bad();
        }
        in = shapes[i];
    }
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> out;
    for (auto& p : params_) {
        if (auto* c = std::get_if<ConvParams>(&p)) {
            out.push_back(&c->kernels);
            out.push_back(&c->biases);
        } else if (auto* d = std::get_if<DenseParams>(&p)) {
            out.push_back(&d->weights);
            out.push_back(&d->biases);
        }
    }
    return out;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> out;
    for (auto* t : const_cast<Network*>(this)->parameters()) out.push_back(t);
    return out;
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : parameters()) n += t->size();
    return n;
}

void Network::check_input(const Tensor& input) const {
    const Shape& s = input.shape();
    const Shape& expected = spec_.input;
    const bool single = s == expected;
    const bool batched = s.rank() == expected.rank() + 1 &&
                         std::equal(expected.dims().begin(), expected.dims().end(), s.dims().begin() + 1);
    if (!single && !batched) {
        throw ShapeError("network input must be " + expected.str() + " or batched, got " + s.str());
    }
}

ForwardPass Network::run(const Tensor& input, Mode mode, Rng* rng) const {
    check_input(input);
    const bool batched = input.shape().rank() == spec_.input.rank() + 1;
    const std::size_t batch = batched ? input.shape()[0] : 1;
    if (mode == Mode::train && rng == nullptr) throw ParamError("train-mode forward requires an RNG");

    std::optional<ForwardCache> cache;
    if (mode == Mode::train) {
        cache.emplace();
        cache->input = input;
    }

    Tensor x = input;
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& layer = spec_.layers[i];
        switch (layer.kind) {
            case LayerKind::conv2d:
                x = layers::conv2d_forward(x, std::get<ConvParams>(params_[i]));
                apply_activation(layer.activation, x);
                break;
            case LayerKind::maxpool2d: {
                auto r = layers::maxpool_forward(x, layers::PoolParams{layer.kernel, layer.stride});
                x = std::move(r.output);
                if (cache) cache->pool_records.push_back(std::move(r.record));
                break;
            }
            case LayerKind::flatten: {
                const std::size_t per = x.size() / batch;
                x = std::move(x).reshaped(batched ? Shape{batch, per} : Shape{per});
                break;
            }
            case LayerKind::dropout: {
                if (mode == Mode::train) {
                    auto r = layers::dropout(x, layer.rate, mode, *rng);
                    x = std::move(r.output);
                    cache->dropout_masks.push_back(std::move(r.mask));
                }
                break;
            }
            case LayerKind::dense:
                x = layers::dense_forward(x, std::get<DenseParams>(params_[i]));
                apply_activation(layer.activation, x);
                break;
        }
        if (cache) cache->outputs.push_back(x);
    }
    ForwardPass pass{std::move(x).reshaped(Shape{batch}), std::move(cache)};
    return pass;
}

Tensor Network::predict_scores(const Tensor& input) const { return run(input, Mode::infer).scores; }

std::vector<Tensor> Network::backward(const ForwardCache& cache, const Tensor& logit_grad) const {
    const std::size_t n_layers = spec_.layers.size();
    if (cache.outputs.size() != n_layers) throw ShapeError("backward: cache does not match network");
    const Shape& last_shape = cache.outputs.back().shape();
    if (logit_grad.size() != last_shape.elements()) {
        throw ShapeError("backward: logit gradient " + logit_grad.shape().str() + " does not match output " +
                         last_shape.str());
    }

    std::vector<std::vector<Tensor>> per_layer(n_layers);
    Tensor g = logit_grad.reshaped(last_shape);
    std::size_t pool_index = cache.pool_records.size();
    std::size_t dropout_index = cache.dropout_masks.size();

    for (std::size_t k = n_layers; k-- > 0;) {
        const auto& layer = spec_.layers[k];
        const Tensor& layer_input = k == 0 ? cache.input : cache.outputs[k - 1];
        // The last layer receives dLoss/dlogit, so its sigmoid is already folded in.
        const bool skip_activation = k + 1 == n_layers && layer.activation == Activation::sigmoid;
        if (!skip_activation) g = activation_backward(layer.activation, cache.outputs[k], g);

        switch (layer.kind) {
            case LayerKind::conv2d: {
                auto lg = layers::conv2d_backward(layer_input, std::get<ConvParams>(params_[k]), g, k != 0);
                g = std::move(lg.input_grad);
                per_layer[k] = std::move(lg.param_grads);
                break;
            }
            case LayerKind::maxpool2d: g = layers::maxpool_backward(cache.pool_records.at(--pool_index), g); break;
            case LayerKind::flatten: g = std::move(g).reshaped(layer_input.shape()); break;
            case LayerKind::dropout:
                if (!cache.dropout_masks.empty()) g = layers::dropout_backward(cache.dropout_masks.at(--dropout_index), g);
                break;
            case LayerKind::dense: {
                auto lg = layers::dense_backward(layer_input, std::get<DenseParams>(params_[k]), g);
                g = std::move(lg.input_grad);
                per_layer[k] = std::move(lg.param_grads);
                break;
            }
        }
    }

    std::vector<Tensor> grads;
    for (auto& v : per_layer) {
        for (auto& t : v) grads.push_back(std::move(t));
    }
    return grads;
}

bool operator==(const Network& a, const Network& b) {
    if (!(a.spec_ == b.spec_)) return false;
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (!(*pa[i] == *pb[i])) return false;
    }
    return true;
}

Network build_disordernet(std::uint64_t seed, double dropout_rate) {
    return Network(disordernet_spec(dropout_rate), seed);
}

ForwardResult forward(Network& net, const Tensor& patch) {
    if (patch.shape() != net.spec().input) {
        throw ShapeError("forward expects a single patch of shape " + net.spec().input.str() + ", got " +
                         patch.shape().str());
    }
    auto pass = net.run(patch, net.mode(), net.mode() == Mode::train ? &net.rng() : nullptr);
    return ForwardResult{pass.scores[0], std::move(pass.cache)};
}

Label classify(double score, double threshold) { return score >= threshold ? Label::lesion : Label::healthy; }

Label predict(const Network& net, const Tensor& patch, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ParamError("threshold must be in (0, 1), got " + std::to_string(threshold));
    }
    if (patch.shape() != net.spec().input) {
        throw ShapeError("predict expects a single patch of shape " + net.spec().input.str() + ", got " +
                         patch.shape().str());
    }
    return classify(net.predict_scores(patch)[0], threshold);
}

}  // namespace dnet

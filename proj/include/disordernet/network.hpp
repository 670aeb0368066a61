#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "disordernet/layers.hpp"
#include "disordernet/rng.hpp"
#include "disordernet/tensor.hpp"

namespace dnet {

enum class LayerKind : std::uint8_t { conv2d = 1, maxpool2d = 2, flatten = 3, dropout = 4, dense = 5 };
enum class Activation : std::uint8_t { none = 0, relu = 1, sigmoid = 2 };

std::string to_string(LayerKind kind);

// One row of the sequential stack. `units` is the filter count for conv2d and
// the output width for dense; `kernel` is the square kernel size (conv2d) or
// pool window (maxpool2d); `stride` applies to both.
struct LayerSpec {
    LayerKind kind = LayerKind::flatten;
    std::size_t units = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;
    Activation activation = Activation::none;
    double rate = 0.0;

    static LayerSpec conv(std::size_t filters, std::size_t kernel, Activation act = Activation::relu);
    static LayerSpec maxpool(std::size_t window);
    static LayerSpec flatten();
    static LayerSpec dropout(double rate);
    static LayerSpec dense(std::size_t units, Activation act);

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
    Shape input;
    std::vector<LayerSpec> layers;

    // Output shape of every layer (unbatched); throws ShapeError on a bad chain.
    std::vector<Shape> output_shapes() const;
    std::vector<std::size_t> parameter_counts() const;
    std::size_t total_parameters() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Conv32, Pool, Conv64, Pool, Conv128, Pool, Conv128, Pool, Flatten, Dropout,
// Dense512 (ReLU), Dense1 (sigmoid) over (50, 50, 3) input; 307,393 parameters.
NetworkSpec disordernet_spec(double dropout_rate = 0.5);

inline constexpr std::size_t kPatchSize = 50;
inline constexpr std::size_t kPatchChannels = 3;

enum class Label : std::uint8_t { healthy = 0, lesion = 1 };

// Activations kept for backpropagation.
struct ForwardCache {
    std::vector<Tensor> outputs;  // outputs[i] = output of layer i (post-activation)
    std::vector<layers::PoolRecord> pool_records;
    std::vector<Tensor> dropout_masks;
    Tensor input;
};

struct ForwardPass {
    Tensor scores;  // (N) for batched input, (1) otherwise
    std::optional<ForwardCache> cache;
};

// Sequential network holding its parameters. Inference is const and
// thread-safe; training-mode forward passes draw dropout masks from an RNG
// owned by the caller or by the network.
class Network {
public:
    using LayerParams = std::variant<std::monostate, layers::ConvParams, layers::DenseParams>;

    // He-uniform for ReLU layers, Glorot-uniform otherwise; zero biases.
    Network(NetworkSpec spec, std::uint64_t seed);
    // Parameters supplied in layer order (used by the model loader).
    Network(NetworkSpec spec, std::vector<LayerParams> params, std::uint64_t seed);

    const NetworkSpec& spec() const noexcept { return spec_; }
    std::uint64_t seed() const noexcept { return seed_; }

    layers::Mode mode() const noexcept { return mode_; }
    void set_mode(layers::Mode mode) noexcept { mode_ = mode; }
    Rng& rng() noexcept { return rng_; }

    const std::vector<LayerParams>& layer_params() const noexcept { return params_; }

    // Flat list of parameter tensors in layer order (kernels/weights, then biases).
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::size_t parameter_count() const;

    // Runs a single patch (H, W, C) or a batch (N, H, W, C). In train mode the
    // cache is populated and `rng` must be non-null.
    ForwardPass run(const Tensor& input, layers::Mode mode, Rng* rng = nullptr) const;

    // Scores for a batch or patch in inference mode.
    Tensor predict_scores(const Tensor& input) const;

    // Gradients of a loss given dLoss/dlogit of the final layer (one entry per
    // sample). Returned tensors parallel parameters().
    std::vector<Tensor> backward(const ForwardCache& cache, const Tensor& logit_grad) const;

    friend bool operator==(const Network& a, const Network& b);

private:
    void check_input(const Tensor& input) const;

    NetworkSpec spec_;
    std::vector<LayerParams> params_;
    std::uint64_t seed_;
    layers::Mode mode_ = layers::Mode::infer;
    Rng rng_;
};

Network build_disordernet(std::uint64_t seed, double dropout_rate = 0.5);

struct ForwardResult {
    double score;
    std::optional<ForwardCache> cache;  // present only in train mode
};

// Single patch of shape exactly equal to the spec input. Uses the network's
// mode; train mode draws dropout masks from net.rng().
ForwardResult forward(Network& net, const Tensor& patch);

// lesion iff score >= threshold.
Label classify(double score, double threshold = 0.5);
Label predict(const Network& net, const Tensor& patch, double threshold = 0.5);

// Binary model file: "DNET", u16 version, u8 weight dtype, layer table, then
// little-endian IEEE-754 weights in layer order. See docs/model_format.md.
enum class WeightType : std::uint8_t { f32 = 1, f64 = 2 };

void save_model(const Network& net, const std::filesystem::path& path, WeightType dtype = WeightType::f64);
Network load_model(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_model(const Network& net, WeightType dtype = WeightType::f64);
Network deserialize_model(const std::vector<std::uint8_t>& bytes);

}  // namespace dnet

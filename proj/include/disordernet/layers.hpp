#pragma once

#include <cstddef>
#include <vector>

#include "disordernet/rng.hpp"
#include "disordernet/tensor.hpp"

// Forward and backward passes for the layer types of the classifier stack.
//
// Spatial layers accept a single image (H, W, C) or a batch (N, H, W, C);
// dense layers accept a vector (n) or a batch (N, n). Every function is pure
// apart from the explicit RNG passed to dropout.
namespace dnet::layers {

enum class Mode { train, infer };

// Valid (unpadded) cross-correlation.
struct ConvParams {
    Tensor kernels;  // (kh, kw, in_channels, out_channels)
    Tensor biases;   // (out_channels)
    std::size_t stride = 1;

    std::size_t kernel_h() const { return kernels.shape()[0]; }
    std::size_t kernel_w() const { return kernels.shape()[1]; }
    std::size_t in_channels() const { return kernels.shape()[2]; }
    std::size_t out_channels() const { return kernels.shape()[3]; }
    std::size_t parameter_count() const { return kernels.size() + biases.size(); }
};

struct PoolParams {
    std::size_t window = 2;
    std::size_t stride = 2;
};

struct DenseParams {
    Tensor weights;  // (in_features, out_features)
    Tensor biases;   // (out_features)

    std::size_t in_features() const { return weights.shape()[0]; }
    std::size_t out_features() const { return weights.shape()[1]; }
    std::size_t parameter_count() const { return weights.size() + biases.size(); }
};

struct LayerGrad {
    Tensor input_grad;
    std::vector<Tensor> param_grads;  // same order as the layer's parameters
};

// (kh*kw*cin + 1) * cout
constexpr std::size_t conv_parameter_count(std::size_t kh, std::size_t kw, std::size_t cin,
                                           std::size_t cout) {
    return (kh * kw * cin + 1) * cout;
}

constexpr std::size_t dense_parameter_count(std::size_t in, std::size_t out) { return (in + 1) * out; }

ConvParams make_conv(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout,
                     std::size_t stride = 1);
DenseParams make_dense(std::size_t in, std::size_t out);

Shape conv2d_output_shape(const Shape& input, const ConvParams& p);
Tensor conv2d_forward(const Tensor& input, const ConvParams& p);
// Gradients of sum(out * out_grad); param_grads = {kernels, biases}. With
// want_input_grad = false the input gradient is left empty (first layer).
LayerGrad conv2d_backward(const Tensor& input, const ConvParams& p, const Tensor& out_grad,
                          bool want_input_grad = true);

// Per output element, the flat input index of the max. Ties go to the first
// element in row-major window scan order.
struct PoolRecord {
    Shape input_shape;
    Shape output_shape;
    std::vector<std::size_t> argmax;
};

struct PoolResult {
    Tensor output;
    PoolRecord record;
};

Shape maxpool_output_shape(const Shape& input, const PoolParams& p);
PoolResult maxpool_forward(const Tensor& input, const PoolParams& p);
Tensor maxpool_backward(const PoolRecord& record, const Tensor& out_grad);

Tensor relu(const Tensor& input);
// Passes the gradient where input > 0; the subgradient at exactly 0 is 0.
Tensor relu_backward(const Tensor& input, const Tensor& out_grad);

struct DropoutResult {
    Tensor output;
    Tensor mask;  // per-element multiplier: 0 or 1/(1-rate); all ones in infer mode
};

// Inverted dropout: survivors are scaled at train time, inference is the identity.
DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng);
Tensor dropout_backward(const Tensor& mask, const Tensor& out_grad);

Tensor dense_forward(const Tensor& input, const DenseParams& p);
// param_grads = {weights, biases}.
LayerGrad dense_backward(const Tensor& input, const DenseParams& p, const Tensor& out_grad);

double sigmoid(double x) noexcept;
Tensor sigmoid(const Tensor& input);
Tensor sigmoid_backward(const Tensor& output, const Tensor& out_grad);

}  // namespace dnet::layers

#include "disordernet/layers.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstring>

#include "disordernet/error.hpp"

namespace dnet::layers {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstRowVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

// Batch-normalized view of an image or batch of images.
struct ImageDims {
    std::size_t n, h, w, c;
};

ImageDims image_dims(const Shape& s, const char* op) {
    if (s.rank() == 3) return {1, s[0], s[1], s[2]};
    if (s.rank() == 4) return {s[0], s[1], s[2], s[3]};
    throw ShapeError(std::string(op) + ": expected (H, W, C) or (N, H, W, C) input, got " + s.str());
}

Shape image_shape(bool batched, std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    return batched ? Shape{n, h, w, c} : Shape{h, w, c};
}

void check_conv_params(const ConvParams& p) {
    if (p.kernels.shape().rank() != 4) {
        throw ShapeError("conv kernels must be (kh, kw, in, out), got " + p.kernels.shape().str());
    }
    if (p.biases.shape() != Shape{p.out_channels()}) {
        throw ShapeError("conv biases must be (" + std::to_string(p.out_channels()) + "), got " +
                         p.biases.shape().str());
    }
    if (p.stride == 0) throw ParamError("conv stride must be positive");
}

// Rows are output positions (n, i, j); columns are (a, b, c) in kernel order,
// so the kernel tensor viewed as a (kh*kw*cin, cout) matrix multiplies directly.
RowMatrix im2col(const Tensor& input, const ImageDims& d, const ConvParams& p, std::size_t oh,
                 std::size_t ow) {
    const std::size_t kh = p.kernel_h(), kw = p.kernel_w(), cin = d.c;
    RowMatrix cols(static_cast<Eigen::Index>(d.n * oh * ow), static_cast<Eigen::Index>(kh * kw * cin));
    const double* src = input.data().data();
    double* dst = cols.data();
    for (std::size_t n = 0; n < d.n; ++n) {
        const double* img = src + n * d.h * d.w * cin;
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t a = 0; a < kh; ++a) {
                    const double* row = img + ((i * p.stride + a) * d.w + j * p.stride) * cin;
                    std::memcpy(dst, row, kw * cin * sizeof(double));
                    dst += kw * cin;
                }
            }
        }
    }
    return cols;
}

void col2im_add(const RowMatrix& cols, const ImageDims& d, const ConvParams& p, std::size_t oh,
                std::size_t ow, Tensor& out) {
    const std::size_t kh = p.kernel_h(), kw = p.kernel_w(), cin = d.c;
    const double* src = cols.data();
    double* base = out.data().data();
    for (std::size_t n = 0; n < d.n; ++n) {
        double* img = base + n * d.h * d.w * cin;
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t a = 0; a < kh; ++a) {
                    double* row = img + ((i * p.stride + a) * d.w + j * p.stride) * cin;
                    for (std::size_t k = 0; k < kw * cin; ++k) row[k] += src[k];
                    src += kw * cin;
                }
            }
        }
    }
}

ConstMatrixMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MatrixMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    return MatrixMap(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

ConvParams make_conv(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout, std::size_t stride) {
    return ConvParams{Tensor(Shape{kh, kw, cin, cout}), Tensor(Shape{cout}), stride};
}

DenseParams make_dense(std::size_t in, std::size_t out) {
    return DenseParams{Tensor(Shape{in, out}), Tensor(Shape{out})};
}

Shape conv2d_output_shape(const Shape& input, const ConvParams& p) {
    check_conv_params(p);
    const auto d = image_dims(input, "conv2d");
    if (d.c != p.in_channels()) {
        throw ShapeError("conv2d: input has " + std::to_string(d.c) + " channels, kernels expect " +
                         std::to_string(p.in_channels()));
    }
    if (d.h < p.kernel_h() || d.w < p.kernel_w()) {
        throw ShapeError("conv2d: input " + input.str() + " is smaller than the " +
                         std::to_string(p.kernel_h()) + "x" + std::to_string(p.kernel_w()) + " kernel");
    }
    const std::size_t oh = (d.h - p.kernel_h()) / p.stride + 1;
    const std::size_t ow = (d.w - p.kernel_w()) / p.stride + 1;
    return image_shape(input.rank() == 4, d.n, oh, ow, p.out_channels());
}

Tensor conv2d_forward(const Tensor& input, const ConvParams& p) {
    const Shape out_shape = conv2d_output_shape(input.shape(), p);
    const auto d = image_dims(input.shape(), "conv2d");
    const auto od = image_dims(out_shape, "conv2d");
    const std::size_t patch = p.kernel_h() * p.kernel_w() * d.c;

    const RowMatrix cols = im2col(input, d, p, od.h, od.w);
    Tensor out(out_shape);
    auto out_m = as_matrix(out, d.n * od.h * od.w, od.c);
    out_m.noalias() = cols * as_matrix(p.kernels, patch, od.c);
    out_m.rowwise() += ConstRowVectorMap(p.biases.data().data(), static_cast<Eigen::Index>(od.c));
    return out;
}

LayerGrad conv2d_backward(const Tensor& input, const ConvParams& p, const Tensor& out_grad,
                          bool want_input_grad) {
    const Shape out_shape = conv2d_output_shape(input.shape(), p);
    if (out_grad.shape() != out_shape) {
        throw ShapeError("conv2d_backward: out_grad " + out_grad.shape().str() + " does not match output " +
                         out_shape.str());
    }
    const auto d = image_dims(input.shape(), "conv2d");
    const auto od = image_dims(out_shape, "conv2d");
    const std::size_t patch = p.kernel_h() * p.kernel_w() * d.c;
    const std::size_t positions = d.n * od.h * od.w;

    const RowMatrix cols = im2col(input, d, p, od.h, od.w);
    const auto g = as_matrix(out_grad, positions, od.c);

    Tensor kernel_grad(p.kernels.shape());
    as_matrix(kernel_grad, patch, od.c).noalias() = cols.transpose() * g;

    Tensor bias_grad(p.biases.shape());
    Eigen::Map<Eigen::RowVectorXd>(bias_grad.data().data(), static_cast<Eigen::Index>(od.c)) = g.colwise().sum();

    Tensor input_grad;
    if (want_input_grad) {
        const RowMatrix col_grad = g * as_matrix(p.kernels, patch, od.c).transpose();
        input_grad = Tensor(input.shape());
        col2im_add(col_grad, d, p, od.h, od.w, input_grad);
    }

    return LayerGrad{std::move(input_grad), {std::move(kernel_grad), std::move(bias_grad)}};
}

Shape maxpool_output_shape(const Shape& input, const PoolParams& p) {
    if (p.window == 0 || p.stride == 0) throw ParamError("pool window and stride must be positive");
    const auto d = image_dims(input, "maxpool");
    if (d.h < p.window || d.w < p.window) {
        throw ShapeError("maxpool: input " + input.str() + " is smaller than the pool window " +
                         std::to_string(p.window));
    }
    return image_shape(input.rank() == 4, d.n, (d.h - p.window) / p.stride + 1,
                       (d.w - p.window) / p.stride + 1, d.c);
}

PoolResult maxpool_forward(const Tensor& input, const PoolParams& p) {
    const Shape out_shape = maxpool_output_shape(input.shape(), p);
    const auto d = image_dims(input.shape(), "maxpool");
    const auto od = image_dims(out_shape, "maxpool");

    PoolResult result{Tensor(out_shape), PoolRecord{input.shape(), out_shape, {}}};
    result.record.argmax.resize(out_shape.elements());
    const auto in = input.data();
    auto out = result.output.data();

    std::size_t o = 0;
    for (std::size_t n = 0; n < d.n; ++n) {
        const std::size_t base = n * d.h * d.w * d.c;
        for (std::size_t i = 0; i < od.h; ++i) {
            for (std::size_t j = 0; j < od.w; ++j) {
                for (std::size_t c = 0; c < d.c; ++c, ++o) {
                    std::size_t best = base + ((i * p.stride) * d.w + j * p.stride) * d.c + c;
                    for (std::size_t a = 0; a < p.window; ++a) {
                        for (std::size_t b = 0; b < p.window; ++b) {
                            const std::size_t idx = base + ((i * p.stride + a) * d.w + j * p.stride + b) * d.c + c;
                            if (in[idx] > in[best]) best = idx;
                        }
                    }
                    out[o] = in[best];
                    result.record.argmax[o] = best;
                }
            }
        }
    }
    return result;
}

Tensor maxpool_backward(const PoolRecord& record, const Tensor& out_grad) {
    if (out_grad.shape() != record.output_shape) {
        throw ShapeError("maxpool_backward: out_grad " + out_grad.shape().str() + " does not match output " +
                         record.output_shape.str());
    }
    Tensor input_grad(record.input_shape);
    for (std::size_t o = 0; o < out_grad.size(); ++o) input_grad[record.argmax[o]] += out_grad[o];
    return input_grad;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > 0.0 ? input[i] : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& out_grad) {
    if (input.shape() != out_grad.shape()) {
        throw ShapeError("relu_backward: shape mismatch " + input.shape().str() + " vs " + out_grad.shape().str());
    }
    Tensor grad(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) grad[i] = input[i] > 0.0 ? out_grad[i] : 0.0;
    return grad;
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ParamError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    }
    if (mode == Mode::infer || rate == 0.0) {
        return {input, Tensor(input.shape(), 1.0)};
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    DropoutResult r{Tensor(input.shape()), Tensor(input.shape())};
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double m = rng.uniform() < rate ? 0.0 : keep_scale;
        r.mask[i] = m;
        r.output[i] = input[i] * m;
    }
    return r;
}

Tensor dropout_backward(const Tensor& mask, const Tensor& out_grad) { return mul(mask, out_grad); }

Tensor dense_forward(const Tensor& input, const DenseParams& p) {
    const Shape& s = input.shape();
    const bool batched = s.rank() == 2;
    if (!(s.rank() == 1 || batched)) throw ShapeError("dense: expected (n) or (N, n) input, got " + s.str());
    const std::size_t rows = batched ? s[0] : 1;
    const std::size_t n = batched ? s[1] : s[0];
    if (n != p.in_features()) {
        throw ShapeError("dense: input length " + std::to_string(n) + " does not match in_features " +
                         std::to_string(p.in_features()));
    }
    if (p.biases.shape() != Shape{p.out_features()}) {
        throw ShapeError("dense biases must be (" + std::to_string(p.out_features()) + ")");
    }
    const std::size_t m = p.out_features();
    Tensor out(batched ? Shape{rows, m} : Shape{m});
    auto out_m = as_matrix(out, rows, m);
    out_m.noalias() = as_matrix(input, rows, n) * as_matrix(p.weights, n, m);
    out_m.rowwise() += ConstRowVectorMap(p.biases.data().data(), static_cast<Eigen::Index>(m));
    return out;
}

LayerGrad dense_backward(const Tensor& input, const DenseParams& p, const Tensor& out_grad) {
    const Shape& s = input.shape();
    const bool batched = s.rank() == 2;
    if (!(s.rank() == 1 || batched)) throw ShapeError("dense: expected (n) or (N, n) input, got " + s.str());
    const std::size_t rows = batched ? s[0] : 1;
    const std::size_t n = batched ? s[1] : s[0];
    const std::size_t m = p.out_features();
    if (n != p.in_features()) throw ShapeError("dense_backward: input length does not match in_features");
    const Shape expected = batched ? Shape{rows, m} : Shape{m};
    if (out_grad.shape() != expected) {
        throw ShapeError("dense_backward: out_grad " + out_grad.shape().str() + " does not match output " +
                         expected.str());
    }
    const auto x = as_matrix(input, rows, n);
    const auto g = as_matrix(out_grad, rows, m);

    Tensor weight_grad(p.weights.shape());
    as_matrix(weight_grad, n, m).noalias() = x.transpose() * g;
    Tensor bias_grad(p.biases.shape());
    Eigen::Map<Eigen::RowVectorXd>(bias_grad.data().data(), static_cast<Eigen::Index>(m)) = g.colwise().sum();
    Tensor input_grad(s);
    as_matrix(input_grad, rows, n).noalias() = g * as_matrix(p.weights, n, m).transpose();
    return LayerGrad{std::move(input_grad), {std::move(weight_grad), std::move(bias_grad)}};
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& input) {
    Tensor out(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) out[i] = sigmoid(input[i]);
    return out;
}

Tensor sigmoid_backward(const Tensor& output, const Tensor& out_grad) {
    return map2(output, out_grad, [](double y, double g) { return g * y * (1.0 - y); });
}

}  // namespace dnet::layers

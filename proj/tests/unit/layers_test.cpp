#include <gtest/gtest.h>

#include <cmath>

#include "disordernet/error.hpp"
#include "disordernet/layers.hpp"
#include "oracles.hpp"

using namespace dnet;
using namespace dnet::layers;
using dnet::testing::dot;
using dnet::testing::max_fd_error;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(s));
    for (auto& v : t.data()) v = rng.uniform(lo, hi);
    return t;
}

ConvParams random_conv(std::size_t k, std::size_t cin, std::size_t cout, Rng& rng) {
    auto p = make_conv(k, k, cin, cout);
    for (auto& v : p.kernels.data()) v = rng.uniform(-1, 1);
    for (auto& v : p.biases.data()) v = rng.uniform(-1, 1);
    return p;
}

}  // namespace

TEST(ConvTest, FirstLayerShapeAndCount) {
    auto p = make_conv(3, 3, 3, 32);
    EXPECT_EQ(p.parameter_count(), 896u);
    EXPECT_EQ(conv2d_forward(Tensor(Shape{50, 50, 3}), p).shape(), (Shape{48, 48, 32}));
}

TEST(ConvTest, ParameterCountFormula) {
    EXPECT_EQ(conv_parameter_count(3, 3, 3, 32), 896u);
    EXPECT_EQ(conv_parameter_count(3, 3, 32, 64), 18496u);
    EXPECT_EQ(conv_parameter_count(3, 3, 64, 128), 73856u);
    EXPECT_EQ(conv_parameter_count(3, 3, 128, 128), 147584u);
    EXPECT_EQ(dense_parameter_count(128, 512), 66048u);
    EXPECT_EQ(dense_parameter_count(512, 1), 513u);
}

TEST(ConvTest, AllOnesWindowSums) {
    auto p = make_conv(2, 2, 1, 1);
    for (auto& v : p.kernels.data()) v = 1.0;
    Tensor out = conv2d_forward(Tensor(Shape{3, 3, 1}, 1.0), p);
    EXPECT_EQ(out.shape(), (Shape{2, 2, 1}));
    for (double v : out.data()) EXPECT_EQ(v, 4.0);
}

TEST(ConvTest, MatchesNaiveOracle) {
    Rng rng(42);
    Tensor in = random_tensor(Shape{5, 5, 2}, rng);
    auto p = random_conv(3, 2, 3, rng);
    const Tensor fast = conv2d_forward(in, p);
    const Tensor slow = dnet::testing::naive_conv2d(in, p);
    ASSERT_EQ(fast.shape(), slow.shape());
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-12);
}

TEST(ConvTest, BatchedEqualsPerImage) {
    Rng rng(3);
    Tensor batch = random_tensor(Shape{3, 7, 6, 2}, rng);
    auto p = random_conv(3, 2, 4, rng);
    const Tensor out = conv2d_forward(batch, p);
    const std::size_t per_in = 7 * 6 * 2, per_out = 5 * 4 * 4;
    for (std::size_t n = 0; n < 3; ++n) {
        Tensor single(Shape{7, 6, 2});
        for (std::size_t i = 0; i < per_in; ++i) single[i] = batch[n * per_in + i];
        const Tensor ref = dnet::testing::naive_conv2d(single, p);
        for (std::size_t i = 0; i < per_out; ++i) EXPECT_NEAR(out[n * per_out + i], ref[i], 1e-12);
    }
}

TEST(ConvTest, ShapeErrors) {
    auto p = make_conv(3, 3, 3, 4);
    EXPECT_THROW(conv2d_forward(Tensor(Shape{5, 5, 2}), p), ShapeError);
    EXPECT_THROW(conv2d_forward(Tensor(Shape{2, 5, 3}), p), ShapeError);
    EXPECT_THROW(conv2d_backward(Tensor(Shape{5, 5, 3}), p, Tensor(Shape{2, 2, 4})), ShapeError);
}

TEST(ConvTest, BackwardZeroGradient) {
    Rng rng(1);
    Tensor in = random_tensor(Shape{5, 5, 2}, rng);
    auto p = random_conv(3, 2, 3, rng);
    auto g = conv2d_backward(in, p, Tensor(Shape{3, 3, 3}));
    for (double v : g.input_grad.data()) EXPECT_EQ(v, 0.0);
    for (const auto& t : g.param_grads)
        for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(ConvTest, OneByOneKernelGradIsScalarProduct) {
    Rng rng(8);
    Tensor in = random_tensor(Shape{4, 4, 1}, rng);
    auto p = random_conv(1, 1, 1, rng);
    Tensor og = random_tensor(Shape{4, 4, 1}, rng);
    auto g = conv2d_backward(in, p, og);
    EXPECT_NEAR(g.param_grads[0][0], dot(in, og), 1e-12);
}

TEST(ConvTest, FiniteDifferenceGradients) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(100 + seed);
        Tensor in = random_tensor(Shape{6, 5, 2}, rng);
        auto p = random_conv(3, 2, 3, rng);
        const Tensor weight = random_tensor(Shape{4, 3, 3}, rng);
        auto loss = [&] { return dot(conv2d_forward(in, p), weight); };
        auto g = conv2d_backward(in, p, weight);
        EXPECT_LT(max_fd_error(in, g.input_grad, loss), 1e-4) << "seed " << seed;
        EXPECT_LT(max_fd_error(p.kernels, g.param_grads[0], loss), 1e-4) << "seed " << seed;
        EXPECT_LT(max_fd_error(p.biases, g.param_grads[1], loss), 1e-4) << "seed " << seed;
    }
}

TEST(MaxPoolTest, ReferenceShapeWithFloor) {
    auto r = maxpool_forward(Tensor(Shape{9, 9, 128}), PoolParams{});
    EXPECT_EQ(r.output.shape(), (Shape{4, 4, 128}));
}

TEST(MaxPoolTest, HandEnumeratedWindows) {
    Tensor in(Shape{4, 4, 1});
    for (std::size_t i = 0; i < 16; ++i) in[i] = static_cast<double>(i + 1);
    auto r = maxpool_forward(in, PoolParams{});
    EXPECT_EQ(r.output.values(), (std::vector<double>{6, 8, 14, 16}));
}

TEST(MaxPoolTest, ConstantInput) {
    auto r = maxpool_forward(Tensor(Shape{6, 6, 2}, 3.5), PoolParams{});
    for (double v : r.output.data()) EXPECT_EQ(v, 3.5);
}

TEST(MaxPoolTest, TiesGoToFirstInScanOrder) {
    auto r = maxpool_forward(Tensor(Shape{2, 2, 1}, 1.0), PoolParams{});
    Tensor g = maxpool_backward(r.record, Tensor(Shape{1, 1, 1}, 1.0));
    EXPECT_EQ(g.values(), (std::vector<double>{1, 0, 0, 0}));
}

TEST(MaxPoolTest, SmallerThanWindow) {
    EXPECT_THROW(maxpool_forward(Tensor(Shape{1, 4, 1}), PoolParams{}), ShapeError);
}

TEST(MaxPoolTest, BackwardRouting) {
    Tensor in(Shape{4, 4, 1});
    for (std::size_t i = 0; i < 16; ++i) in[i] = static_cast<double>(i + 1);
    auto r = maxpool_forward(in, PoolParams{});

    Tensor zero = maxpool_backward(r.record, Tensor(Shape{2, 2, 1}));
    for (double v : zero.data()) EXPECT_EQ(v, 0.0);

    Tensor g = maxpool_backward(r.record, Tensor(Shape{2, 2, 1}, 1.0));
    // Bottom-right of each 2x2 window: flat indices 5, 7, 13, 15.
    std::vector<double> expected(16, 0.0);
    for (auto idx : {5, 7, 13, 15}) expected[idx] = 1.0;
    EXPECT_EQ(g.values(), expected);

    EXPECT_THROW(maxpool_backward(r.record, Tensor(Shape{2, 2, 2})), ShapeError);
}

TEST(MaxPoolTest, FiniteDifferenceAwayFromTies) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(200 + seed);
        // Distinct values spaced far beyond the FD step.
        Tensor in(Shape{5, 6, 2});
        std::vector<double> values(in.size());
        for (std::size_t i = 0; i < values.size(); ++i) values[i] = 0.01 * static_cast<double>(i);
        rng.shuffle(values.begin(), values.end());
        for (std::size_t i = 0; i < values.size(); ++i) in[i] = values[i];

        auto r = maxpool_forward(in, PoolParams{});
        const Tensor weight = random_tensor(r.output.shape(), rng);
        auto loss = [&] { return dot(maxpool_forward(in, PoolParams{}).output, weight); };
        Tensor g = maxpool_backward(r.record, weight);
        EXPECT_LT(max_fd_error(in, g, loss), 1e-4) << "seed " << seed;
    }
}

TEST(ReluTest, Forward) {
    Tensor in(Shape{3}, std::vector<double>{-1, 0, 2});
    EXPECT_EQ(relu(in).values(), (std::vector<double>{0, 0, 2}));
    Tensor pos(Shape{3}, std::vector<double>{0.5, 1, 2});
    EXPECT_EQ(relu(pos), pos);
}

TEST(ReluTest, SubgradientAtZeroIsZero) {
    Tensor in(Shape{3}, std::vector<double>{-1, 0, 2});
    Tensor g = relu_backward(in, Tensor(Shape{3}, 1.0));
    EXPECT_EQ(g.values(), (std::vector<double>{0, 0, 1}));
}

TEST(ReluTest, FiniteDifference) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(300 + seed);
        Tensor in(Shape{20});
        for (auto& v : in.data()) {
            const double mag = rng.uniform(0.01, 1.0);
            v = rng.uniform() < 0.5 ? -mag : mag;
        }
        const Tensor weight = random_tensor(Shape{20}, rng);
        auto loss = [&] { return dot(relu(in), weight); };
        EXPECT_LT(max_fd_error(in, relu_backward(in, weight), loss), 1e-4);
    }
}

TEST(DropoutTest, RateZeroIsIdentity) {
    Rng rng(1);
    Tensor in = random_tensor(Shape{100}, rng);
    EXPECT_EQ(dropout(in, 0.0, Mode::train, rng).output, in);
    EXPECT_EQ(dropout(in, 0.0, Mode::infer, rng).output, in);
}

TEST(DropoutTest, InferIsIdentityForAllRates) {
    Rng rng(2);
    Tensor in = random_tensor(Shape{100}, rng);
    for (double rate : {0.0, 0.1, 0.5, 0.9, 0.999}) {
        EXPECT_EQ(dropout(in, rate, Mode::infer, rng).output, in);
    }
}

TEST(DropoutTest, InvalidRate) {
    Rng rng(3);
    Tensor in(Shape{4});
    EXPECT_THROW(dropout(in, 1.0, Mode::train, rng), ParamError);
    EXPECT_THROW(dropout(in, -0.1, Mode::infer, rng), ParamError);
}

TEST(DropoutTest, TrainStatistics) {
    Rng rng(12345);
    Tensor in(Shape{100000}, 1.0);
    auto r = dropout(in, 0.5, Mode::train, rng);
    std::size_t zeros = 0;
    double sum = 0.0;
    for (double v : r.output.data()) {
        zeros += v == 0.0;
        sum += v;
    }
    EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.5, 0.01);
    EXPECT_NEAR(sum / 1e5, 1.0, 0.02);
}

TEST(DropoutTest, BackwardUsesMask) {
    Rng rng(4);
    Tensor in = random_tensor(Shape{50}, rng);
    auto r = dropout(in, 0.3, Mode::train, rng);
    Tensor g = dropout_backward(r.mask, Tensor(Shape{50}, 1.0));
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(g[i], r.mask[i]);
}

TEST(DenseTest, ReferenceCounts) {
    EXPECT_EQ(make_dense(128, 512).parameter_count(), 66048u);
    EXPECT_EQ(make_dense(512, 1).parameter_count(), 513u);
}

TEST(DenseTest, IdentityWeights) {
    auto p = make_dense(4, 4);
    for (std::size_t i = 0; i < 4; ++i) p.weights[i * 4 + i] = 1.0;
    Tensor in(Shape{4}, std::vector<double>{1, -2, 3, 0.5});
    EXPECT_EQ(dense_forward(in, p), in);
}

TEST(DenseTest, LengthMismatch) {
    EXPECT_THROW(dense_forward(Tensor(Shape{3}), make_dense(4, 2)), ShapeError);
}

TEST(DenseTest, FiniteDifference) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(400 + seed);
        Tensor in = random_tensor(Shape{3, 7}, rng);
        auto p = make_dense(7, 5);
        for (auto& v : p.weights.data()) v = rng.uniform(-1, 1);
        for (auto& v : p.biases.data()) v = rng.uniform(-1, 1);
        const Tensor weight = random_tensor(Shape{3, 5}, rng);
        auto loss = [&] { return dot(dense_forward(in, p), weight); };
        auto g = dense_backward(in, p, weight);
        EXPECT_LT(max_fd_error(in, g.input_grad, loss), 1e-4);
        EXPECT_LT(max_fd_error(p.weights, g.param_grads[0], loss), 1e-4);
        EXPECT_LT(max_fd_error(p.biases, g.param_grads[1], loss), 1e-4);
    }
}

TEST(SigmoidTest, KnownValues) {
    EXPECT_EQ(sigmoid(0.0), 0.5);
    // exp(-2) from its Taylor series, independent of std::exp.
    double term = 1.0, series = 1.0;
    for (int n = 1; n < 40; ++n) {
        term *= -2.0 / n;
        series += term;
    }
    EXPECT_NEAR(sigmoid(2.0), 1.0 / (1.0 + series), 1e-14);
    EXPECT_NEAR(sigmoid(2.0), 0.880797, 1e-6);
}

TEST(SigmoidTest, Symmetry) {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-50, 50);
        EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15);
    }
}

TEST(SigmoidTest, StableAtExtremes) {
    for (double x : {-500.0, -100.0, 100.0, 500.0}) {
        const double s = sigmoid(x);
        EXPECT_TRUE(std::isfinite(s));
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 1.0);
    }
    EXPECT_GT(sigmoid(-500.0), 0.0);
}

TEST(SigmoidTest, FiniteDifference) {
    Rng rng(10);
    Tensor in = random_tensor(Shape{30}, rng, -4, 4);
    const Tensor weight = random_tensor(Shape{30}, rng);
    auto loss = [&] { return dot(sigmoid(in), weight); };
    EXPECT_LT(max_fd_error(in, sigmoid_backward(sigmoid(in), weight), loss), 1e-4);
}

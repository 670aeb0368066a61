#include <gtest/gtest.h>

#include "disordernet/error.hpp"
#include "disordernet/rng.hpp"
#include "disordernet/tensor.hpp"

using namespace dnet;

TEST(TensorTest, FillConstructor) {
    Tensor zeros(Shape{2, 2});
    ASSERT_EQ(zeros.size(), 4u);
    for (double v : zeros.data()) EXPECT_EQ(v, 0.0);

    Tensor ones(Shape{50, 50, 3}, 1.0);
    ASSERT_EQ(ones.size(), 7500u);
    for (double v : ones.data()) EXPECT_EQ(v, 1.0);
}

TEST(TensorTest, ZeroDimensionRejected) {
    EXPECT_THROW(Shape({3, 0}), ShapeError);
    EXPECT_THROW(Shape(std::vector<std::size_t>{}), ShapeError);
    EXPECT_THROW(Shape({1, 2, 3, 4, 5}), ShapeError);
}

TEST(TensorTest, DataLengthMustMatchShape) {
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(TensorTest, ReshapeFlatten) {
    Tensor t(Shape{1, 1, 128});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
    Tensor flat = reshape(t, Shape{128});
    EXPECT_EQ(flat.shape(), Shape{128});
    EXPECT_EQ(flat.values(), t.values());
}

TEST(TensorTest, ReshapeRoundTrip) {
    Tensor t(Shape{4}, std::vector<double>{1, 2, 3, 4});
    Tensor back = reshape(reshape(t, Shape{2, 2}), Shape{4});
    EXPECT_EQ(back, t);
}

TEST(TensorTest, ReshapeCountMismatch) {
    Tensor t(Shape{2, 3});
    EXPECT_THROW(reshape(t, Shape{4, 2}), ShapeError);
}

TEST(TensorTest, Map2Arithmetic) {
    Tensor a(Shape{2}, std::vector<double>{1, 2});
    Tensor b(Shape{2}, std::vector<double>{3, 4});
    EXPECT_EQ(add(a, b).values(), (std::vector<double>{4, 6}));
    EXPECT_EQ(add(a, Tensor(Shape{2})), a);

    Tensor c(Shape{2}, std::vector<double>{2, 3});
    Tensor d(Shape{2}, std::vector<double>{4, 5});
    EXPECT_EQ(mul(c, d).values(), (std::vector<double>{8, 15}));
}

TEST(TensorTest, Map2ShapeMismatch) {
    EXPECT_THROW(add(Tensor(Shape{2}), Tensor(Shape{3})), ShapeError);
    EXPECT_THROW(add(Tensor(Shape{2, 2}), Tensor(Shape{4})), ShapeError);
}

TEST(TensorTest, RowMajorIndexMatchesNestedLoop) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t H = 1 + rng.below(7), W = 1 + rng.below(7), C = 1 + rng.below(5);
        Tensor t(Shape{H, W, C});
        std::size_t counter = 0;
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
                for (std::size_t k = 0; k < C; ++k) t.at(i, j, k) = static_cast<double>(counter++);
        for (std::size_t i = 0; i < H; ++i)
            for (std::size_t j = 0; j < W; ++j)
                for (std::size_t k = 0; k < C; ++k)
                    EXPECT_EQ(t[(i * W + j) * C + k], t.at(i, j, k));
        for (std::size_t f = 0; f < t.size(); ++f) EXPECT_EQ(t[f], static_cast<double>(f));
    }
}

TEST(TensorTest, AdditionCommutativeAssociative) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor a(Shape{16}), b(Shape{16}), c(Shape{16});
        for (std::size_t i = 0; i < 16; ++i) {
            a[i] = rng.uniform(-10, 10);
            b[i] = rng.uniform(-10, 10);
            c[i] = rng.uniform(-10, 10);
        }
        EXPECT_EQ(add(a, b), add(b, a));
        const Tensor left = add(add(a, b), c);
        const Tensor right = add(a, add(b, c));
        for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(left[i], right[i], 1e-12);
    }
}

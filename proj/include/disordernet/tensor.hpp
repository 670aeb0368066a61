#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace dnet {

// Ordered list of 1 to 4 positive extents. Image tensors are (height, width,
// channels); batched tensors are (batch, height, width, channels).
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims);
    explicit Shape(std::vector<std::size_t> dims);

    std::size_t rank() const noexcept { return dims_.size(); }
    std::size_t operator[](std::size_t axis) const { return dims_.at(axis); }
    std::size_t elements() const noexcept;
    const std::vector<std::size_t>& dims() const noexcept { return dims_; }

    std::string str() const;

    friend bool operator==(const Shape&, const Shape&) = default;

private:
    void validate() const;

    std::vector<std::size_t> dims_;
};

namespace detail {

// Cache-line aligned storage: Eigen kernels pick their summation order from
// the data alignment, so a fixed alignment keeps results reproducible.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t kAlign = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kAlign}));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kAlign}); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

}  // namespace detail

// Dense row-major tensor of doubles. Shapes are strict: no broadcasting.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t size() const noexcept { return data_.size(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double> values() const { return {data_.begin(), data_.end()}; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Index of (i, j, k) in an (H, W, C) tensor.
    double& at(std::size_t i, std::size_t j, std::size_t k) { return data_[offset3(i, j, k)]; }
    double at(std::size_t i, std::size_t j, std::size_t k) const { return data_[offset3(i, j, k)]; }

    Tensor reshaped(Shape new_shape) const&;
    Tensor reshaped(Shape new_shape) &&;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t offset3(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * shape_[1] + j) * shape_[2] + k;
    }

    Shape shape_;
    std::vector<double, detail::AlignedAllocator<double>> data_;
};

Tensor reshape(const Tensor& t, Shape new_shape);

// Elementwise f(a[i], b[i]); shapes must match exactly.
Tensor map2(const Tensor& a, const Tensor& b, const std::function<double(double, double)>& f);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

// a += b, shapes must match.
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace dnet

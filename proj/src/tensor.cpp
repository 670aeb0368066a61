#include "disordernet/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "disordernet/error.hpp"

namespace dnet {

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

void Shape::validate() const {
    if (dims_.empty() || dims_.size() > 4) {
        throw ShapeError("shape must have 1 to 4 dimensions, got " + std::to_string(dims_.size()));
    }
    std::size_t count = 1;
    for (auto d : dims_) {
        if (d == 0) {
            throw ShapeError("shape " + str() + " has a zero dimension");
        }
        if (count > std::numeric_limits<std::size_t>::max() / d) {
            throw ShapeError("shape " + str() + " overflows the addressable element count");
        }
        count *= d;
    }
}

std::size_t Shape::elements() const noexcept {
    if (dims_.empty()) return 0;
    std::size_t count = 1;
    for (auto d : dims_) count *= d;
    return count;
}

std::string Shape::str() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (i) os << ", ";
        os << dims_[i];
    }
    os << ')';
    return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    if (shape_.rank() == 0) throw ShapeError("tensor requires a non-empty shape");
    data_.assign(shape_.elements(), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    if (shape_.rank() == 0) throw ShapeError("tensor requires a non-empty shape");
    if (data_.size() != shape_.elements()) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_.str());
    }
}

Tensor Tensor::reshaped(Shape new_shape) const& {
    Tensor copy = *this;
    return std::move(copy).reshaped(std::move(new_shape));
}

Tensor Tensor::reshaped(Shape new_shape) && {
    if (new_shape.elements() != shape_.elements()) {
        throw ShapeError("cannot reshape " + shape_.str() + " to " + new_shape.str());
    }
    shape_ = std::move(new_shape);
    return std::move(*this);
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor reshape(const Tensor& t, Shape new_shape) { return t.reshaped(std::move(new_shape)); }

Tensor map2(const Tensor& a, const Tensor& b, const std::function<double(double, double)>& f) {
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    return map2(a, b, [](double x, double y) { return x + y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return map2(a, b, [](double x, double y) { return x * y; });
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("elementwise shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
    }
    auto dst = a.data();
    auto src = b.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace dnet

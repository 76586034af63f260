#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "diffimpute/core/error.hpp"
#include "diffimpute/core/rng.hpp"

namespace diffimpute {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

/// Dense row-major array. Value semantics; copying copies the data.
template <class Real = double>
class Tensor {
public:
    using value_type = Real;

    Tensor() = default;

    explicit Tensor(Shape shape, Real fill = Real(0)) : shape_(std::move(shape)) {
        validate_shape(shape_);
        data_.assign(shape_size(shape_), fill);
    }

    Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape(shape_);
        if (shape_size(shape_) != data_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, Real v) { return Tensor(std::move(shape), v); }
    static Tensor scalar(Real v) { return Tensor(Shape{1}, v); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<Real> data() { return data_; }
    std::span<const Real> data() const { return data_; }
    std::vector<Real>& storage() { return data_; }
    const std::vector<Real>& storage() const { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    Real& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    Real at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    Real& at(std::size_t i, std::size_t j, std::size_t l) {
        return data_[(i * shape_[1] + j) * shape_[2] + l];
    }
    Real at(std::size_t i, std::size_t j, std::size_t l) const {
        return data_[(i * shape_[1] + j) * shape_[2] + l];
    }

    /// Same data, new shape of equal element count.
    Tensor reshaped(Shape shape) const& {
        Tensor out = *this;
        out.reshape(std::move(shape));
        return out;
    }
    Tensor reshaped(Shape shape) && {
        reshape(std::move(shape));
        return std::move(*this);
    }
    void reshape(Shape shape) {
        validate_shape(shape);
        if (shape_size(shape) != data_.size())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        shape_ = std::move(shape);
    }

    void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

    bool all_finite() const {
        return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
    }

    /// Throws NumericError naming `what` when any entry is NaN or infinite.
    const Tensor& check_finite(const char* what) const {
        if (!all_finite()) throw NumericError(std::string("non-finite value in ") + what);
        return *this;
    }

    template <class Other>
    Tensor<Other> cast() const {
        std::vector<Other> out(data_.begin(), data_.end());
        return Tensor<Other>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static void validate_shape(const Shape& shape) {
        if (shape.empty()) throw ShapeError("tensor shape must be nonempty");
        for (auto d : shape)
            if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    }

    Shape shape_;
    std::vector<Real> data_;
};

template <class Real>
void require_same_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* what) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

/// I.i.d. standard normal entries drawn from `rng` in row-major order.
template <class Real = double>
Tensor<Real> sample_gaussian(Rng& rng, Shape shape) {
    Tensor<Real> out(std::move(shape));
    for (auto& v : out.storage()) v = static_cast<Real>(rng.normal());
    return out;
}

} // namespace diffimpute

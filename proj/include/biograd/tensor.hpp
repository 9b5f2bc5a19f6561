#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "biograd/error.hpp"

namespace biograd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    out += "]";
    return out;
}

// Dense row-major n-dimensional array. Scalar type is double unless a caller
// explicitly instantiates the float32 variant.
template <typename T = double>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(Shape shape)
        : shape_(std::move(shape)), data_(shape_numel(shape_), T{}) {}

    TensorT(Shape shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_numel(shape_))
            throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_str(shape_));
    }

    static TensorT full(Shape shape, T value) {
        TensorT t(std::move(shape));
        for (T& v : t.data_) v = value;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    bool empty() const { return data_.empty(); }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    template <typename... Ix>
    T& operator()(Ix... ix) { return data_[index(ix...)]; }

    template <typename... Ix>
    const T& operator()(Ix... ix) const { return data_[index(ix...)]; }

    void fill(T value) {
        for (T& v : data_) v = value;
    }

    bool all_finite() const {
        for (T v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    // Same data, new extents; element count must be preserved.
    TensorT reshaped(Shape shape) const {
        if (shape_numel(shape) != data_.size())
            throw DimensionError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        return TensorT(std::move(shape), data_);
    }

    TensorT flattened() const { return reshaped({data_.size()}); }

private:
    template <typename... Ix>
    std::size_t index(Ix... ix) const {
        assert(sizeof...(Ix) == shape_.size());
        std::size_t idx = 0;
        std::size_t d = 0;
        ((idx = idx * shape_[d++] + static_cast<std::size_t>(ix)), ...);
        return idx;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<double>;
using Tensor32 = TensorT<float>;

} // namespace biograd

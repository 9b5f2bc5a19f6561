#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "biograd/error.hpp"
#include "biograd/tensor.hpp"

namespace biograd {

enum class Activation { Relu, Tanh, Identity, Triangle };

inline std::string to_string(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Identity: return "identity";
        case Activation::Triangle: return "triangle";
    }
    return "?";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    if (s == "triangle") return Activation::Triangle;
    throw ConfigError("unknown activation kind '" + s + "'");
}

namespace detail {

// Triangle groups units and centers them at the group mean: channels at each
// spatial site for rank-3 tensors, the whole tensor otherwise.
template <typename T>
TensorT<T> triangle_apply(const TensorT<T>& a) {
    TensorT<T> out(a.shape());
    if (a.rank() == 3) {
        const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                T mean = T(0);
                for (std::size_t f = 0; f < c; ++f) mean += a(f, y, x);
                mean /= T(c);
                for (std::size_t f = 0; f < c; ++f)
                    out(f, y, x) = std::max(T(0), a(f, y, x) - mean);
            }
        }
        return out;
    }
    T mean = T(0);
    for (T v : a.data()) mean += v;
    mean /= T(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = std::max(T(0), a[i] - mean);
    return out;
}

// Subgradient with the group mean treated as a constant.
template <typename T>
TensorT<T> triangle_deriv(const TensorT<T>& a) {
    TensorT<T> t = triangle_apply(a);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = t[i] > T(0) ? T(1) : T(0);
    return t;
}

} // namespace detail

template <typename T>
TensorT<T> activation_apply(Activation kind, const TensorT<T>& a) {
    switch (kind) {
        case Activation::Relu: {
            TensorT<T> out(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i)
                out[i] = a[i] > T(0) ? a[i] : T(0);
            return out;
        }
        case Activation::Tanh: {
            TensorT<T> out(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i)
                out[i] = std::tanh(a[i]);
            return out;
        }
        case Activation::Identity:
            return a;
        case Activation::Triangle:
            return detail::triangle_apply(a);
    }
    throw ConfigError("unknown activation kind");
}

template <typename T>
TensorT<T> activation_deriv(Activation kind, const TensorT<T>& a) {
    switch (kind) {
        case Activation::Relu: {
            // Derivative at exactly 0 is 0.
            TensorT<T> out(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i)
                out[i] = a[i] > T(0) ? T(1) : T(0);
            return out;
        }
        case Activation::Tanh: {
            TensorT<T> out(a.shape());
            for (std::size_t i = 0; i < a.size(); ++i) {
                const T t = std::tanh(a[i]);
                out[i] = T(1) - t * t;
            }
            return out;
        }
        case Activation::Identity:
            return TensorT<T>::full(a.shape(), T(1));
        case Activation::Triangle:
            return detail::triangle_deriv(a);
    }
    throw ConfigError("unknown activation kind");
}

// ---------------------------------------------------------------------------
// Dense primitives
// ---------------------------------------------------------------------------

// out[j] = sum_k weights[j,k] * input[k] + bias[j]
template <typename T>
TensorT<T> affine(const TensorT<T>& weights, const TensorT<T>& input, const TensorT<T>& bias) {
    if (weights.rank() != 2 || input.rank() != 1 || bias.rank() != 1 ||
        weights.dim(1) != input.dim(0) || weights.dim(0) != bias.dim(0))
        throw DimensionError("affine: weights " + shape_str(weights.shape()) +
                             " incompatible with input " + shape_str(input.shape()) +
                             " and bias " + shape_str(bias.shape()));
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    TensorT<T> out({m});
    for (std::size_t j = 0; j < m; ++j) {
        T acc = bias[j];
        const T* wrow = weights.data().data() + j * n;
        for (std::size_t k = 0; k < n; ++k) acc += wrow[k] * input[k];
        out[j] = acc;
    }
    return out;
}

// m (p x q) times v (q). Inner loop runs over the summed index in ascending
// order; matvec_transpose below mirrors it so that substituting m for the
// transpose of another matrix reproduces identical arithmetic.
template <typename T>
TensorT<T> matvec(const TensorT<T>& m, const TensorT<T>& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0))
        throw DimensionError("matvec: matrix " + shape_str(m.shape()) +
                             " incompatible with vector " + shape_str(v.shape()));
    const std::size_t p = m.dim(0), q = m.dim(1);
    TensorT<T> out({p});
    for (std::size_t i = 0; i < p; ++i) {
        T acc = T(0);
        const T* row = m.data().data() + i * q;
        for (std::size_t j = 0; j < q; ++j) acc += row[j] * v[j];
        out[i] = acc;
    }
    return out;
}

// m^T (q x p) times v (p): out[k] = sum_j m[j,k] * v[j]
template <typename T>
TensorT<T> matvec_transpose(const TensorT<T>& m, const TensorT<T>& v) {
    if (m.rank() != 2 || v.rank() != 1 || m.dim(0) != v.dim(0))
        throw DimensionError("matvec_transpose: matrix " + shape_str(m.shape()) +
                             " incompatible with vector " + shape_str(v.shape()));
    const std::size_t p = m.dim(0), q = m.dim(1);
    TensorT<T> out({q});
    for (std::size_t k = 0; k < q; ++k) {
        T acc = T(0);
        for (std::size_t j = 0; j < p; ++j) acc += m[j * q + k] * v[j];
        out[k] = acc;
    }
    return out;
}

// u v^T, shape |u| x |v|
template <typename T>
TensorT<T> outer(const TensorT<T>& u, const TensorT<T>& v) {
    TensorT<T> out({u.size(), v.size()});
    for (std::size_t i = 0; i < u.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            out[i * v.size() + j] = u[i] * v[j];
    return out;
}

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation convention, zero padding)
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2dCache {
    TensorT<T> input;   // C x H x W
    TensorT<T> kernels; // F x C x k x k
    std::size_t stride = 1;
    std::size_t padding = 0;
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride,
                                   std::size_t padding) {
    return (in + 2 * padding - k) / stride + 1;
}

template <typename T>
std::pair<TensorT<T>, Conv2dCache<T>> conv2d_forward(const TensorT<T>& input,
                                                     const TensorT<T>& kernels,
                                                     const TensorT<T>& bias,
                                                     std::size_t stride, std::size_t padding) {
    if (input.rank() != 3 || kernels.rank() != 4 || kernels.dim(1) != input.dim(0) ||
        kernels.dim(2) != kernels.dim(3) || bias.size() != kernels.dim(0))
        throw DimensionError("conv2d: kernels " + shape_str(kernels.shape()) +
                             " incompatible with input " + shape_str(input.shape()));
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t f = kernels.dim(0), k = kernels.dim(2);
    if (k > h + 2 * padding || k > w + 2 * padding)
        throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) +
                             " larger than padded input " + shape_str(input.shape()));
    const std::size_t oh = conv_out_extent(h, k, stride, padding);
    const std::size_t ow = conv_out_extent(w, k, stride, padding);

    TensorT<T> out({f, oh, ow});
    for (std::size_t fi = 0; fi < f; ++fi) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                T acc = bias[fi];
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy =
                            std::ptrdiff_t(y * stride + ky) - std::ptrdiff_t(padding);
                        if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::ptrdiff_t ix =
                                std::ptrdiff_t(x * stride + kx) - std::ptrdiff_t(padding);
                            if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
                            acc += input(ci, std::size_t(iy), std::size_t(ix)) *
                                   kernels(fi, ci, ky, kx);
                        }
                    }
                }
                out(fi, y, x) = acc;
            }
        }
    }
    return {std::move(out), Conv2dCache<T>{input, kernels, stride, padding}};
}

// Gradient w.r.t. the convolution input given kernels. The same routine backs
// both the chain rule (actual kernels) and feedback-matrix error transport
// (random kernels of the same shape).
template <typename T>
TensorT<T> conv2d_backward_input(const TensorT<T>& kernels, const TensorT<T>& out_error,
                                 const Shape& input_shape, std::size_t stride,
                                 std::size_t padding) {
    if (input_shape.size() != 3 || kernels.rank() != 4 || out_error.rank() != 3 ||
        out_error.dim(0) != kernels.dim(0))
        throw DimensionError("conv2d_backward_input: error " + shape_str(out_error.shape()) +
                             " incompatible with kernels " + shape_str(kernels.shape()));
    const std::size_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
    const std::size_t f = kernels.dim(0), k = kernels.dim(2);
    const std::size_t oh = out_error.dim(1), ow = out_error.dim(2);
    if (kernels.dim(1) != c || oh != conv_out_extent(h, k, stride, padding) ||
        ow != conv_out_extent(w, k, stride, padding))
        throw DimensionError("conv2d_backward_input: error shape " +
                             shape_str(out_error.shape()) + " does not match forward of input " +
                             shape_str(input_shape));

    TensorT<T> in_err(input_shape);
    for (std::size_t fi = 0; fi < f; ++fi) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const T g = out_error(fi, y, x);
                if (g == T(0)) continue;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy =
                            std::ptrdiff_t(y * stride + ky) - std::ptrdiff_t(padding);
                        if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::ptrdiff_t ix =
                                std::ptrdiff_t(x * stride + kx) - std::ptrdiff_t(padding);
                            if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
                            in_err(ci, std::size_t(iy), std::size_t(ix)) +=
                                g * kernels(fi, ci, ky, kx);
                        }
                    }
                }
            }
        }
    }
    return in_err;
}

// (kernel_grad, bias_grad) of the loss given the layer input and the error at
// the layer's pre-activations.
template <typename T>
std::pair<TensorT<T>, TensorT<T>> conv2d_backward_params(const TensorT<T>& input,
                                                         const TensorT<T>& out_error,
                                                         const Shape& kernel_shape,
                                                         std::size_t stride,
                                                         std::size_t padding) {
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const std::size_t f = kernel_shape[0], k = kernel_shape[2];
    if (kernel_shape.size() != 4 || kernel_shape[1] != c || out_error.rank() != 3 ||
        out_error.dim(0) != f ||
        out_error.dim(1) != conv_out_extent(h, k, stride, padding) ||
        out_error.dim(2) != conv_out_extent(w, k, stride, padding))
        throw DimensionError("conv2d_backward_params: error " + shape_str(out_error.shape()) +
                             " does not match input " + shape_str(input.shape()) +
                             " and kernels " + shape_str(kernel_shape));
    const std::size_t oh = out_error.dim(1), ow = out_error.dim(2);

    TensorT<T> kgrad(kernel_shape);
    TensorT<T> bgrad({f});
    for (std::size_t fi = 0; fi < f; ++fi) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const T g = out_error(fi, y, x);
                bgrad[fi] += g;
                if (g == T(0)) continue;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    for (std::size_t ky = 0; ky < k; ++ky) {
                        const std::ptrdiff_t iy =
                            std::ptrdiff_t(y * stride + ky) - std::ptrdiff_t(padding);
                        if (iy < 0 || iy >= std::ptrdiff_t(h)) continue;
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const std::ptrdiff_t ix =
                                std::ptrdiff_t(x * stride + kx) - std::ptrdiff_t(padding);
                            if (ix < 0 || ix >= std::ptrdiff_t(w)) continue;
                            kgrad(fi, ci, ky, kx) += g * input(ci, std::size_t(iy), std::size_t(ix));
                        }
                    }
                }
            }
        }
    }
    return {std::move(kgrad), std::move(bgrad)};
}

template <typename T>
struct Conv2dGrads {
    TensorT<T> input_error;
    TensorT<T> kernel_grad;
    TensorT<T> bias_grad;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Conv2dCache<T>& cache, const TensorT<T>& out_error) {
    auto in_err = conv2d_backward_input(cache.kernels, out_error, cache.input.shape(),
                                        cache.stride, cache.padding);
    auto [kgrad, bgrad] = conv2d_backward_params(cache.input, out_error, cache.kernels.shape(),
                                                 cache.stride, cache.padding);
    return {std::move(in_err), std::move(kgrad), std::move(bgrad)};
}

// ---------------------------------------------------------------------------
// Max pooling
// ---------------------------------------------------------------------------

struct PoolCache {
    Shape input_shape;
    Shape output_shape;
    std::size_t window = 2;
    std::size_t stride = 2;
    std::vector<std::size_t> argmax; // flat input index per output element
};

template <typename T>
std::pair<TensorT<T>, PoolCache> maxpool2d(const TensorT<T>& input, std::size_t window,
                                           std::size_t stride) {
    if (input.rank() != 3)
        throw DimensionError("maxpool2d: expected rank-3 input, got " + shape_str(input.shape()));
    const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (window > h || window > w)
        throw DimensionError("maxpool2d: window " + std::to_string(window) +
                             " larger than input " + shape_str(input.shape()));
    if (stride < 1) throw ConfigError("maxpool2d: stride must be >= 1");
    const std::size_t oh = (h - window) / stride + 1;
    const std::size_t ow = (w - window) / stride + 1;

    TensorT<T> out({c, oh, ow});
    PoolCache cache{input.shape(), {c, oh, ow}, window, stride, {}};
    cache.argmax.resize(c * oh * ow);
    std::size_t oidx = 0;
    for (std::size_t ci = 0; ci < c; ++ci) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x, ++oidx) {
                // Ties break to the first position in row-major scan order.
                std::size_t best = (ci * h + y * stride) * w + x * stride;
                T best_v = input[best];
                for (std::size_t ky = 0; ky < window; ++ky) {
                    for (std::size_t kx = 0; kx < window; ++kx) {
                        const std::size_t idx =
                            (ci * h + y * stride + ky) * w + (x * stride + kx);
                        if (input[idx] > best_v) {
                            best_v = input[idx];
                            best = idx;
                        }
                    }
                }
                out[oidx] = best_v;
                cache.argmax[oidx] = best;
            }
        }
    }
    return {std::move(out), std::move(cache)};
}

// Routes each error value to its argmax position; zeros elsewhere.
template <typename T>
TensorT<T> maxpool2d_backward(const PoolCache& cache, const TensorT<T>& out_error) {
    if (out_error.shape() != cache.output_shape)
        throw DimensionError("maxpool2d_backward: error " + shape_str(out_error.shape()) +
                             " does not match pooled output " + shape_str(cache.output_shape));
    TensorT<T> in_err(cache.input_shape);
    for (std::size_t i = 0; i < out_error.size(); ++i)
        in_err[cache.argmax[i]] += out_error[i];
    return in_err;
}

} // namespace biograd

#pragma once

#include "biograd/tensor.hpp"

namespace biograd {

// Whitening transform fit on a sample matrix: subtract the per-feature mean,
// then rotate/rescale so the sample covariance becomes the identity while
// staying as close as possible to the original coordinates.
struct ZcaTransform {
    Tensor mean;      // D
    Tensor whitening; // D x D, symmetric
    double epsilon = 1e-5;
};

// samples: N x D, N >= 2. epsilon = 0 demands a full-rank covariance.
ZcaTransform zca_fit(const Tensor& samples, double epsilon = 1e-5);

// x: D vector or N x D matrix; returns the whitened values with the same shape.
Tensor zca_apply(const ZcaTransform& t, const Tensor& x);

} // namespace biograd

#include "biograd/zca.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "biograd/error.hpp"

namespace biograd {

ZcaTransform zca_fit(const Tensor& samples, double epsilon) {
    if (samples.rank() != 2)
        throw DimensionError("zca_fit: expected N x D samples, got " + shape_str(samples.shape()));
    const std::size_t n = samples.dim(0), d = samples.dim(1);
    if (n < 2) throw ConfigError("zca_fit: need at least 2 samples, got " + std::to_string(n));
    if (epsilon < 0.0) throw ConfigError("zca_fit: epsilon must be >= 0");

    using Mat = Eigen::MatrixXd;
    Eigen::Map<const Mat> x(samples.data().data(), Eigen::Index(d), Eigen::Index(n));
    // Map is column-major over row-major storage, so x is D x N already.

    Eigen::VectorXd mean = x.rowwise().mean();
    Mat centered = x.colwise() - mean;
    Mat cov = centered * centered.transpose() / double(n - 1);

    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    if (eig.info() != Eigen::Success)
        throw NumericError("zca_fit: eigendecomposition failed");
    Eigen::VectorXd lambda = eig.eigenvalues();

    if (epsilon == 0.0) {
        const double lmax = std::max(lambda.maxCoeff(), 0.0);
        if (lambda.minCoeff() <= lmax * 1e-12)
            throw NumericError(
                "zca_fit: covariance is rank-deficient at epsilon = 0; supply a positive epsilon");
    }

    Eigen::VectorXd inv_scale(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        inv_scale[i] = 1.0 / std::sqrt(std::max(lambda[i], 0.0) + epsilon);

    Mat w = eig.eigenvectors() * inv_scale.asDiagonal() * eig.eigenvectors().transpose();
    // Force exact symmetry; the product above is symmetric only to roundoff.
    w = ((w + w.transpose()) * 0.5).eval();

    ZcaTransform t;
    t.epsilon = epsilon;
    t.mean = Tensor({d}, std::vector<double>(mean.data(), mean.data() + d));
    t.whitening = Tensor({d, d}, std::vector<double>(w.data(), w.data() + d * d));
    if (!t.whitening.all_finite())
        throw NumericError("zca_fit: non-finite whitening matrix");
    return t;
}

Tensor zca_apply(const ZcaTransform& t, const Tensor& x) {
    const std::size_t d = t.mean.size();
    using Mat = Eigen::MatrixXd;
    Eigen::Map<const Mat> w(t.whitening.data().data(), Eigen::Index(d), Eigen::Index(d));
    Eigen::Map<const Eigen::VectorXd> mean(t.mean.data().data(), Eigen::Index(d));

    if (x.rank() == 1) {
        if (x.size() != d)
            throw DimensionError("zca_apply: input " + shape_str(x.shape()) +
                                 " does not match transform dimension " + std::to_string(d));
        Eigen::Map<const Eigen::VectorXd> v(x.data().data(), Eigen::Index(d));
        Eigen::VectorXd y = w * (v - mean);
        return Tensor({d}, std::vector<double>(y.data(), y.data() + d));
    }
    if (x.rank() == 2) {
        if (x.dim(1) != d)
            throw DimensionError("zca_apply: input " + shape_str(x.shape()) +
                                 " does not match transform dimension " + std::to_string(d));
        const std::size_t n = x.dim(0);
        Eigen::Map<const Mat> v(x.data().data(), Eigen::Index(d), Eigen::Index(n));
        Mat y = w * (v.colwise() - mean);
        return Tensor({n, d}, std::vector<double>(y.data(), y.data() + n * d));
    }
    throw DimensionError("zca_apply: expected rank-1 or rank-2 input, got " +
                         shape_str(x.shape()));
}

} // namespace biograd

#pragma once

// Dense helpers shared by the density scorers. Templated on the Eigen
// expression so callers can pass blocks and maps without copies.

#include "abstain/core.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>

namespace abstain {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Row mean of an n x d sample.
template <typename Derived>
VectorX<typename Derived::Scalar> row_mean(const Eigen::MatrixBase<Derived>& x) {
    return x.colwise().mean().transpose();
}

/// Scatter matrix sum_i (x_i - mu)(x_i - mu)^T.
template <typename Derived, typename MeanDerived>
MatrixX<typename Derived::Scalar> scatter(const Eigen::MatrixBase<Derived>& x,
                                          const Eigen::MatrixBase<MeanDerived>& mu) {
    const MatrixX<typename Derived::Scalar> centered = x.rowwise() - mu.transpose();
    return centered.transpose() * centered;
}

/// Sample covariance with denominator n - 1.
template <typename Derived>
MatrixX<typename Derived::Scalar> covariance(const Eigen::MatrixBase<Derived>& x) {
    require(x.rows() >= 2, "covariance needs at least 2 rows");
    return scatter(x, row_mean(x)) / static_cast<typename Derived::Scalar>(x.rows() - 1);
}

template <typename Scalar>
struct Precision {
    MatrixX<Scalar> precision;
    Scalar log_det = 0;   // log det of the (possibly regularized) covariance
    Scalar ridge = 0;     // 0 unless regularization was applied
    bool regularized() const { return ridge > 0; }
};

/// Smallest/largest eigenvalue ratio below which a covariance is treated as
/// singular and receives the ridge.
inline constexpr double kConditionFloor = 1e-10;

/// Inverse covariance. Well-conditioned input is inverted directly; a
/// singular or near-singular one gets lambda I added first with
/// lambda = 1e-6 trace / d (1e-6 when the trace is zero).
template <typename Derived>
Precision<typename Derived::Scalar> regularized_precision(const Eigen::MatrixBase<Derived>& cov) {
    using Scalar = typename Derived::Scalar;
    require(cov.rows() == cov.cols() && cov.rows() >= 1, "covariance must be square");
    const auto d = cov.rows();
    MatrixX<Scalar> sym = (cov + cov.transpose()) / Scalar(2);

    Precision<Scalar> out;
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(sym, Eigen::EigenvaluesOnly);
    const Scalar lo = eig.eigenvalues().minCoeff();
    const Scalar hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0) || !(lo > Scalar(kConditionFloor) * hi)) {
        const Scalar trace = sym.trace();
        out.ridge = trace > 0 ? Scalar(1e-6) * trace / static_cast<Scalar>(d) : Scalar(1e-6);
        sym.diagonal().array() += out.ridge;
    }
    Eigen::LLT<MatrixX<Scalar>> llt(sym);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::degenerate, "covariance is not positive definite after regularization");
    out.precision = llt.solve(MatrixX<Scalar>::Identity(d, d));
    out.precision = (out.precision + out.precision.transpose()).eval() / Scalar(2);
    out.log_det = Scalar(2) * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return out;
}

/// (x - mu)^T P (x - mu).
template <typename XDerived, typename MuDerived, typename PDerived>
typename XDerived::Scalar squared_mahalanobis(const Eigen::MatrixBase<XDerived>& x,
                                              const Eigen::MatrixBase<MuDerived>& mu,
                                              const Eigen::MatrixBase<PDerived>& precision) {
    const VectorX<typename XDerived::Scalar> diff = x - mu;
    return diff.dot(precision * diff);
}

/// Pairwise squared Euclidean distances between the rows of a and b.
template <typename ADerived, typename BDerived>
MatrixX<typename ADerived::Scalar> pairwise_squared_distances(const Eigen::MatrixBase<ADerived>& a,
                                                              const Eigen::MatrixBase<BDerived>& b) {
    using Scalar = typename ADerived::Scalar;
    const VectorX<Scalar> an = a.rowwise().squaredNorm();
    const VectorX<Scalar> bn = b.rowwise().squaredNorm();
    MatrixX<Scalar> d2 = (-2 * (a * b.transpose())).eval();
    d2.colwise() += an;
    d2.rowwise() += bn.transpose();
    return d2.cwiseMax(Scalar(0));
}

} // namespace abstain

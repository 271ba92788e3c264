#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

#include "qrdesign/errors.hpp"

namespace qrdesign {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/** Largest eigenvalue ratio accepted before an SPD inverse is refused. */
inline constexpr double kConditionGuard = 1e12;

/** Symmetrize a nominally symmetric matrix, cancelling round-off drift. */
inline Matrix sym(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/** True when every entry of m is finite. */
inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/**
 * Inverse of a symmetric positive-definite matrix via Cholesky.
 *
 * The eigenvalue spectrum is checked first: a non-positive smallest
 * eigenvalue, or a ratio of extreme eigenvalues above kConditionGuard,
 * raises ErrorT (a SingularMatrix subtype chosen by the caller).
 */
template <class ErrorT>
Matrix spd_inverse(const Matrix& m, const std::string& label) {
    if (!all_finite(m)) throw ErrorT(label + ": matrix has non-finite entries");
    const Matrix s = sym(m);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw ErrorT(label + ": eigenvalue computation failed");
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kConditionGuard)
        throw ErrorT(label + ": singular or ill-conditioned (min eig " +
                     std::to_string(lo) + ", max eig " + std::to_string(hi) + ")");
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success)
        throw ErrorT(label + ": Cholesky factorization failed");
    return sym(llt.solve(Matrix::Identity(s.rows(), s.cols())));
}

/**
 * Symmetric square root of a positive semi-definite matrix.
 *
 * Eigenvalues below a relative floor are clamped to zero, so mildly
 * rank-deficient inputs (within round-off) are accepted.
 */
inline Matrix sym_sqrt(const Matrix& m) {
    const Matrix s = sym(m);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    if (es.info() != Eigen::Success)
        throw Error("sym_sqrt: eigenvalue computation failed");
    const double scale = std::max(std::abs(es.eigenvalues().maxCoeff()), 1.0);
    Vector d = es.eigenvalues();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d[i] < -1e-10 * scale)
            throw Error("sym_sqrt: matrix is not positive semi-definite");
        d[i] = std::sqrt(std::max(d[i], 0.0));
    }
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

/** Largest eigenvalue of a symmetric matrix. */
inline double max_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym(m), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw Error("max_eigenvalue: eigenvalue computation failed");
    return es.eigenvalues().maxCoeff();
}

/**
 * Largest eigenvalue of the product a * t for symmetric PSD a and t.
 *
 * Computed as the largest eigenvalue of sqrt(a) * t * sqrt(a), which is
 * symmetric and similar to a * t, so the result is real by construction.
 */
inline double chmax_product(const Matrix& a, const Matrix& t) {
    const Matrix r = sym_sqrt(a);
    return max_eigenvalue(r * sym(t) * r);
}

/** Numerical rank of a rectangular matrix via column-pivoted QR. */
inline Eigen::Index rank(const Matrix& m) {
    Eigen::ColPivHouseholderQR<Matrix> qr(m);
    return qr.rank();
}

} // namespace linalg
} // namespace qrdesign

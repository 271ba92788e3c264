#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "qrdesign/basis.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"

namespace qrdesign {

/**
 * Moment matrices of a design measure under a known sigma profile.
 *
 *   A   - moment matrix of the design space itself (all admissible points),
 *   T00 - basis outer products weighted by the design weights,
 *   T01 - weighted by (weight / sigma),
 *   T02 - weighted by (weight / sigma)^2,
 *   T0  - T01^-1 T00 T01^-1 (sandwich entering the variance term),
 *   T2  - T01^-1 T02 T01^-1 (sandwich entering the bias term).
 *
 * Continuous measures replace sums by trapezoid integrals of the density.
 */
struct MomentMatrices {
    Matrix A;
    Matrix T00;
    Matrix T01;
    Matrix T02;
    Matrix T0;
    Matrix T2;
};

/** Basis design matrix: row i is f(x_i)' for the given abscissae. */
inline Matrix basis_matrix(const std::vector<double>& xs, const Basis& basis) {
    const int p = basis.dim();
    Matrix f(static_cast<Eigen::Index>(xs.size()), p);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const Vector fi = basis.eval(xs[i]);
        if (!fi.allFinite())
            throw NonFiniteBasisValue("basis_matrix: non-finite basis value at x = " +
                                      std::to_string(xs[i]));
        f.row(static_cast<Eigen::Index>(i)) = fi.transpose();
    }
    return f;
}

/**
 * Moment matrix of the design space: the average of f(x)f(x)' over all
 * admissible points (discrete), or its unnormalized integral over the
 * interval (continuous).
 */
inline Matrix moment_matrix_A(const DesignSpace& space, const Basis& basis) {
    const int p = basis.dim();
    Matrix a = Matrix::Zero(p, p);
    const Matrix f = basis_matrix(space.points(), basis);
    if (space.kind() == SpaceKind::Discrete) {
        a = f.transpose() * f / static_cast<double>(space.size());
    } else {
        const auto w = space.quad_weights();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const auto fi = f.row(static_cast<Eigen::Index>(i));
            a.noalias() += w[i] * fi.transpose() * fi;
        }
    }
    return linalg::sym(a);
}

/**
 * All moment matrices of a design measure for a fixed sigma profile.
 *
 * Discrete sums run over the support of the measure only; continuous
 * integrals vanish off the support automatically.  Throws SingularT01 when
 * the weighted moment matrix T01 cannot be inverted (for example when the
 * support carries fewer points than basis functions).
 */
inline MomentMatrices t_matrices(const DesignMeasure& measure, const Basis& basis,
                                 const FixedSigma& sigma) {
    if (!(sigma.space() == measure.space()))
        throw InvalidArgument("t_matrices: sigma and measure live on different spaces");
    const int p = basis.dim();
    const auto& xs = measure.space().points();
    const Matrix f = basis_matrix(xs, basis);

    MomentMatrices mm;
    mm.A = moment_matrix_A(measure.space(), basis);
    mm.T00 = Matrix::Zero(p, p);
    mm.T01 = Matrix::Zero(p, p);
    mm.T02 = Matrix::Zero(p, p);

    const auto accumulate = [&](std::size_t i, double w0, double w1, double w2) {
        const auto fi = f.row(static_cast<Eigen::Index>(i));
        const Matrix outer = fi.transpose() * fi;
        mm.T00.noalias() += w0 * outer;
        mm.T01.noalias() += w1 * outer;
        mm.T02.noalias() += w2 * outer;
    };

    if (measure.kind() == SpaceKind::Discrete) {
        for (std::size_t i : measure.support_indices()) {
            const double xi = measure.values()[i];
            const double ratio = xi / sigma.at(i);
            accumulate(i, xi, ratio, ratio * ratio);
        }
    } else {
        const auto w = measure.space().quad_weights();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double m = measure.values()[i];
            if (m <= 0.0) continue;
            const double ratio = m / sigma.at(i);
            accumulate(i, w[i] * m, w[i] * ratio, w[i] * ratio * ratio);
        }
    }

    mm.T00 = linalg::sym(mm.T00);
    mm.T01 = linalg::sym(mm.T01);
    mm.T02 = linalg::sym(mm.T02);
    const Matrix t01_inv = linalg::spd_inverse<SingularT01>(mm.T01, "t_matrices: T01");
    mm.T0 = linalg::sym(t01_inv * mm.T00 * t01_inv);
    mm.T2 = linalg::sym(t01_inv * mm.T02 * t01_inv);
    return mm;
}

} // namespace qrdesign

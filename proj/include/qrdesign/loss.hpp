#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/moments.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"

namespace qrdesign {

/** Default standard-normal density height used to calibrate error scale. */
inline double default_g0() { return 1.0 / std::sqrt(8.0 * std::atan(1.0)); }

/**
 * Mixing weight and quantile level for the design loss.
 *
 * nu in [0, 1] trades the variance term (nu = 0) against the worst-case
 * bias term (nu = 1); tau in (0, 1) is the quantile being estimated.
 */
struct LossConfig {
    double nu = 0.5;
    double tau = 0.5;

    void validate() const {
        if (!(nu >= 0.0 && nu <= 1.0))
            throw InvalidArgument("LossConfig: nu must lie in [0, 1]");
        if (!(tau > 0.0 && tau < 1.0))
            throw InvalidArgument("LossConfig: tau must lie in (0, 1)");
    }
};

/**
 * Mixing weight induced by a contamination radius eta: the relative share
 * of the worst-case squared bias in the maximum asymptotic MSE, given the
 * quantile level tau and error density height g0 at the quantile.
 */
inline double nu_from_contamination(double eta, double tau, double g0) {
    if (!(eta >= 0.0)) throw InvalidArgument("nu_from_contamination: eta must be >= 0");
    if (!(tau > 0.0 && tau < 1.0))
        throw InvalidArgument("nu_from_contamination: tau must lie in (0, 1)");
    if (!(g0 > 0.0)) throw InvalidArgument("nu_from_contamination: g0 must be > 0");
    const double v = tau * (1.0 - tau) / (g0 * g0);
    return eta * eta / (v + eta * eta);
}

/**
 * A evaluated design loss: total = (1 - nu) * variance_term + nu * bias_term,
 * together with the moment matrices it was computed from.  variance_term is
 * tr(A T0); bias_term is the largest eigenvalue of A T2.
 */
struct LossReport {
    double variance_term = 0.0;
    double bias_term = 0.0;
    double nu = 0.0;
    double total = 0.0;
    MomentMatrices moments;
};

namespace detail {

inline LossReport report_from_moments(MomentMatrices mm, double nu) {
    LossReport rep;
    rep.variance_term = (mm.A * mm.T0).trace();
    rep.bias_term = linalg::chmax_product(mm.A, mm.T2);
    rep.nu = nu;
    rep.total = (1.0 - nu) * rep.variance_term + nu * rep.bias_term;
    rep.moments = std::move(mm);
    return rep;
}

} // namespace detail

/** Design loss for a known (normalized) sigma profile. */
inline LossReport loss_fixed_sigma(const DesignMeasure& measure, const Basis& basis,
                                   const FixedSigma& sigma, const LossConfig& config) {
    config.validate();
    return detail::report_from_moments(t_matrices(measure, basis, sigma), config.nu);
}

/**
 * Design loss when sigma is only known to be proportional to the design's
 * own weight (or density) raised to the power r/2 on its support, with the
 * proportionality constant pinned by the scale normalization.
 *
 * The moment matrices reported use the power-weighted sums S_k in place of
 * T0k, with the normalization constant folded into T0 so that
 * variance_term = tr(A T0) still holds.  Throws SingularS1 when the
 * first-power matrix cannot be inverted.
 */
inline LossReport loss_sigma0_class(const DesignMeasure& measure, const Basis& basis,
                                    double r, const LossConfig& config) {
    config.validate();
    if (!(r >= 0.0 && r <= 2.0))
        throw InvalidArgument("loss_sigma0_class: r must lie in [0, 2]");
    const int p = basis.dim();
    const auto& xs = measure.space().points();
    const Matrix f = basis_matrix(xs, basis);

    Matrix s0 = Matrix::Zero(p, p);
    Matrix s1 = Matrix::Zero(p, p);
    Matrix s2 = Matrix::Zero(p, p);
    const double e1 = 1.0 - 0.5 * r;
    const double e2 = 2.0 * e1;
    double rth_moment = 0.0; // support sum (or integral) of the design values to the power r

    if (measure.kind() == SpaceKind::Discrete) {
        for (std::size_t i : measure.support_indices()) {
            const double xi = measure.values()[i];
            const auto fi = f.row(static_cast<Eigen::Index>(i));
            const Matrix outer = fi.transpose() * fi;
            s0.noalias() += xi * outer;
            s1.noalias() += std::pow(xi, e1) * outer;
            s2.noalias() += std::pow(xi, e2) * outer;
            rth_moment += std::pow(xi, r);
        }
        rth_moment /= static_cast<double>(measure.size());
    } else {
        const auto w = measure.space().quad_weights();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double m = measure.values()[i];
            if (m <= 0.0) continue;
            const auto fi = f.row(static_cast<Eigen::Index>(i));
            const Matrix outer = fi.transpose() * fi;
            s0.noalias() += w[i] * m * outer;
            s1.noalias() += w[i] * std::pow(m, e1) * outer;
            s2.noalias() += w[i] * std::pow(m, e2) * outer;
            rth_moment += w[i] * std::pow(m, r);
        }
    }
    if (!(rth_moment > 0.0))
        throw SingularS1("loss_sigma0_class: design has empty support");
    const double c_r_sq = 1.0 / rth_moment;

    MomentMatrices mm;
    mm.A = moment_matrix_A(measure.space(), basis);
    mm.T00 = linalg::sym(s0);
    mm.T01 = linalg::sym(s1);
    mm.T02 = linalg::sym(s2);
    const Matrix s1_inv = linalg::spd_inverse<SingularS1>(mm.T01, "loss_sigma0_class: S1");
    mm.T0 = linalg::sym(c_r_sq * s1_inv * s0 * s1_inv);
    mm.T2 = linalg::sym(s1_inv * s2 * s1_inv);
    return detail::report_from_moments(std::move(mm), config.nu);
}

/** Exponent grid used by worst_r_loss when none is given. */
inline const std::vector<double>& default_r_grid() {
    static const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0,
                                             1.25, 1.5, 1.75, 2.0};
    return grid;
}

/**
 * Largest loss over a grid of variance-class exponents r, returned with
 * the exponent attaining it.  The grid must contain r = 1.  When several
 * exponents tie for the maximum within relative round-off, r = 1 is
 * preferred, then the smaller exponent.
 */
inline std::pair<double, LossReport> worst_r_loss(const DesignMeasure& measure,
                                                  const Basis& basis,
                                                  const LossConfig& config,
                                                  const std::vector<double>& r_grid =
                                                      default_r_grid()) {
    if (r_grid.empty()) throw InvalidArgument("worst_r_loss: empty exponent grid");
    bool has_one = false;
    for (double r : r_grid) has_one = has_one || std::abs(r - 1.0) <= 1e-12;
    if (!has_one) throw InvalidArgument("worst_r_loss: exponent grid must contain r = 1");

    std::vector<LossReport> reports;
    reports.reserve(r_grid.size());
    double best = -std::numeric_limits<double>::infinity();
    for (double r : r_grid) {
        reports.push_back(loss_sigma0_class(measure, basis, r, config));
        best = std::max(best, reports.back().total);
    }
    const double tie_tol = 1e-10 * (1.0 + std::abs(best));
    // Prefer r = 1 among ties, then the smallest exponent.
    for (std::size_t i = 0; i < r_grid.size(); ++i)
        if (std::abs(r_grid[i] - 1.0) <= 1e-12 && reports[i].total >= best - tie_tol)
            return {r_grid[i], reports[i]};
    for (std::size_t i = 0; i < r_grid.size(); ++i)
        if (reports[i].total >= best - tie_tol) return {r_grid[i], reports[i]};
    throw Error("worst_r_loss: unreachable");
}

/**
 * First-order moments of the estimator under a concrete mean perturbation
 * delta0, and the resulting asymptotic MSE matrix
 *   P1^-1 [ tau(1-tau)/g0^2 * P0 + mu0 mu0' ] P1^-1
 * where mu0 integrates delta0 * f * (weight / sigma) over the design.
 */
struct AsymptoticMoments {
    Vector mu0;
    Matrix P0;
    Matrix P1;
    Matrix mse_matrix;
};

inline AsymptoticMoments asymptotic_mse_matrix(const DesignMeasure& measure,
                                               const Basis& basis, const FixedSigma& sigma,
                                               const std::function<double(double)>& delta0,
                                               double tau, double g0) {
    if (!(tau > 0.0 && tau < 1.0))
        throw InvalidArgument("asymptotic_mse_matrix: tau must lie in (0, 1)");
    if (!(g0 > 0.0)) throw InvalidArgument("asymptotic_mse_matrix: g0 must be > 0");
    if (!(sigma.space() == measure.space()))
        throw InvalidArgument("asymptotic_mse_matrix: sigma and measure live on different spaces");

    const int p = basis.dim();
    const auto& xs = measure.space().points();
    const Matrix f = basis_matrix(xs, basis);

    AsymptoticMoments out;
    out.mu0 = Vector::Zero(p);
    out.P0 = Matrix::Zero(p, p);
    out.P1 = Matrix::Zero(p, p);

    const auto accumulate = [&](std::size_t i, double w0, double w1) {
        const auto fi = f.row(static_cast<Eigen::Index>(i));
        const Matrix outer = fi.transpose() * fi;
        out.P0.noalias() += w0 * outer;
        out.P1.noalias() += w1 * outer;
        out.mu0.noalias() += delta0(xs[i]) * w1 * fi.transpose();
    };

    if (measure.kind() == SpaceKind::Discrete) {
        for (std::size_t i : measure.support_indices()) {
            const double xi = measure.values()[i];
            accumulate(i, xi, xi / sigma.at(i));
        }
    } else {
        const auto w = measure.space().quad_weights();
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double m = measure.values()[i];
            if (m <= 0.0) continue;
            accumulate(i, w[i] * m, w[i] * m / sigma.at(i));
        }
    }

    out.P0 = linalg::sym(out.P0);
    out.P1 = linalg::sym(out.P1);
    const Matrix p1_inv = linalg::spd_inverse<SingularP1>(out.P1, "asymptotic_mse_matrix: P1");
    const double v = tau * (1.0 - tau) / (g0 * g0);
    out.mse_matrix = linalg::sym(p1_inv * (v * out.P0 + out.mu0 * out.mu0.transpose()) * p1_inv);
    return out;
}

/**
 * Smallest eigenvalue of  M_p^-1 M_{p^2} M_p^-1  -  M_1^-1  for a positive
 * weight function p over a subset of a design space, where M_q sums (or
 * integrates) q(x) f(x) f(x)' over that subset.  The difference is positive
 * semi-definite for every positive weight, so the returned gap is
 * nonnegative up to round-off.
 *
 * For continuous spaces the support must be a contiguous run of at least
 * two grid nodes; the integral is the trapezoid rule on that run.
 */
inline double psd_gap(const std::function<double(double)>& p_fn, const Basis& basis,
                      const DesignSpace& space, const std::vector<std::size_t>& support) {
    if (support.empty()) throw InvalidArgument("psd_gap: empty support");
    const int p = basis.dim();
    for (std::size_t i : support)
        if (i >= space.size()) throw InvalidArgument("psd_gap: support index out of range");

    Matrix m1 = Matrix::Zero(p, p);
    Matrix mp = Matrix::Zero(p, p);
    Matrix mp2 = Matrix::Zero(p, p);

    const auto add = [&](double x, double w) {
        const double q = p_fn(x);
        if (!(q > 0.0) || !std::isfinite(q))
            throw InvalidArgument("psd_gap: weight function must be positive and finite");
        const Vector fi = basis.eval(x);
        const Matrix outer = fi * fi.transpose();
        m1.noalias() += w * outer;
        mp.noalias() += w * q * outer;
        mp2.noalias() += w * q * q * outer;
    };

    if (space.kind() == SpaceKind::Discrete) {
        for (std::size_t i : support) add(space.points()[i], 1.0);
    } else {
        if (support.size() < 2)
            throw InvalidArgument("psd_gap: continuous support needs at least two nodes");
        for (std::size_t k = 0; k + 1 < support.size(); ++k)
            if (support[k + 1] != support[k] + 1)
                throw InvalidArgument("psd_gap: continuous support must be contiguous");
        const auto& xs = space.points();
        for (std::size_t k = 0; k < support.size(); ++k) {
            const std::size_t i = support[k];
            double w = 0.0;
            if (k + 1 < support.size()) w += 0.5 * (xs[support[k + 1]] - xs[i]);
            if (k > 0) w += 0.5 * (xs[i] - xs[support[k - 1]]);
            add(xs[i], w);
        }
    }

    const Matrix mp_inv = linalg::spd_inverse<SingularMatrix>(mp, "psd_gap: M_p");
    const Matrix m1_inv = linalg::spd_inverse<SingularMatrix>(m1, "psd_gap: M_1");
    const Matrix diff = linalg::sym(mp_inv * mp2 * mp_inv - m1_inv);
    Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw Error("psd_gap: eigenvalue computation failed");
    return es.eigenvalues().minCoeff();
}

} // namespace qrdesign

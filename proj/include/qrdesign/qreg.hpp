#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "qrdesign/basis.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/moments.hpp"

namespace qrdesign {

/** Asymmetric absolute loss rho_tau(r) = r * (tau - [r < 0]). */
inline double check_loss(double r, double tau) {
    return r * (tau - (r < 0.0 ? 1.0 : 0.0));
}

/** Sum of check losses of a residual vector. */
inline double check_loss(const Vector& residuals, double tau) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < residuals.size(); ++i)
        s += check_loss(residuals[i], tau);
    return s;
}

/**
 * An exact linear quantile-regression fit.
 *
 * theta_hat is a vertex solution (at least p zero residuals) refined so
 * that no single coordinate can be decreased without increasing the
 * objective; optimality_gap is the largest violation of the one-sided
 * directional-derivative conditions along the +-coordinate directions.
 */
struct QuantileFit {
    double tau = 0.5;
    Vector theta_hat;
    double objective = 0.0;
    double optimality_gap = 0.0;
};

namespace detail {

/**
 * One-sided slope of t -> sum_i rho_tau(r_i + t g_i) at t = 0+.  Entries
 * with |r_i| <= ztol are treated as exactly zero residuals, contributing
 * the slope of the side the movement enters.
 */
inline double onesided_slope(const Vector& r, const Vector& g, double tau, double ztol) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        if (std::abs(r[i]) <= ztol) {
            s += gi > 0.0 ? gi * tau : gi * (tau - 1.0);
        } else {
            s += gi * (tau - (r[i] < 0.0 ? 1.0 : 0.0));
        }
    }
    return s;
}

struct WalkResult {
    double t = 0.0;
    Eigen::Index stop_index = -1; // observation whose residual reaches zero at t
    double slope_after = 0.0;
};

/**
 * Walk t upward from 0 along residual path r + t g, starting with slope
 * start_slope, crossing residual-zero breakpoints while the current
 * segment still descends (slope < -flat_tol) or stays flat
 * (slope <= flat_tol when allow_flat).  Stops at the last admissible
 * breakpoint.  Entries with |r_i| <= ztol are not breakpoints (their side
 * was already chosen by start_slope).
 */
inline WalkResult walk_breakpoints(const Vector& r, const Vector& g, double start_slope,
                                   double ztol, double flat_tol, bool allow_flat) {
    std::vector<std::pair<double, Eigen::Index>> bps;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (std::abs(r[i]) <= ztol || g[i] == 0.0) continue;
        const double t = -r[i] / g[i];
        if (t > 0.0) bps.emplace_back(t, i);
    }
    std::sort(bps.begin(), bps.end());

    WalkResult out;
    double slope = start_slope;
    for (const auto& [t, i] : bps) {
        const bool advance = allow_flat ? slope <= flat_tol : slope < -flat_tol;
        if (!advance) break;
        out.t = t;
        out.stop_index = i;
        slope += std::abs(g[i]);
        out.slope_after = slope;
    }
    return out;
}

} // namespace detail

/**
 * Exact quantile regression: minimize sum_i rho_tau(y_i - f_i' theta).
 *
 * The solver walks vertices (interpolating exactly p observations),
 * entering the first descending edge and taking long steps through
 * residual sign changes until the edge stops descending.  At the optimal
 * vertex, each coordinate is slid downhill through flat stretches so that
 * the reported solution is the smallest attainable in each coordinate,
 * taken in coordinate order.  Throws RankDeficient when the design matrix
 * has column rank below p, and Unbounded if an edge walk finds no
 * blocking breakpoint (cannot occur for 0 < tau < 1 with full rank).
 */
inline QuantileFit fit_quantile(const Matrix& f, const Vector& y, double tau) {
    const Eigen::Index n = f.rows();
    const Eigen::Index p = f.cols();
    if (!(tau > 0.0 && tau < 1.0))
        throw InvalidArgument("fit_quantile: tau must lie in (0, 1)");
    if (n < p) throw RankDeficient("fit_quantile: fewer observations than coefficients");
    if (y.size() != n) throw InvalidArgument("fit_quantile: y size mismatch");

    Eigen::ColPivHouseholderQR<Matrix> qr(f.transpose());
    if (qr.rank() < p)
        throw RankDeficient("fit_quantile: design matrix rank " +
                            std::to_string(qr.rank()) + " < p = " + std::to_string(p));

    const double y_scale = 1.0 + y.cwiseAbs().mean();
    const double ztol = 1e-11 * y_scale;

    // Initial vertex: p linearly independent rows chosen by column-pivoted QR.
    std::vector<Eigen::Index> basis(p);
    for (Eigen::Index k = 0; k < p; ++k)
        basis[k] = qr.colsPermutation().indices()[k];

    Matrix fb(p, p);
    Vector yb(p);
    const auto refresh_vertex = [&](Vector& theta, Vector& r) {
        for (Eigen::Index k = 0; k < p; ++k) {
            fb.row(k) = f.row(basis[k]);
            yb[k] = y[basis[k]];
        }
        theta = fb.partialPivLu().solve(yb);
        r = y - f * theta;
        for (Eigen::Index k = 0; k < p; ++k) r[basis[k]] = 0.0;
    };

    Vector theta, r;
    refresh_vertex(theta, r);

    const long max_pivots = 200 * static_cast<long>(n) + 1000;
    long pivots = 0;
    while (true) {
        if (++pivots > max_pivots)
            throw Error("fit_quantile: pivot limit exceeded");
        // Examine the 2p edge directions of the current vertex in a fixed
        // order; the first descending edge enters (anti-cycling rule).
        bool moved = false;
        bool optimal = true;
        for (Eigen::Index k = 0; k < p && !moved; ++k) {
            for (int sigma_i = 0; sigma_i < 2 && !moved; ++sigma_i) {
                const double sigma = sigma_i == 0 ? 1.0 : -1.0;
                Vector ek = Vector::Zero(p);
                ek[k] = sigma;
                const Vector d = fb.partialPivLu().solve(ek);
                Vector g = -(f * d);
                for (Eigen::Index j = 0; j < p; ++j) g[basis[j]] = 0.0;
                // Releasing the k-th interpolated observation contributes the
                // slope of the side its residual enters.
                const double release = sigma > 0.0 ? (1.0 - tau) : tau;
                const double slope0 = release + detail::onesided_slope(r, g, tau, ztol);
                const double g_scale = 1.0 + g.cwiseAbs().mean();
                const double eps = 1e-9 * g_scale;
                if (slope0 >= -eps) continue; // edge does not descend
                optimal = false;

                const auto walk =
                    detail::walk_breakpoints(r, g, slope0, ztol, 0.0, false);
                if (walk.stop_index < 0)
                    throw Unbounded("fit_quantile: descending edge has no breakpoint");
                basis[k] = walk.stop_index;
                refresh_vertex(theta, r);
                moved = true;
            }
        }
        if (optimal) break;
        if (!moved) break;
    }

    // Slide each coordinate downhill through flat stretches so ties resolve
    // to the smallest coordinate values, in coordinate order.
    for (Eigen::Index j = 0; j < p; ++j) {
        const Vector g = f.col(j); // residual path for theta_j decreasing
        const double g_scale = 1.0 + g.cwiseAbs().mean();
        const double flat_tol = 1e-9 * g_scale;
        const double slope0 = detail::onesided_slope(r, g, tau, ztol);
        if (slope0 > flat_tol) continue;
        const auto walk = detail::walk_breakpoints(r, g, slope0, ztol, flat_tol, true);
        if (walk.t > 0.0) {
            theta[j] -= walk.t;
            r = y - f * theta;
        }
    }

    QuantileFit fit;
    fit.tau = tau;
    fit.theta_hat = theta;
    fit.objective = check_loss(r, tau);
    double gap = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        for (int sigma_i = 0; sigma_i < 2; ++sigma_i) {
            const Vector g = sigma_i == 0 ? Vector(-f.col(j)) : Vector(f.col(j));
            gap = std::max(gap, -detail::onesided_slope(r, g, tau, ztol));
        }
    }
    fit.optimality_gap = std::max(gap, 0.0);
    return fit;
}

inline QuantileFit fit_quantile(const std::vector<double>& x, const std::vector<double>& y,
                                const Basis& basis, double tau) {
    if (x.size() != y.size())
        throw InvalidArgument("fit_quantile: x and y must have equal length");
    const Matrix f = basis_matrix(x, basis);
    Vector yv(static_cast<Eigen::Index>(y.size()));
    for (std::size_t i = 0; i < y.size(); ++i) yv[static_cast<Eigen::Index>(i)] = y[i];
    return fit_quantile(f, yv, tau);
}

/** Fitted quantile curve value at x. */
inline double predict(const QuantileFit& fit, const Basis& basis, double x) {
    return basis.eval(x).dot(fit.theta_hat);
}

inline std::vector<double> predict(const QuantileFit& fit, const Basis& basis,
                                   const std::vector<double>& xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(fit, basis, xs[i]);
    return out;
}

} // namespace qrdesign

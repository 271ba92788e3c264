#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/basis.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/moments.hpp"
#include "qrdesign/qreg.hpp"
#include "qrdesign/rng.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"

namespace qrdesign {

/**
 * Inverse standard normal CDF (Acklam's rational approximation followed by
 * one Halley refinement against erfc; accurate to full double precision
 * away from the extreme tails).
 */
inline double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidArgument("inverse_normal_cdf: p must lie strictly in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step on F(x) - p = 0.
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * std::acos(-1.0)) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

/**
 * A sampled model misspecification: values of delta0 on the space points,
 * orthogonal to the regression basis in L2(space) and with squared norm
 * eta^2 (mean square over a discrete space, integral over a continuous
 * one).
 */
struct MisspecFunction {
    std::vector<double> delta0;
    double eta = 0.0;
};

/**
 * Draw delta0 = eta * (normalized element of the basis complement):
 * a uniformly random direction of the orthogonal complement of the basis
 * columns in the weighted L2 geometry of the space.  On an N-point
 * discrete space this is eta * sqrt(N) * Q2 c with ||c|| = 1, which
 * saturates the neighborhood constraint mean(delta0^2) <= eta^2.
 */
inline MisspecFunction sample_delta0(const DesignSpace& space, const Basis& basis,
                                     double eta, Rng& rng) {
    if (!(eta >= 0.0) || !std::isfinite(eta))
        throw InvalidArgument("sample_delta0: eta must be finite and nonnegative");
    const std::size_t n = space.size();
    const Matrix f = basis_matrix(space.points(), basis);
    const std::size_t p = static_cast<std::size_t>(f.cols());
    if (n <= p)
        throw NoComplement("sample_delta0: the space has no directions outside the basis");

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    if (space.kind() == SpaceKind::Continuous) w = space.quad_weights();
    Vector w_sqrt(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) w_sqrt[static_cast<Eigen::Index>(i)] = std::sqrt(w[i]);

    const Matrix g = w_sqrt.asDiagonal() * f;
    const Eigen::HouseholderQR<Matrix> qr(g);
    const Matrix q = qr.householderQ() * Matrix::Identity(static_cast<Eigen::Index>(n),
                                                          static_cast<Eigen::Index>(n));
    const Matrix q2 = q.rightCols(static_cast<Eigen::Index>(n - p));

    MisspecFunction out;
    out.eta = eta;
    out.delta0.assign(n, 0.0);
    if (eta == 0.0) return out;

    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector c(static_cast<Eigen::Index>(n - p));
    double norm2 = 0.0;
    do {
        for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = gauss(rng);
        norm2 = c.squaredNorm();
    } while (!(norm2 > 0.0));
    c /= std::sqrt(norm2);

    const Vector d_w = q2 * c;
    for (std::size_t i = 0; i < n; ++i)
        out.delta0[i] = eta * d_w[static_cast<Eigen::Index>(i)] / w_sqrt[static_cast<Eigen::Index>(i)];

    // Certify orthogonality and norm in the weighted geometry.
    double norm_check = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm_check += w[i] * out.delta0[i] * out.delta0[i];
    if (std::abs(norm_check - eta * eta) > 1e-8 * (1.0 + eta * eta))
        throw Error("sample_delta0: norm certification failed");
    for (std::size_t j = 0; j < p; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            dot += w[i] * out.delta0[i] * f(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        if (std::abs(dot) > 1e-8 * (1.0 + eta))
            throw Error("sample_delta0: orthogonality certification failed");
    }
    return out;
}

/**
 * Loss along the nu grid for a fixed design: total(nu) =
 * (1 - nu) * variance_term + nu * bias_term, evaluated from one moment
 * computation (the loss is affine in nu by construction).
 */
inline std::vector<std::pair<double, double>> mse_vs_nu_curve(
    const DesignMeasure& design, const Basis& basis, const FixedSigma& sigma,
    const std::vector<double>& nu_grid) {
    LossConfig config; // nu of the config does not matter for the two terms
    const LossReport base = loss_fixed_sigma(design, basis, sigma, config);
    std::vector<std::pair<double, double>> curve;
    curve.reserve(nu_grid.size());
    for (double nu : nu_grid) {
        if (!(nu >= 0.0 && nu <= 1.0))
            throw InvalidArgument("mse_vs_nu_curve: nu must lie in [0, 1]");
        curve.emplace_back(nu, (1.0 - nu) * base.variance_term + nu * base.bias_term);
    }
    return curve;
}

/** One aggregated cell of the scenario table. */
struct ScenarioCell {
    double tau = 0.0;
    std::string design;
    double rmse_mean = 0.0;
    double rmse_se = 0.0;
    int n_failed = 0;
};

/** Configuration of the case-study simulation. */
struct ScenarioConfig {
    Basis truth_basis;
    Vector truth_coefficients;
    Basis fit_basis;
    std::string sigma_preset = "case_vee";
    double sigma_y_scale = 1.0;
    std::vector<double> taus = {0.05, 0.25, 0.5, 0.75, 0.95};
    std::size_t n = 200;
    int replications = 100;
    std::uint64_t rng_seed = 1729;
    std::size_t eval_grid_size = 512;

    /**
     * Default configuration: increasing concave truth on the rich knot
     * preset, fits on the coarse knot preset, vee-shaped noise scale.
     */
    static ScenarioConfig standard() {
        Basis truth = spline_from_preset("bestknots");
        const std::size_t p = truth.dim();
        // Control points on an increasing concave profile; the B-spline
        // curve inherits monotonicity and concavity from them.
        Vector coef(static_cast<Eigen::Index>(p));
        std::vector<double> knots;
        knots.insert(knots.end(), 4, truth.domain_lower());
        for (double t : truth.internal_knots()) knots.push_back(t);
        knots.insert(knots.end(), 4, truth.domain_upper());
        for (std::size_t j = 0; j < p; ++j) {
            const double greville = (knots[j + 1] + knots[j + 2] + knots[j + 3]) / 3.0;
            coef[static_cast<Eigen::Index>(j)] =
                50.0 + 35.0 * (1.0 - std::exp(-greville / 5.0));
        }
        ScenarioConfig cfg{.truth_basis = std::move(truth),
                           .truth_coefficients = std::move(coef),
                           .fit_basis = spline_from_preset("desknots")};
        return cfg;
    }
};

/** Full scenario output: the summary table plus per-design loss curves. */
struct ScenarioResult {
    std::vector<ScenarioCell> table; // tau-major, designs in input order
    std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> loss_curves;
};

/**
 * Monte-Carlo comparison of named n-point designs.  Every replicate draws
 * Y_i ~ Normal(truth(x_i), (sigma_y_scale * sigma(x_i))^2) at the design
 * points, fits each requested quantile with the fit basis, and scores the
 * fitted curve by root mean squared error against the true tau-quantile
 * curve truth(x) + z_tau * sigma_Y(x) on a uniform evaluation grid.  Fit
 * failures are recorded and skipped.  The RNG stream is derived per
 * (replicate, design), so results do not depend on evaluation order.
 */
inline ScenarioResult run_scenario(
    const ScenarioConfig& config, const DesignSpace& space,
    const std::vector<std::pair<std::string, std::vector<double>>>& designs) {
    if (designs.empty()) throw InvalidArgument("run_scenario: no designs given");
    if (config.replications < 1)
        throw InvalidArgument("run_scenario: replications must be positive");
    if (config.taus.empty()) throw InvalidArgument("run_scenario: no quantile levels");
    for (double tau : config.taus)
        if (!(tau > 0.0 && tau < 1.0))
            throw InvalidArgument("run_scenario: tau must lie strictly in (0, 1)");

    const FixedSigma sigma = sigma_preset(config.sigma_preset, space);
    // The preset profile rescaled by the same normalization constant as
    // `sigma`, so it can be evaluated off the space grid.
    const auto profile = sigma_preset_profile(config.sigma_preset);
    const double norm_ratio = sigma.at(0) / profile(space.points().front());
    const auto sigma_y = [&](double x) {
        return config.sigma_y_scale * profile(x) * norm_ratio;
    };
    const auto truth = [&](double x) {
        const Vector f = config.truth_basis.eval(x);
        double v = 0.0;
        for (Eigen::Index j = 0; j < f.size(); ++j)
            v += f[j] * config.truth_coefficients[j];
        return v;
    };

    // Evaluation grid and reference quantile curves.
    const std::size_t g = config.eval_grid_size;
    std::vector<double> grid(g);
    for (std::size_t i = 0; i < g; ++i)
        grid[i] = space.lower() +
                  (space.upper() - space.lower()) * static_cast<double>(i) /
                      static_cast<double>(g - 1);
    std::vector<std::vector<double>> reference(config.taus.size(), std::vector<double>(g));
    for (std::size_t t = 0; t < config.taus.size(); ++t) {
        const double z = inverse_normal_cdf(config.taus[t]);
        for (std::size_t i = 0; i < g; ++i)
            reference[t][i] = truth(grid[i]) + z * sigma_y(grid[i]);
    }
    Matrix grid_f(static_cast<Eigen::Index>(g),
                  static_cast<Eigen::Index>(config.fit_basis.dim()));
    for (std::size_t i = 0; i < g; ++i)
        grid_f.row(static_cast<Eigen::Index>(i)) =
            config.fit_basis.eval(grid[i]).transpose();

    struct Accum {
        double sum = 0.0, sum_sq = 0.0;
        int count = 0, failed = 0;
    };
    std::vector<std::vector<Accum>> accum(config.taus.size(),
                                          std::vector<Accum>(designs.size()));

    for (int rep = 0; rep < config.replications; ++rep) {
        for (std::size_t d = 0; d < designs.size(); ++d) {
            const auto& xs = designs[d].second;
            Rng rng = make_rng(config.rng_seed, static_cast<std::uint64_t>(rep), d);
            std::normal_distribution<double> gauss(0.0, 1.0);
            Vector y(static_cast<Eigen::Index>(xs.size()));
            Matrix f(static_cast<Eigen::Index>(xs.size()),
                     static_cast<Eigen::Index>(config.fit_basis.dim()));
            for (std::size_t i = 0; i < xs.size(); ++i) {
                y[static_cast<Eigen::Index>(i)] =
                    truth(xs[i]) + sigma_y(xs[i]) * gauss(rng);
                f.row(static_cast<Eigen::Index>(i)) =
                    config.fit_basis.eval(xs[i]).transpose();
            }
            for (std::size_t t = 0; t < config.taus.size(); ++t) {
                try {
                    const QuantileFit fit = fit_quantile(f, y, config.taus[t]);
                    const Vector pred = grid_f * fit.theta_hat;
                    double sq = 0.0;
                    for (std::size_t i = 0; i < g; ++i) {
                        const double e = pred[static_cast<Eigen::Index>(i)] - reference[t][i];
                        sq += e * e;
                    }
                    const double rmse = std::sqrt(sq / static_cast<double>(g));
                    accum[t][d].sum += rmse;
                    accum[t][d].sum_sq += rmse * rmse;
                    accum[t][d].count += 1;
                } catch (const Error&) {
                    accum[t][d].failed += 1;
                }
            }
        }
    }

    ScenarioResult result;
    for (std::size_t t = 0; t < config.taus.size(); ++t) {
        for (std::size_t d = 0; d < designs.size(); ++d) {
            const Accum& a = accum[t][d];
            ScenarioCell cell;
            cell.tau = config.taus[t];
            cell.design = designs[d].first;
            cell.n_failed = a.failed;
            if (a.count > 0) {
                cell.rmse_mean = a.sum / a.count;
                if (a.count > 1) {
                    const double var =
                        (a.sum_sq - a.sum * a.sum / a.count) / (a.count - 1);
                    cell.rmse_se = std::sqrt(std::max(var, 0.0) / a.count);
                }
            }
            result.table.push_back(std::move(cell));
        }
    }

    // Loss curves of the empirical design measures under the scenario
    // sigma profile.
    std::vector<double> nu_grid;
    for (int i = 0; i <= 20; ++i) nu_grid.push_back(i / 20.0);
    const auto& pts = space.points();
    for (const auto& [name, xs] : designs) {
        std::vector<double> w(space.size(), 0.0);
        bool on_grid = true;
        for (double x : xs) {
            const auto it = std::lower_bound(pts.begin(), pts.end(), x - 1e-9);
            if (it == pts.end() || std::abs(*it - x) > 1e-9) {
                on_grid = false;
                break;
            }
            w[static_cast<std::size_t>(it - pts.begin())] += 1.0 / xs.size();
        }
        if (!on_grid) continue;
        const DesignMeasure empirical = DesignMeasure::discrete(space, std::move(w));
        try {
            result.loss_curves.emplace_back(
                name, mse_vs_nu_curve(empirical, config.fit_basis, sigma, nu_grid));
        } catch (const Error&) {
            // Rank-deficient empirical designs simply have no curve.
        }
    }
    return result;
}

} // namespace qrdesign

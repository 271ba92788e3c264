#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/basis.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/nelder_mead.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"

namespace qrdesign {

/**
 * Design with weights (or density) proportional to sigma.  This design
 * attains the lower bound of the worst-case bias term: 1/N for discrete
 * spaces with full support, 1 for continuous spaces.
 */
inline DesignMeasure minbias_design(const FixedSigma& sigma) {
    return DesignMeasure::normalized(sigma.space(), sigma.values());
}

/** Uniform design: equal weights (discrete) or constant density (continuous). */
inline DesignMeasure uniform_design(const DesignSpace& space) {
    if (space.kind() == SpaceKind::Discrete) {
        const double w = 1.0 / static_cast<double>(space.size());
        return DesignMeasure::discrete(space, std::vector<double>(space.size(), w));
    }
    const double d = 1.0 / space.length();
    return DesignMeasure::continuous(space, std::vector<double>(space.size(), d));
}

/** Options shared by the variational (derivative-free) design solvers. */
struct VariationalOptions {
    std::uint64_t seed = 1729;
    int n_random_starts = 20;
    double radius = 50.0;
    NelderMeadOptions nm = {.max_iterations = 4000,
                            .f_tolerance = 1e-12,
                            .x_tolerance = 1e-8,
                            .initial_step = 0.5};
};

/**
 * Which of the two candidate largest-eigenvalue expressions was active at
 * the straight-line solution: VarianceBranch when the intercept-component
 * term omega1/kappa1^2 dominates, BiasBranch when the slope-component term
 * gamma0*omega2/kappa2^2 dominates and the mirrored objective was solved.
 */
enum class Branch { VarianceBranch, BiasBranch };

inline const char* to_string(Branch b) {
    return b == Branch::VarianceBranch ? "variance" : "bias";
}

/**
 * Multipliers and scalar moments characterizing the straight-line optimal
 * design through the weight form
 *   zeta_i = [ (1 + lambda1 x_i^2) + sigma_i (lambda2 + lambda3 x_i^2) ]^+ ,
 * normalized so that sum_i sigma_i zeta_i = 1, with xi_i = sigma_i zeta_i.
 */
struct StraightLineMultipliers {
    Vector lambda;   // 3 multipliers of the active-constraint representation
    Branch branch = Branch::VarianceBranch;
    double gamma0 = 0.0; // mean of x^2 over the whole space
    double gamma1 = 0.0; // sum of x^2 sigma zeta  (= second moment of xi)
    double kappa1 = 0.0; // sum of zeta
    double kappa2 = 0.0; // sum of x^2 zeta
    double omega1 = 0.0; // sum of zeta^2
    double omega2 = 0.0; // sum of x^2 zeta^2
};

struct StraightLineSolution {
    DesignMeasure design;
    StraightLineMultipliers multipliers;
    LossReport report;
};

namespace detail {

struct StraightLineWork {
    const std::vector<double>& xs;
    const std::vector<double>& sig;
    double gamma0;

    struct Moments {
        std::vector<double> zeta;
        double kappa1, kappa2, gamma1, omega1, omega2;
    };

    std::optional<Moments> eval(const Vector& lambda) const {
        const std::size_t n = xs.size();
        Moments m;
        m.zeta.resize(n);
        double denom = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double x2 = xs[i] * xs[i];
            const double t =
                (1.0 + lambda[0] * x2) + sig[i] * (lambda[1] + lambda[2] * x2);
            m.zeta[i] = std::max(t, 0.0);
            denom += sig[i] * m.zeta[i];
        }
        if (!(denom > 1e-12) || !std::isfinite(denom)) return std::nullopt;
        m.kappa1 = m.kappa2 = m.gamma1 = m.omega1 = m.omega2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            m.zeta[i] /= denom;
            const double z = m.zeta[i];
            const double x2 = xs[i] * xs[i];
            m.kappa1 += z;
            m.kappa2 += x2 * z;
            m.gamma1 += x2 * sig[i] * z;
            m.omega1 += z * z;
            m.omega2 += x2 * z * z;
        }
        if (!(m.kappa1 > 1e-12) || !(m.kappa2 > 1e-12)) return std::nullopt;
        return m;
    }

    double variance_part(const Moments& m) const {
        return 1.0 / (m.kappa1 * m.kappa1) +
               gamma0 * m.gamma1 / (m.kappa2 * m.kappa2);
    }
    double intercept_bias(const Moments& m) const {
        return m.omega1 / (m.kappa1 * m.kappa1);
    }
    double slope_bias(const Moments& m) const {
        return gamma0 * m.omega2 / (m.kappa2 * m.kappa2);
    }
};

} // namespace detail

/**
 * Minimax straight-line design on a symmetric discrete space with a known
 * symmetric sigma profile.
 *
 * The weights have the three-multiplier positive-part form above; the
 * multipliers are found by derivative-free multi-start minimization of
 *   (1 - nu) * { 1/kappa1^2 + gamma0 gamma1 / kappa2^2 } + nu * omega1/kappa1^2,
 * which presumes the intercept bias term dominates the slope bias term;
 * that inequality is certified at the optimum.  If it fails, the mirrored
 * objective (with gamma0 omega2/kappa2^2 in the bias slot) is solved and
 * the reverse inequality certified.  If both certifications fail the
 * problem falls outside this closed-form family and BranchCheckFailed is
 * thrown: callers should fall back to the search-based solvers.
 */
inline StraightLineSolution solve_straight_line_discrete(
    const DesignSpace& space, const FixedSigma& sigma, const LossConfig& config,
    const VariationalOptions& options = {}) {
    config.validate();
    if (space.kind() != SpaceKind::Discrete)
        throw InvalidArgument("solve_straight_line_discrete: space must be discrete");
    if (!space.is_symmetric())
        throw InvalidArgument("solve_straight_line_discrete: space must be symmetric");
    if (!(sigma.space() == space))
        throw InvalidArgument("solve_straight_line_discrete: sigma lives on another space");
    if (!sigma.is_symmetric())
        throw InvalidArgument("solve_straight_line_discrete: sigma must be symmetric");

    const auto& xs = space.points();
    double gamma0 = 0.0;
    for (double x : xs) gamma0 += x * x;
    gamma0 /= static_cast<double>(xs.size());
    if (!(gamma0 > 0.0))
        throw InvalidArgument("solve_straight_line_discrete: degenerate abscissae");

    const detail::StraightLineWork work{xs, sigma.values(), gamma0};
    const double nu = config.nu;
    const auto objective = [&](bool intercept_branch) {
        return [&work, nu, intercept_branch](const Vector& lambda) {
            const auto m = work.eval(lambda);
            if (!m) return std::numeric_limits<double>::infinity();
            const double bias =
                intercept_branch ? work.intercept_bias(*m) : work.slope_bias(*m);
            return (1.0 - nu) * work.variance_part(*m) + nu * bias;
        };
    };

    MultistartOptions ms;
    ms.seed = options.seed;
    ms.n_random_starts = options.n_random_starts;
    ms.radius = options.radius;
    ms.local = options.nm;
    const std::vector<Vector> fixed_starts = {Vector::Zero(3)};

    const auto certify = [&](const detail::StraightLineWork::Moments& m,
                             bool intercept_branch) {
        const double lhs = work.intercept_bias(m);
        const double rhs = work.slope_bias(m);
        const double slack = 1e-9 * (1.0 + std::max(std::abs(lhs), std::abs(rhs)));
        return intercept_branch ? lhs >= rhs - slack : rhs >= lhs - slack;
    };

    Vector lambda;
    std::optional<detail::StraightLineWork::Moments> moments;
    Branch branch = Branch::VarianceBranch;

    const auto ms1 = multistart_minimize(objective(true), 3, fixed_starts, ms);
    const auto m1 = work.eval(ms1.best.x);
    if (m1 && certify(*m1, true)) {
        lambda = ms1.best.x;
        moments = m1;
        branch = Branch::VarianceBranch;
    } else {
        const auto ms2 = multistart_minimize(objective(false), 3, fixed_starts, ms);
        const auto m2 = work.eval(ms2.best.x);
        if (m2 && certify(*m2, false)) {
            lambda = ms2.best.x;
            moments = m2;
            branch = Branch::BiasBranch;
        } else {
            throw BranchCheckFailed(
                "solve_straight_line_discrete: neither bias-term ordering could be "
                "certified at its optimum; use the search-based solvers instead");
        }
    }

    std::vector<double> xi(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xi[i] = sigma.at(i) * moments->zeta[i];
    DesignMeasure design = DesignMeasure::normalized(space, std::move(xi));

    StraightLineMultipliers mult;
    mult.lambda = lambda;
    mult.branch = branch;
    mult.gamma0 = gamma0;
    mult.gamma1 = moments->gamma1;
    mult.kappa1 = moments->kappa1;
    mult.kappa2 = moments->kappa2;
    mult.omega1 = moments->omega1;
    mult.omega2 = moments->omega2;

    LossReport report = loss_fixed_sigma(design, Basis::polynomial(1), sigma, config);
    return {std::move(design), std::move(mult), std::move(report)};
}

/**
 * Scalar moments and derived coefficients for quadratic regression on a
 * symmetric interval: mu_i integrates x^i against the density m, kappa_i
 * against m/sigma, and omega_i against (m/sigma)^2.  rho0 is the variance
 * term tr(A T0); rho1 and rho2 are the two candidate largest eigenvalues
 * of A T2 (the decoupled odd-coefficient root and the larger root of the
 * even-coefficient 2x2 block).
 */
struct QuadraticMomentSet {
    double mu2 = 0, mu4 = 0;
    double kappa0 = 0, kappa2 = 0, kappa4 = 0;
    double omega0 = 0, omega2 = 0, omega4 = 0;
    double pi_factor = 0; // 2 / (kappa0 kappa4 - kappa2^2)^2
    double phi002 = 0;    // 2 / (3 kappa2^2) — the decoupled middle entry
    double phi110 = 0, phi112 = 0, phi114 = 0;
    double phi120 = 0, phi122 = 0, phi124 = 0;
    double phi210 = 0, phi212 = 0, phi214 = 0;
    double phi220 = 0, phi222 = 0, phi224 = 0;
    double psi11 = 0, psi12 = 0, psi21 = 0, psi22 = 0;
    double rho0 = 0, rho1 = 0, rho2 = 0;
};

namespace detail {

/** Core of quadratic_moments on raw arrays (used by the solver hot loop). */
inline QuadraticMomentSet quadratic_moments_raw(const std::vector<double>& xs,
                                                const std::vector<double>& quad_w,
                                                const std::vector<double>& density,
                                                const std::vector<double>& sig) {
    QuadraticMomentSet q;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double x2 = xs[i] * xs[i];
        const double x4 = x2 * x2;
        const double wm = quad_w[i] * density[i];
        const double ratio = density[i] / sig[i];
        const double wk = quad_w[i] * ratio;
        const double wo = quad_w[i] * ratio * ratio;
        q.mu2 += wm * x2;
        q.mu4 += wm * x4;
        q.kappa0 += wk;
        q.kappa2 += wk * x2;
        q.kappa4 += wk * x4;
        q.omega0 += wo;
        q.omega2 += wo * x2;
        q.omega4 += wo * x4;
    }

    const double disc = q.kappa0 * q.kappa4 - q.kappa2 * q.kappa2;
    if (!(disc > 1e-12 * (q.kappa0 * q.kappa4 + q.kappa2 * q.kappa2)) ||
        !(q.kappa2 > 0.0))
        throw DegeneratePencil("quadratic_moments: kappa moment matrix is degenerate");
    const double pi = 2.0 / (disc * disc);
    q.pi_factor = pi;
    q.phi002 = 2.0 / (3.0 * q.kappa2 * q.kappa2);

    const double k0 = q.kappa0, k2 = q.kappa2, k4 = q.kappa4;
    q.phi110 = pi * (k4 * k4 - k4 * k2 / 3.0);
    q.phi112 = pi * ((k4 * k0 + k2 * k2) / 3.0 - 2.0 * k4 * k2);
    q.phi114 = pi * (k2 * k2 - k2 * k0 / 3.0);
    q.phi120 = pi * (k2 * k2 / 3.0 - k4 * k2);
    q.phi122 = pi * (k4 * k0 + k2 * k2 - 2.0 * k2 * k0 / 3.0);
    q.phi124 = pi * (k0 * k0 / 3.0 - k2 * k0);
    q.phi210 = pi * (k4 * k4 / 3.0 - k4 * k2 / 5.0);
    q.phi212 = pi * ((k4 * k0 + k2 * k2) / 5.0 - 2.0 * k4 * k2 / 3.0);
    q.phi214 = pi * (k2 * k2 / 3.0 - k2 * k0 / 5.0);
    q.phi220 = pi * (k2 * k2 / 5.0 - k4 * k2 / 3.0);
    q.phi222 = pi * ((k4 * k0 + k2 * k2) / 3.0 - 2.0 * k2 * k0 / 5.0);
    q.phi224 = pi * (k0 * k0 / 5.0 - k2 * k0 / 3.0);

    q.psi11 = q.phi110 * q.omega0 + q.phi112 * q.omega2 + q.phi114 * q.omega4;
    q.psi12 = q.phi120 * q.omega0 + q.phi122 * q.omega2 + q.phi124 * q.omega4;
    q.psi21 = q.phi210 * q.omega0 + q.phi212 * q.omega2 + q.phi214 * q.omega4;
    q.psi22 = q.phi220 * q.omega0 + q.phi222 * q.omega2 + q.phi224 * q.omega4;

    q.rho0 = (q.phi110 + q.phi220) + (q.phi002 + q.phi112 + q.phi222) * q.mu2 +
             (q.phi114 + q.phi224) * q.mu4;
    q.rho1 = q.phi002 * q.omega2;
    const double mid = 0.5 * (q.psi11 + q.psi22);
    const double half_diff = 0.5 * (q.psi11 - q.psi22);
    q.rho2 = mid + std::sqrt(std::max(half_diff * half_diff + q.psi12 * q.psi21, 0.0));
    return q;
}

} // namespace detail

/**
 * Moment set of a continuous design density under a fixed sigma profile on
 * a symmetric interval.  Throws DegeneratePencil when the even-moment
 * matrix of m/sigma is numerically singular (bad input density).
 */
inline QuadraticMomentSet quadratic_moments(const DesignMeasure& m, const FixedSigma& sigma) {
    if (m.kind() != SpaceKind::Continuous)
        throw InvalidArgument("quadratic_moments: measure must be continuous");
    if (!(sigma.space() == m.space()))
        throw InvalidArgument("quadratic_moments: sigma lives on another space");
    if (!m.space().is_symmetric())
        throw InvalidArgument("quadratic_moments: space must be symmetric");
    if (!sigma.is_symmetric())
        throw InvalidArgument("quadratic_moments: sigma must be symmetric");
    return detail::quadratic_moments_raw(m.space().points(), m.space().quad_weights(),
                                         m.values(), sigma.values());
}

/**
 * Parameters of the rational-quadratic density family
 *   m(x; a) = [ (q1(x) + q2(x)/sigma(x)) / (a00/sigma(x) + q3(x)/sigma(x)^2) ]^+
 * with q_j(x) = a0j + a2j x^2 + a4j x^4, stored in the order
 *   {a00, a01, a21, a41, a02, a22, a42, a03, a23, a43}.
 * normalization_mode records the pinning used to remove the family's scale
 * redundancies: "heteroscedastic" pins a01 = 1; "homoscedastic" (constant
 * sigma) pins a02 = 1 with a00 = 0 and q1 = 0.
 */
struct DensityFamilyParams {
    std::array<double, 10> a = {};
    std::string normalization_mode;
};

struct QuadraticSolution {
    DesignMeasure design;
    DensityFamilyParams params;
    LossReport report;
};

namespace detail {

struct QuadraticFamily {
    const std::vector<double>& xs;
    const std::vector<double>& quad_w;
    const std::vector<double>& sig;
    bool homoscedastic;

    int n_free() const { return homoscedastic ? 5 : 9; }

    /** Expand the free optimization vector into the full 10-parameter set. */
    std::array<double, 10> expand(const Vector& v) const {
        std::array<double, 10> a = {};
        if (homoscedastic) {
            // {a00=0, q1=0, a02=1, a22, a42, a03, a23, a43}
            a[4] = 1.0;
            a[5] = v[0];
            a[6] = v[1];
            a[7] = v[2];
            a[8] = v[3];
            a[9] = v[4];
        } else {
            // {a00, a01=1, a21, a41, a02, a22, a42, a03, a23, a43}
            a[0] = v[0];
            a[1] = 1.0;
            a[2] = v[1];
            a[3] = v[2];
            a[4] = v[3];
            a[5] = v[4];
            a[6] = v[5];
            a[7] = v[6];
            a[8] = v[7];
            a[9] = v[8];
        }
        return a;
    }

    /** Unnormalized positive-part density; empty when non-finite anywhere. */
    bool density(const std::array<double, 10>& a, std::vector<double>& out) const {
        out.resize(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double x2 = xs[i] * xs[i];
            const double x4 = x2 * x2;
            const double q1 = a[1] + a[2] * x2 + a[3] * x4;
            const double q2 = a[4] + a[5] * x2 + a[6] * x4;
            const double q3 = a[7] + a[8] * x2 + a[9] * x4;
            const double s = sig[i];
            const double num = q1 + q2 / s;
            const double den = a[0] / s + q3 / (s * s);
            const double ratio = num / den;
            if (!std::isfinite(ratio)) return false;
            out[i] = std::max(ratio, 0.0);
        }
        return true;
    }

    double integral(const std::vector<double>& density) const {
        double total = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) total += quad_w[i] * density[i];
        return total;
    }
};

} // namespace detail

/**
 * Minimax quadratic-regression design density on a symmetric interval.
 *
 * Minimizes (1 - nu) rho0 + nu * max(rho1, rho2) over the ten-parameter
 * rational family, via two constrained searches: one with rho1 treated as
 * the active largest eigenvalue (penalized when rho2 exceeds it) and one
 * with rho2 active.  The returned solution is the feasible branch with the
 * smaller loss; its active root equals max(rho1, rho2) by construction.
 * The reported parameters have the numerator coefficients rescaled so the
 * positive part integrates to one, which stays inside the family.
 */
inline QuadraticSolution solve_quadratic_continuous(const FixedSigma& sigma,
                                                    const LossConfig& config,
                                                    const VariationalOptions& options = {}) {
    config.validate();
    const DesignSpace& space = sigma.space();
    if (space.kind() != SpaceKind::Continuous)
        throw InvalidArgument("solve_quadratic_continuous: sigma must live on a continuous space");
    if (!space.is_symmetric())
        throw InvalidArgument("solve_quadratic_continuous: space must be symmetric");
    if (!sigma.is_symmetric())
        throw InvalidArgument("solve_quadratic_continuous: sigma must be symmetric");

    const auto& sig = sigma.values();
    const double sig_range =
        *std::max_element(sig.begin(), sig.end()) - *std::min_element(sig.begin(), sig.end());
    const bool homoscedastic = sig_range <= 1e-10;

    const std::vector<double> quad_w = space.quad_weights();
    const detail::QuadraticFamily family{space.points(), quad_w, sig, homoscedastic};
    const double nu = config.nu;
    constexpr double kPenalty = 100.0;

    struct BranchEval {
        double loss = std::numeric_limits<double>::infinity();
        double rho1 = 0.0, rho2 = 0.0;
        bool valid = false;
    };
    const auto evaluate = [&](const Vector& v, bool rho1_active,
                              std::vector<double>& buf) -> BranchEval {
        BranchEval e;
        if (!family.density(family.expand(v), buf)) return e;
        const double total = family.integral(buf);
        if (!(total > 1e-12) || !std::isfinite(total)) return e;
        for (double& d : buf) d /= total;
        QuadraticMomentSet q;
        try {
            q = detail::quadratic_moments_raw(space.points(), quad_w, buf, sig);
        } catch (const DegeneratePencil&) {
            return e;
        }
        e.rho1 = q.rho1;
        e.rho2 = q.rho2;
        e.valid = true;
        const double own = rho1_active ? q.rho1 : q.rho2;
        const double other = rho1_active ? q.rho2 : q.rho1;
        e.loss = (1.0 - nu) * q.rho0 + nu * own + kPenalty * std::max(other - own, 0.0);
        return e;
    };

    // Structured starts: the sigma-proportional member of the family, and a
    // flat-denominator member.
    std::vector<Vector> starts;
    if (homoscedastic) {
        Vector s0 = Vector::Zero(5);
        s0[2] = 1.0; // q3 = 1 -> m proportional to sigma (constant here)
        starts.push_back(s0);
    } else {
        Vector s0 = Vector::Zero(9);
        s0[0] = 1.0; // a00 = 1, q1 = 1 -> m proportional to sigma
        starts.push_back(s0);
        Vector s1 = Vector::Zero(9);
        s1[0] = 1.0;
        s1[3] = 1.0; // add q2 = 1
        starts.push_back(s1);
    }

    MultistartOptions ms;
    ms.seed = options.seed;
    ms.n_random_starts = options.n_random_starts;
    ms.radius = options.radius;
    ms.local = options.nm;

    struct BranchResult {
        Vector v;
        BranchEval eval;
        bool feasible = false;
    };
    const auto solve_branch = [&](bool rho1_active) -> BranchResult {
        std::vector<double> shared_buf; // each NM call is sequential per start
        const auto obj = [&, rho1_active](const Vector& v) {
            thread_local std::vector<double> buf;
            return evaluate(v, rho1_active, buf).loss;
        };
        auto result = multistart_minimize(obj, family.n_free(), starts, ms);
        // Polish the winner once more from its own solution.
        NelderMeadOptions polish = options.nm;
        polish.initial_step = 0.05;
        auto refined = nelder_mead(obj, result.best.x, polish);
        const Vector v = refined.value < result.best.value ? refined.x : result.best.x;
        BranchResult br;
        br.v = v;
        br.eval = evaluate(v, rho1_active, shared_buf);
        if (br.eval.valid) {
            const double own = rho1_active ? br.eval.rho1 : br.eval.rho2;
            const double other = rho1_active ? br.eval.rho2 : br.eval.rho1;
            const double slack = 1e-8 * (1.0 + std::abs(own));
            br.feasible = other <= own + slack;
        }
        return br;
    };

    const BranchResult b1 = solve_branch(true);
    const BranchResult b2 = solve_branch(false);
    const BranchResult* chosen = nullptr;
    if (b1.feasible && b2.feasible)
        chosen = b1.eval.loss <= b2.eval.loss ? &b1 : &b2;
    else if (b1.feasible)
        chosen = &b1;
    else if (b2.feasible)
        chosen = &b2;
    else
        throw OptimizerStalled(
            "solve_quadratic_continuous: neither eigenvalue branch produced a "
            "solution consistent with its own active root");

    std::array<double, 10> a = family.expand(chosen->v);
    std::vector<double> density;
    if (!family.density(a, density))
        throw NonDensityResult("solve_quadratic_continuous: non-finite density");
    const double total = family.integral(density);
    if (!(total > 1e-12))
        throw NonDensityResult(
            "solve_quadratic_continuous: returned density integrates to zero");
    // Rescale the numerator coefficients so the positive part integrates
    // to one; this keeps the parameters inside the family.
    for (int j = 1; j <= 6; ++j) a[j] /= total;
    for (double& d : density) d /= total;

    DesignMeasure design = DesignMeasure::continuous(space, std::move(density));
    DensityFamilyParams params;
    params.a = a;
    params.normalization_mode = homoscedastic ? "homoscedastic" : "heteroscedastic";
    LossReport report = loss_fixed_sigma(design, Basis::polynomial(2), sigma, config);
    return {std::move(design), std::move(params), std::move(report)};
}

} // namespace qrdesign

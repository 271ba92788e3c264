#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/parallel.hpp"
#include "qrdesign/rng.hpp"

namespace qrdesign {

/**
 * Controls for the derivative-free simplex minimizer.
 *
 * Convergence requires both the function spread over the simplex and the
 * simplex diameter to fall below their tolerances.  Objectives may return
 * +infinity to mark infeasible points.
 */
struct NelderMeadOptions {
    int max_iterations = 4000;
    double f_tolerance = 1e-12;
    double x_tolerance = 1e-9;
    double initial_step = 0.5;
};

struct NelderMeadResult {
    Vector x;
    double value = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

/**
 * Classic Nelder-Mead simplex minimization (reflection 1, expansion 2,
 * contraction 1/2, shrink 1/2) from a single start point.
 */
template <class F>
NelderMeadResult nelder_mead(F&& objective, const Vector& start,
                             const NelderMeadOptions& options = {}) {
    const int dim = static_cast<int>(start.size());
    if (dim < 1) throw InvalidArgument("nelder_mead: dimension must be >= 1");

    std::vector<Vector> xs(dim + 1, start);
    std::vector<double> fs(dim + 1);
    for (int j = 1; j <= dim; ++j) xs[j][j - 1] += options.initial_step;
    for (int j = 0; j <= dim; ++j) fs[j] = objective(xs[j]);

    std::vector<int> order(dim + 1);
    NelderMeadResult result;
    for (result.iterations = 0; result.iterations < options.max_iterations;
         ++result.iterations) {
        for (int j = 0; j <= dim; ++j) order[j] = j;
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = order[0], worst = order[dim], second = order[dim - 1];

        double diameter = 0.0;
        for (int j = 1; j <= dim; ++j)
            diameter = std::max(diameter, (xs[order[j]] - xs[best]).cwiseAbs().maxCoeff());
        const double spread = fs[worst] - fs[best];
        if (std::isfinite(fs[best]) && spread <= options.f_tolerance &&
            diameter <= options.x_tolerance) {
            result.converged = true;
            break;
        }

        Vector centroid = Vector::Zero(dim);
        for (int j = 0; j <= dim; ++j)
            if (j != worst) centroid += xs[j];
        centroid /= static_cast<double>(dim);

        const Vector reflected = centroid + (centroid - xs[worst]);
        const double f_reflected = objective(reflected);
        if (f_reflected < fs[best]) {
            const Vector expanded = centroid + 2.0 * (centroid - xs[worst]);
            const double f_expanded = objective(expanded);
            if (f_expanded < f_reflected) {
                xs[worst] = expanded;
                fs[worst] = f_expanded;
            } else {
                xs[worst] = reflected;
                fs[worst] = f_reflected;
            }
            continue;
        }
        if (f_reflected < fs[second]) {
            xs[worst] = reflected;
            fs[worst] = f_reflected;
            continue;
        }
        const bool outside = f_reflected < fs[worst];
        const Vector contracted =
            outside ? centroid + 0.5 * (reflected - centroid)
                    : centroid + 0.5 * (xs[worst] - centroid);
        const double f_contracted = objective(contracted);
        if (f_contracted < std::min(f_reflected, fs[worst])) {
            xs[worst] = contracted;
            fs[worst] = f_contracted;
            continue;
        }
        for (int j = 0; j <= dim; ++j) {
            if (j == best) continue;
            xs[j] = xs[best] + 0.5 * (xs[j] - xs[best]);
            fs[j] = objective(xs[j]);
        }
    }

    int best = 0;
    for (int j = 1; j <= dim; ++j)
        if (fs[j] < fs[best]) best = j;
    result.x = xs[best];
    result.value = fs[best];
    return result;
}

/**
 * Controls for multi-start minimization: the listed start points are run
 * first, then n_random_starts points drawn coordinate-wise uniformly from
 * [-radius, radius] using per-start streams of the seed.
 */
struct MultistartOptions {
    int n_random_starts = 20;
    double radius = 50.0;
    std::uint64_t seed = 1729;
    NelderMeadOptions local = {};
};

struct MultistartResult {
    NelderMeadResult best;
    int best_start = -1;
    int n_converged = 0;
};

/**
 * Minimize from several starts and keep the smallest local minimum; ties
 * resolve to the earliest start, so the result does not depend on the
 * thread count.  Throws OptimizerStalled when no start converged.
 */
template <class F>
MultistartResult multistart_minimize(F&& objective, int dim,
                                     const std::vector<Vector>& fixed_starts,
                                     const MultistartOptions& options = {}) {
    if (dim < 1) throw InvalidArgument("multistart_minimize: dimension must be >= 1");
    std::vector<Vector> starts = fixed_starts;
    for (int s = 0; s < options.n_random_starts; ++s) {
        Rng rng = make_rng(options.seed, static_cast<std::uint64_t>(s));
        std::uniform_real_distribution<double> u(-options.radius, options.radius);
        Vector x(dim);
        for (int j = 0; j < dim; ++j) x[j] = u(rng);
        starts.push_back(std::move(x));
    }
    if (starts.empty()) throw InvalidArgument("multistart_minimize: no start points");

    std::vector<NelderMeadResult> results(starts.size());
    parallel_for(starts.size(), [&](std::size_t s) {
        results[s] = nelder_mead(objective, starts[s], options.local);
    });

    MultistartResult out;
    for (std::size_t s = 0; s < results.size(); ++s) {
        if (results[s].converged) ++out.n_converged;
        const bool better =
            out.best_start < 0 || results[s].value < out.best.value;
        if (better && std::isfinite(results[s].value)) {
            out.best = results[s];
            out.best_start = static_cast<int>(s);
        }
    }
    if (out.best_start < 0 || out.n_converged == 0)
        throw OptimizerStalled("multistart_minimize: no start converged to a finite minimum");
    return out;
}

} // namespace qrdesign

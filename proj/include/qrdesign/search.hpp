#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/basis.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/moments.hpp"
#include "qrdesign/rng.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"

namespace qrdesign {

/**
 * Result of the compound variance/bias support search: the selected
 * support (indices into the space, sorted), the support size
 * k* = min(n, N), the loss of the uniform-on-support design, and — when
 * the requested run size n differs from k* — the per-support-point
 * replication counts summing to n.
 */
struct CompoundDesign {
    std::vector<std::size_t> support;
    std::size_t k_star = 0;
    LossReport loss;
    std::vector<int> replication;

    DesignMeasure measure(const DesignSpace& space) const {
        std::vector<double> w(space.size(), 0.0);
        const double v = 1.0 / static_cast<double>(support.size());
        for (std::size_t i : support) w[i] = v;
        return DesignMeasure::discrete(space, std::move(w));
    }
};

namespace detail {

/** Objective (1-nu) N tr(A A_S^{-1}) + nu chmax(A A_S^{-1}); +inf if singular. */
class CompoundObjective {
  public:
    CompoundObjective(const DesignSpace& space, const Basis& basis, double nu)
        : n_points_(space.size()),
          p_(basis.dim()),
          nu_(nu),
          f_(basis_matrix(space.points(), basis)) {
        Matrix a = (f_.transpose() * f_) / static_cast<double>(n_points_);
        a_sqrt_ = linalg::sym_sqrt(a);
        outers_.reserve(n_points_);
        for (std::size_t i = 0; i < n_points_; ++i) {
            const Vector row = f_.row(static_cast<Eigen::Index>(i)).transpose();
            outers_.push_back(row * row.transpose());
        }
    }

    std::size_t dim() const { return p_; }

    double operator()(const std::vector<std::size_t>& support) const {
        Matrix a_s = Matrix::Zero(static_cast<Eigen::Index>(p_), static_cast<Eigen::Index>(p_));
        for (std::size_t i : support) a_s += outers_[i];
        Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::sym(a_s));
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo > linalg::kConditionGuard)
            return std::numeric_limits<double>::infinity();
        const Matrix inv = es.eigenvectors() *
                           es.eigenvalues().cwiseInverse().asDiagonal() *
                           es.eigenvectors().transpose();
        const Matrix prod = a_sqrt_ * linalg::sym(inv) * a_sqrt_;
        const double trace = prod.trace();
        const double chmax = linalg::max_eigenvalue(linalg::sym(prod));
        return (1.0 - nu_) * static_cast<double>(n_points_) * trace + nu_ * chmax;
    }

  private:
    std::size_t n_points_;
    std::size_t p_;
    double nu_;
    Matrix f_;
    Matrix a_sqrt_;
    std::vector<Matrix> outers_;
};

/**
 * Deterministic seed support of size k: the k indices of largest |x|
 * (ties toward smaller x).  With `symmetric`, built as outermost mirror
 * pairs plus the center point when k is odd.
 */
inline std::vector<std::size_t> outermost_support(const DesignSpace& space, std::size_t k,
                                                  bool symmetric) {
    const auto& xs = space.points();
    const std::size_t n = xs.size();
    std::vector<std::size_t> chosen;
    if (symmetric) {
        std::optional<std::size_t> center;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(xs[i]) <= 1e-12 * (1.0 + std::abs(xs.back()))) center = i;
        if (k % 2 == 1) {
            if (!center)
                throw InvalidArgument(
                    "symmetric support of odd size needs a center point in the space");
            chosen.push_back(*center);
        }
        std::size_t lo = 0, hi = n - 1;
        while (chosen.size() < k) {
            chosen.push_back(lo);
            chosen.push_back(hi);
            ++lo;
            --hi;
        }
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = std::abs(xs[a]), db = std::abs(xs[b]);
            if (da != db) return da > db;
            return xs[a] < xs[b];
        });
        chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

} // namespace detail

/**
 * Exchange-improved support for the compound criterion
 *   (1 - nu) N tr(A A_S^{-1}) + nu chmax(A A_S^{-1})
 * over supports S of size k* = min(n, N), where A_S sums f f' over S.
 * The support is seeded with the outermost points and refined by
 * best-improvement swaps (pair swaps under `symmetric`) until no swap
 * lowers the objective.  For n > N the whole space is the support and the
 * run is completed by m = floor(n/N) replicates everywhere plus an
 * outermost-point pattern for the remaining t = n - mN observations.
 */
inline CompoundDesign exchange_compound(const DesignSpace& space, const Basis& basis,
                                        std::size_t n, double nu, bool symmetric = true) {
    if (space.kind() != SpaceKind::Discrete)
        throw InvalidArgument("exchange_compound: space must be discrete");
    if (!(nu >= 0.0 && nu <= 1.0))
        throw InvalidArgument("exchange_compound: nu must lie in [0, 1]");
    if (n == 0) throw InvalidArgument("exchange_compound: n must be positive");
    if (symmetric && !space.is_symmetric())
        throw InvalidArgument("exchange_compound: symmetric search needs a symmetric space");

    const std::size_t n_points = space.size();
    const std::size_t p = basis.dim();
    const std::size_t k_star = std::min(n, n_points);
    if (k_star < p)
        throw RankDeficientSupport("exchange_compound: support size " +
                                   std::to_string(k_star) + " is below basis dimension " +
                                   std::to_string(p));

    const detail::CompoundObjective objective(space, basis, nu);
    std::vector<std::size_t> support = detail::outermost_support(space, k_star, symmetric);
    double value = objective(support);
    if (!std::isfinite(value))
        throw RankDeficientSupport("exchange_compound: seed support is rank deficient");

    std::vector<char> in_support(n_points, 0);
    for (std::size_t i : support) in_support[i] = 1;
    const auto mirror = [&](std::size_t i) { return space.mirror_index(i); };

    const std::size_t max_sweeps = 4 * n_points + 16;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double best_value = value;
        std::vector<std::size_t> best_support;
        if (symmetric) {
            // Swap an in-support mirror pair for an out-of-support mirror
            // pair.  The self-mirrored center point is never an out
            // candidate: trading a genuine pair for it would shrink the
            // support by one.
            for (std::size_t out_i = 0; out_i < n_points; ++out_i) {
                if (in_support[out_i]) continue;
                const std::size_t out_j = mirror(out_i);
                if (out_j <= out_i || in_support[out_j]) continue;
                for (std::size_t in_i : support) {
                    const std::size_t in_j = mirror(in_i);
                    if (in_j < in_i || in_j == in_i) continue;
                    std::vector<std::size_t> cand = support;
                    for (std::size_t& s : cand) {
                        if (s == in_i) s = out_i;
                        if (s == in_j) s = out_j;
                    }
                    std::sort(cand.begin(), cand.end());
                    const double cv = objective(cand);
                    if (cv < best_value) {
                        best_value = cv;
                        best_support = std::move(cand);
                    }
                }
            }
        } else {
            for (std::size_t out_i = 0; out_i < n_points; ++out_i) {
                if (in_support[out_i]) continue;
                for (std::size_t in_i : support) {
                    std::vector<std::size_t> cand = support;
                    for (std::size_t& s : cand)
                        if (s == in_i) s = out_i;
                    std::sort(cand.begin(), cand.end());
                    const double cv = objective(cand);
                    if (cv < best_value) {
                        best_value = cv;
                        best_support = std::move(cand);
                    }
                }
            }
        }
        if (best_support.empty() || best_value >= value - 1e-12 * (1.0 + std::abs(value)))
            break;
        value = best_value;
        support = std::move(best_support);
        std::fill(in_support.begin(), in_support.end(), 0);
        for (std::size_t i : support) in_support[i] = 1;
    }

    CompoundDesign result;
    result.support = support;
    result.k_star = k_star;

    // Replication counts for the exact n-run design.
    result.replication.assign(support.size(), 1);
    if (n > n_points) {
        const int m = static_cast<int>(n / n_points);
        const std::size_t t = n - static_cast<std::size_t>(m) * n_points;
        result.replication.assign(support.size(), m);
        if (t > 0) {
            const auto extras = detail::outermost_support(space, t, symmetric);
            for (std::size_t e : extras) {
                const auto it = std::lower_bound(support.begin(), support.end(), e);
                result.replication[static_cast<std::size_t>(it - support.begin())] += 1;
            }
        }
    }

    // Loss of the uniform-on-support design (r-independent there; use r = 1).
    DesignMeasure uniform_support = result.measure(space);
    LossConfig config;
    config.nu = nu;
    result.loss = loss_sigma0_class(uniform_support, basis, 1.0, config);
    return result;
}

/**
 * Saturated design for a cubic B-spline basis on a discrete space: one
 * p-th of the mass at each basis function's peak, snapped to the nearest
 * space point (ties toward the smaller abscissa).  Collisions move to the
 * next-nearest unclaimed point; DuplicateSnap is thrown only when the
 * space has fewer points than basis functions.
 */
inline DesignMeasure saturated_design(const Basis& basis, const DesignSpace& space) {
    if (space.kind() != SpaceKind::Discrete)
        throw InvalidArgument("saturated_design: space must be discrete");
    if (basis.kind() != BasisKind::CubicBSpline)
        throw InvalidArgument("saturated_design: basis must be a cubic B-spline basis");
    const std::vector<double> peaks = spline_peak_locations(basis);
    const auto& xs = space.points();
    const std::size_t n = xs.size();
    if (n < peaks.size())
        throw DuplicateSnap("saturated_design: fewer space points than basis functions");

    std::vector<char> claimed(n, 0);
    std::vector<std::size_t> chosen;
    chosen.reserve(peaks.size());
    std::vector<std::size_t> order(n);
    for (double peak : peaks) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double da = std::abs(xs[a] - peak), db = std::abs(xs[b] - peak);
            if (da != db) return da < db;
            return xs[a] < xs[b];
        });
        bool placed = false;
        for (std::size_t idx : order) {
            if (!claimed[idx]) {
                claimed[idx] = 1;
                chosen.push_back(idx);
                placed = true;
                break;
            }
        }
        if (!placed) throw DuplicateSnap("saturated_design: could not place every peak");
    }

    std::vector<double> w(n, 0.0);
    const double v = 1.0 / static_cast<double>(peaks.size());
    for (std::size_t i : chosen) w[i] = v;
    return DesignMeasure::discrete(space, std::move(w));
}

/** Tuning knobs of the genetic minimax search. */
struct GAConfig {
    int population_size = 40;
    int n_seeded = 3;
    double elite_fraction = 0.10;
    double mutation_probability = 0.02;
    std::string crossover_rule = "sorted-one-point";
    int stall_limit = 1000;
    int max_generations = 0; // 0 = no cap beyond the stall rule
    std::uint64_t rng_seed = 1729;
};

/** Outcome of ga_minimax: implementable n-point design and search trace. */
struct GAResult {
    DesignMeasure design;
    LossReport report;
    std::vector<double> trace;              // best fitness after each generation
    std::vector<std::size_t> best_indices;  // sorted support multiset, size n
};

namespace detail {

/** Fitness of an index multiset = fixed-sigma loss of its empirical measure. */
class GAFitness {
  public:
    GAFitness(const DesignSpace& space, const Basis& basis, const FixedSigma& sigma,
              double nu)
        : nu_(nu), sigma_(sigma.values()) {
        const Matrix f = basis_matrix(space.points(), basis);
        p_ = static_cast<std::size_t>(f.cols());
        Matrix a = (f.transpose() * f) / static_cast<double>(space.size());
        a_sqrt_ = linalg::sym_sqrt(a);
        rows_.reserve(space.size());
        for (Eigen::Index i = 0; i < f.rows(); ++i)
            rows_.push_back(f.row(i).transpose());
    }

    /** `indices` must be sorted; multiplicity = repetition count. */
    double operator()(const std::vector<std::size_t>& indices) const {
        const auto pe = static_cast<Eigen::Index>(p_);
        Matrix t00 = Matrix::Zero(pe, pe), t01 = Matrix::Zero(pe, pe),
               t02 = Matrix::Zero(pe, pe);
        const double unit = 1.0 / static_cast<double>(indices.size());
        std::size_t i = 0;
        while (i < indices.size()) {
            std::size_t j = i;
            while (j < indices.size() && indices[j] == indices[i]) ++j;
            const double xi = static_cast<double>(j - i) * unit;
            const double w1 = xi / sigma_[indices[i]];
            const Matrix outer = rows_[indices[i]] * rows_[indices[i]].transpose();
            t00 += xi * outer;
            t01 += w1 * outer;
            t02 += (w1 * w1) * outer;
            i = j;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(linalg::sym(t01));
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        if (!(lo > 0.0) || hi / lo > linalg::kConditionGuard)
            return std::numeric_limits<double>::infinity();
        const Matrix inv = es.eigenvectors() *
                           es.eigenvalues().cwiseInverse().asDiagonal() *
                           es.eigenvectors().transpose();
        const Matrix t0 = linalg::sym(inv * t00 * inv);
        const Matrix t2 = linalg::sym(inv * t02 * inv);
        const double variance = (a_sqrt_ * t0 * a_sqrt_).trace();
        const double bias = linalg::max_eigenvalue(linalg::sym(a_sqrt_ * t2 * a_sqrt_));
        return (1.0 - nu_) * variance + nu_ * bias;
    }

  private:
    double nu_;
    std::vector<double> sigma_;
    std::size_t p_ = 0;
    Matrix a_sqrt_;
    std::vector<Vector> rows_;
};

} // namespace detail

/**
 * Default seed designs for ga_minimax as index multisets of size n:
 * the saturated design (spline bases; outermost-support compound seed
 * otherwise), the uniform design, and the minimum-bias design, each
 * converted to n runs by quantile implementation.
 */
inline std::vector<std::vector<std::size_t>> ga_default_seeds(const DesignSpace& space,
                                                              const Basis& basis,
                                                              const FixedSigma& sigma,
                                                              std::size_t n) {
    if (space.kind() != SpaceKind::Discrete)
        throw InvalidArgument("ga_default_seeds: space must be discrete");
    const auto& xs = space.points();
    const auto to_indices = [&](const DesignMeasure& m) {
        const std::vector<double> pts = implement_design(m, n);
        std::vector<std::size_t> idx(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto it = std::lower_bound(xs.begin(), xs.end(), pts[i] - 1e-12);
            idx[i] = static_cast<std::size_t>(it - xs.begin());
        }
        std::sort(idx.begin(), idx.end());
        return idx;
    };

    std::vector<std::vector<std::size_t>> seeds;
    if (basis.kind() == BasisKind::CubicBSpline) {
        seeds.push_back(to_indices(saturated_design(basis, space)));
    } else {
        const std::size_t k = std::min<std::size_t>(std::max<std::size_t>(basis.dim(), 1), n);
        auto sup = detail::outermost_support(space, std::min(k, space.size()),
                                             space.is_symmetric() && (k % 2 == 0 ||
                                                                      space.size() % 2 == 1));
        std::vector<double> w(space.size(), 0.0);
        for (std::size_t i : sup) w[i] = 1.0 / static_cast<double>(sup.size());
        seeds.push_back(to_indices(DesignMeasure::discrete(space, std::move(w))));
    }
    seeds.push_back(to_indices(uniform_design(space)));
    seeds.push_back(to_indices(minbias_design(sigma)));
    return seeds;
}

/**
 * Genetic minimax search over exact n-run designs encoded as sorted index
 * multisets.  Fitness is the fixed-sigma loss of the empirical measure.
 * Elites survive intact, parents are chosen by rank roulette, crossover
 * splices sorted parents at one cut, and mutation moves genes one grid
 * step.  Fully deterministic for a fixed config.rng_seed: every
 * (generation, individual) pair draws from its own derived RNG stream.
 */
inline GAResult ga_minimax(const DesignSpace& space, const Basis& basis,
                           const FixedSigma& sigma, double nu, std::size_t n,
                           const std::vector<std::vector<std::size_t>>& seeds,
                           const GAConfig& config = {}) {
    if (space.kind() != SpaceKind::Discrete)
        throw InvalidArgument("ga_minimax: space must be discrete");
    if (!(sigma.space() == space))
        throw InvalidArgument("ga_minimax: sigma lives on another space");
    if (!(nu >= 0.0 && nu <= 1.0))
        throw InvalidArgument("ga_minimax: nu must lie in [0, 1]");
    if (n == 0) throw InvalidArgument("ga_minimax: n must be positive");
    if (config.n_seeded < 0 ||
        seeds.size() != static_cast<std::size_t>(config.n_seeded))
        throw InvalidArgument("ga_minimax: seeds must match config.n_seeded");
    if (config.population_size < 2 ||
        static_cast<std::size_t>(config.population_size) <= seeds.size())
        throw InvalidArgument("ga_minimax: population must exceed the number of seeds");
    if (config.crossover_rule != "sorted-one-point")
        throw InvalidArgument("ga_minimax: unknown crossover_rule '" +
                              config.crossover_rule + "'");
    if (!(config.elite_fraction > 0.0 && config.elite_fraction < 1.0))
        throw InvalidArgument("ga_minimax: elite_fraction must lie in (0, 1)");
    if (!(config.mutation_probability >= 0.0 && config.mutation_probability <= 1.0))
        throw InvalidArgument("ga_minimax: mutation_probability must lie in [0, 1]");
    if (config.stall_limit < 1)
        throw InvalidArgument("ga_minimax: stall_limit must be positive");
    const std::size_t n_points = space.size();
    for (const auto& s : seeds) {
        if (s.size() != n)
            throw InvalidArgument("ga_minimax: every seed must have exactly n genes");
        for (std::size_t i : s)
            if (i >= n_points) throw InvalidArgument("ga_minimax: seed index out of range");
    }

    const detail::GAFitness fitness(space, basis, sigma, nu);
    const std::size_t pop_size = static_cast<std::size_t>(config.population_size);
    using Individual = std::vector<std::size_t>;

    std::vector<Individual> population;
    population.reserve(pop_size);
    for (auto s : seeds) {
        std::sort(s.begin(), s.end());
        population.push_back(std::move(s));
    }
    for (std::size_t i = population.size(); i < pop_size; ++i) {
        Rng rng = make_rng(config.rng_seed, 0, i);
        std::uniform_int_distribution<std::size_t> pick(0, n_points - 1);
        Individual ind(n);
        for (auto& g : ind) g = pick(rng);
        std::sort(ind.begin(), ind.end());
        population.push_back(std::move(ind));
    }

    const std::size_t n_elite = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(config.elite_fraction * static_cast<double>(pop_size))));

    std::vector<double> fit(pop_size);
    std::vector<std::size_t> order(pop_size);
    std::vector<double> trace;
    Individual best;
    double best_fit = std::numeric_limits<double>::infinity();
    int stall = 0;

    const auto evaluate_and_rank = [&]() {
        for (std::size_t i = 0; i < pop_size; ++i) fit[i] = fitness(population[i]);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (fit[a] != fit[b]) return fit[a] < fit[b];
            return a < b;
        });
        if (fit[order[0]] < best_fit) {
            best_fit = fit[order[0]];
            best = population[order[0]];
            stall = 0;
        } else {
            ++stall;
        }
        trace.push_back(best_fit);
    };

    evaluate_and_rank();
    stall = 0; // the initial evaluation only establishes the baseline

    for (std::uint64_t generation = 1;; ++generation) {
        if (stall >= config.stall_limit) break;
        if (config.max_generations > 0 &&
            generation > static_cast<std::uint64_t>(config.max_generations))
            break;

        std::vector<Individual> next;
        next.reserve(pop_size);
        for (std::size_t e = 0; e < n_elite; ++e) next.push_back(population[order[e]]);

        // Rank-based roulette: weight (pop - rank) for the individual of
        // each rank, so the best individual is pop times likelier than
        // the worst.
        std::vector<double> weights(pop_size);
        for (std::size_t r = 0; r < pop_size; ++r)
            weights[r] = static_cast<double>(pop_size - r);
        for (std::size_t c = next.size(); c < pop_size; ++c) {
            Rng rng = make_rng(config.rng_seed, generation, c);
            std::discrete_distribution<std::size_t> roulette(weights.begin(), weights.end());
            const Individual& p1 = population[order[roulette(rng)]];
            const Individual& p2 = population[order[roulette(rng)]];
            Individual child(n);
            if (n >= 2) {
                std::uniform_int_distribution<std::size_t> cut_dist(1, n - 1);
                const std::size_t cut = cut_dist(rng);
                std::copy(p1.begin(), p1.begin() + static_cast<std::ptrdiff_t>(cut),
                          child.begin());
                std::copy(p2.begin() + static_cast<std::ptrdiff_t>(cut), p2.end(),
                          child.begin() + static_cast<std::ptrdiff_t>(cut));
            } else {
                child = p1;
            }
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::uniform_int_distribution<int> step(0, 1);
            for (auto& g : child) {
                if (unit(rng) < config.mutation_probability) {
                    if (step(rng) == 0) {
                        if (g > 0) --g;
                    } else {
                        if (g + 1 < n_points) ++g;
                    }
                }
            }
            std::sort(child.begin(), child.end());
            next.push_back(std::move(child));
        }
        population = std::move(next);
        evaluate_and_rank();
    }

    if (!std::isfinite(best_fit))
        throw RankDeficientSupport("ga_minimax: no full-rank design was found");

    std::vector<double> w(n_points, 0.0);
    for (std::size_t i : best) w[i] += 1.0 / static_cast<double>(n);
    DesignMeasure design = DesignMeasure::discrete(space, std::move(w));
    LossConfig loss_config;
    loss_config.nu = nu;
    LossReport report = loss_fixed_sigma(design, basis, sigma, loss_config);
    return {std::move(design), std::move(report), std::move(trace), std::move(best)};
}

} // namespace qrdesign

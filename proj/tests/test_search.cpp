#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "qrdesign/analytic.hpp"
#include "qrdesign/search.hpp"

using namespace qrdesign;

namespace {

// Independent compound objective: (1-nu) N tr(A A_S^-1) + nu chmax(A A_S^-1).
double compound_oracle(const DesignSpace& space, const Basis& basis,
                       const std::vector<std::size_t>& support, double nu) {
    const Matrix f = basis_matrix(space.points(), basis);
    const auto p = f.cols();
    const Matrix a = (f.transpose() * f) / static_cast<double>(space.size());
    Matrix a_s = Matrix::Zero(p, p);
    for (std::size_t i : support) {
        const Vector row = f.row(static_cast<Eigen::Index>(i)).transpose();
        a_s += row * row.transpose();
    }
    const Eigen::FullPivLU<Matrix> lu(a_s);
    if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
    const Matrix prod = a * lu.inverse();
    const double trace = prod.trace();
    const double chmax = Eigen::EigenSolver<Matrix>(prod).eigenvalues().real().maxCoeff();
    return (1.0 - nu) * static_cast<double>(space.size()) * trace + nu * chmax;
}

std::vector<double> support_points(const DesignSpace& space,
                                   const std::vector<std::size_t>& support) {
    std::vector<double> xs;
    for (std::size_t i : support) xs.push_back(space.points()[i]);
    return xs;
}

} // namespace

TEST_CASE("exchange search validates its inputs") {
    const auto space = DesignSpace::discrete_grid(9, -1.0, 1.0);
    const auto line = Basis::polynomial(1);
    REQUIRE_THROWS_AS(exchange_compound(space, line, 0, 0.5), InvalidArgument);
    REQUIRE_THROWS_AS(exchange_compound(space, line, 4, 1.5), InvalidArgument);
    REQUIRE_THROWS_AS(
        exchange_compound(DesignSpace::continuous(-1.0, 1.0, 11), line, 4, 0.5),
        InvalidArgument);
    REQUIRE_THROWS_AS(
        exchange_compound(DesignSpace::discrete({0.0, 1.0, 2.0}), line, 2, 0.5, true),
        InvalidArgument);
    // Support size below the basis dimension cannot carry a nonsingular moment matrix.
    REQUIRE_THROWS_AS(exchange_compound(space, Basis::polynomial(2), 2, 0.5),
                      RankDeficientSupport);
}

TEST_CASE("three-run straight-line exchange design uses the ends and the center") {
    const auto space = DesignSpace::discrete({-1.0, -0.5, 0.0, 0.5, 1.0});
    const auto result = exchange_compound(space, Basis::polynomial(1), 3, 0.5);
    REQUIRE(result.k_star == 3);
    REQUIRE(result.support == std::vector<std::size_t>{0, 2, 4});
    REQUIRE(result.replication == std::vector<int>{1, 1, 1});
    REQUIRE(result.loss.total ==
            Catch::Approx(compound_oracle(space, Basis::polynomial(1), result.support, 0.5))
                .margin(1e-10));
}

TEST_CASE("straight-line exchange matches the extreme-pairs closed form") {
    const auto space = DesignSpace::discrete_grid(11, -1.0, 1.0);
    const auto line = Basis::polynomial(1);
    for (std::size_t n : {2u, 3u, 4u, 5u, 6u, 9u, 11u}) {
        const auto result = exchange_compound(space, line, n, 0.5);
        std::vector<std::size_t> expected;
        if (n % 2 == 1) expected.push_back(5);
        for (std::size_t j = 0; j < n / 2; ++j) {
            expected.push_back(j);
            expected.push_back(10 - j);
        }
        std::sort(expected.begin(), expected.end());
        REQUIRE(result.support == expected);
    }
}

TEST_CASE("forty-one-run design on the fine grid keeps the center and the outer band") {
    const auto space = DesignSpace::discrete_grid(101, -1.0, 1.0);
    const auto result = exchange_compound(space, Basis::polynomial(1), 41, 0.5);
    std::vector<double> expected{0.0};
    for (int j = 0; j < 20; ++j) {
        const double x = 1.0 - 0.02 * j;
        expected.push_back(-x);
        expected.push_back(x);
    }
    std::sort(expected.begin(), expected.end());
    const auto got = support_points(space, result.support);
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        REQUIRE(got[i] == Catch::Approx(expected[i]).margin(1e-12));
}

TEST_CASE("quadratic exchange equals exhaustive search over symmetric supports") {
    const auto space = DesignSpace::discrete_grid(9, -1.0, 1.0);
    const auto quad = Basis::polynomial(2);
    const double nu = 0.5;
    const auto result = exchange_compound(space, quad, 5, nu);

    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> best_support;
    for (std::size_t p1 = 0; p1 < 4; ++p1) {
        for (std::size_t p2 = p1 + 1; p2 < 4; ++p2) {
            std::vector<std::size_t> support{p1, p2, 4, 8 - p2, 8 - p1};
            std::sort(support.begin(), support.end());
            const double value = compound_oracle(space, quad, support, nu);
            if (value < best) {
                best = value;
                best_support = support;
            }
        }
    }
    REQUIRE(result.loss.total == Catch::Approx(best).margin(1e-10));
    REQUIRE(result.support == best_support);
}

TEST_CASE("runs beyond the space size replicate with outermost extras") {
    const auto space = DesignSpace::discrete({-1.0, -0.5, 0.0, 0.5, 1.0});
    const auto result = exchange_compound(space, Basis::polynomial(1), 12, 0.25);
    REQUIRE(result.k_star == 5);
    REQUIRE(result.support == std::vector<std::size_t>{0, 1, 2, 3, 4});
    REQUIRE(result.replication == std::vector<int>{3, 2, 2, 2, 3});
    int total = 0;
    for (int r : result.replication) total += r;
    REQUIRE(total == 12);
}

TEST_CASE("saturated design places one p-th of the mass at every basis peak") {
    const auto basis = spline_from_preset("desknots");
    const auto space = DesignSpace::discrete_grid(1799, 0.0, 18.0);
    const auto design = saturated_design(basis, space);
    const auto peaks = spline_peak_locations(basis);
    REQUIRE(peaks.size() == 12);
    const auto support = design.support_indices();
    REQUIRE(support.size() == 12);
    const double h = 18.0 / 1798.0;
    std::vector<double> xs = support_points(space, support);
    std::sort(xs.begin(), xs.end());
    for (std::size_t j = 0; j < peaks.size(); ++j) {
        REQUIRE(design.values()[support[j]] == Catch::Approx(1.0 / 12.0));
        REQUIRE(std::abs(xs[j] - peaks[j]) <= 0.5 * h + 1e-9);
    }
}

TEST_CASE("knotless saturated design snaps to the quarter points") {
    const auto basis = Basis::cubic_bspline(0.0, 1.0, {});
    const auto space = DesignSpace::discrete_grid(101, 0.0, 1.0);
    const auto design = saturated_design(basis, space);
    const auto xs = support_points(space, design.support_indices());
    const std::vector<double> expected{0.0, 0.33, 0.67, 1.0};
    REQUIRE(xs.size() == expected.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        REQUIRE(xs[i] == Catch::Approx(expected[i]).margin(1e-12));
}

TEST_CASE("saturated design rejects spaces smaller than the basis") {
    const auto basis = Basis::cubic_bspline(0.0, 1.0, {});
    REQUIRE_THROWS_AS(saturated_design(basis, DesignSpace::discrete({0.0, 0.5, 1.0})),
                      DuplicateSnap);
    REQUIRE_THROWS_AS(
        saturated_design(Basis::polynomial(2), DesignSpace::discrete_grid(9, 0.0, 1.0)),
        InvalidArgument);
}

TEST_CASE("default genetic seeds are valid index multisets") {
    const auto space = DesignSpace::discrete_grid(200, 0.0, 18.0);
    const auto basis = spline_from_preset("desknots");
    const auto sigma = sigma_preset("constant", space);
    const auto seeds = ga_default_seeds(space, basis, sigma, 24);
    REQUIRE(seeds.size() == 3);
    for (const auto& seed : seeds) {
        REQUIRE(seed.size() == 24);
        REQUIRE(std::is_sorted(seed.begin(), seed.end()));
        for (std::size_t i : seed) REQUIRE(i < 200);
    }

    const auto grid = DesignSpace::discrete_grid(21, -1.0, 1.0);
    const auto poly_seeds =
        ga_default_seeds(grid, Basis::polynomial(1), sigma_preset("vee", grid), 6);
    REQUIRE(poly_seeds.size() == 3);
    // The compound-style seed concentrates on the outermost points.
    REQUIRE(poly_seeds[0].front() == 0);
    REQUIRE(poly_seeds[0].back() == 20);
}

TEST_CASE("genetic search configuration is validated") {
    const auto space = DesignSpace::discrete_grid(11, -1.0, 1.0);
    const auto basis = Basis::polynomial(1);
    const auto sigma = sigma_preset("constant", space);
    const auto seeds = ga_default_seeds(space, basis, sigma, 4);

    GAConfig bad_rule;
    bad_rule.crossover_rule = "uniform";
    REQUIRE_THROWS_AS(ga_minimax(space, basis, sigma, 0.5, 4, seeds, bad_rule),
                      InvalidArgument);

    GAConfig tiny_pop;
    tiny_pop.population_size = 3;
    REQUIRE_THROWS_AS(ga_minimax(space, basis, sigma, 0.5, 4, seeds, tiny_pop),
                      InvalidArgument);

    GAConfig mismatched;
    mismatched.n_seeded = 2;
    REQUIRE_THROWS_AS(ga_minimax(space, basis, sigma, 0.5, 4, seeds, mismatched),
                      InvalidArgument);

    REQUIRE_THROWS_AS(ga_minimax(space, basis, sigma, 1.5, 4, seeds, {}), InvalidArgument);
}

TEST_CASE("genetic search is bit-reproducible and never forgets its best") {
    const auto space = DesignSpace::discrete_grid(31, -1.0, 1.0);
    const auto basis = Basis::polynomial(2);
    const auto sigma = sigma_preset("vee", space);
    const auto seeds = ga_default_seeds(space, basis, sigma, 12);
    GAConfig config;
    config.stall_limit = 60;

    const auto a = ga_minimax(space, basis, sigma, 0.5, 12, seeds, config);
    const auto b = ga_minimax(space, basis, sigma, 0.5, 12, seeds, config);
    REQUIRE(a.best_indices == b.best_indices);
    REQUIRE(a.trace == b.trace);
    REQUIRE(a.report.total == b.report.total);

    REQUIRE(!a.trace.empty());
    for (std::size_t i = 1; i < a.trace.size(); ++i)
        REQUIRE(a.trace[i] <= a.trace[i - 1]);

    // The returned design is the empirical measure of the best multiset.
    std::vector<double> w(space.size(), 0.0);
    for (std::size_t i : a.best_indices) w[i] += 1.0 / 12.0;
    for (std::size_t i = 0; i < space.size(); ++i)
        REQUIRE(a.design.values()[i] == Catch::Approx(w[i]).margin(1e-15));
}

TEST_CASE("genetic search does not lose to any of its seeds") {
    const auto space = DesignSpace::discrete_grid(31, -1.0, 1.0);
    const auto basis = Basis::polynomial(2);
    const auto sigma = sigma_preset("bowl", space);
    const auto seeds = ga_default_seeds(space, basis, sigma, 10);
    GAConfig config;
    config.stall_limit = 60;
    const auto result = ga_minimax(space, basis, sigma, 0.35, 10, seeds, config);

    LossConfig loss_config;
    loss_config.nu = 0.35;
    for (const auto& seed : seeds) {
        std::vector<double> w(space.size(), 0.0);
        for (std::size_t i : seed) w[i] += 0.1;
        const auto measure = DesignMeasure::discrete(space, std::move(w));
        const double seed_loss = loss_fixed_sigma(measure, basis, sigma, loss_config).total;
        REQUIRE(result.report.total <= seed_loss + 1e-10);
    }
}

TEST_CASE("genetic search finds the exhaustive optimum on a small problem") {
    const auto space = DesignSpace::discrete_grid(8, -1.0, 1.0);
    const auto basis = Basis::polynomial(1);
    const auto sigma = sigma_preset("constant", space);
    const double nu = 0.5;
    LossConfig loss_config;
    loss_config.nu = nu;

    // Enumerate every multiset of four indices from the eight grid points.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < 8; ++a)
        for (std::size_t b = a; b < 8; ++b)
            for (std::size_t c = b; c < 8; ++c)
                for (std::size_t d = c; d < 8; ++d) {
                    std::vector<double> w(8, 0.0);
                    w[a] += 0.25;
                    w[b] += 0.25;
                    w[c] += 0.25;
                    w[d] += 0.25;
                    try {
                        const auto measure = DesignMeasure::discrete(space, std::move(w));
                        best = std::min(
                            best, loss_fixed_sigma(measure, basis, sigma, loss_config).total);
                    } catch (const SingularMatrix&) {
                        // Rank-deficient multisets are infeasible; skip them.
                    }
                }

    const auto seeds = ga_default_seeds(space, basis, sigma, 4);
    GAConfig config;
    config.stall_limit = 500;
    const auto result = ga_minimax(space, basis, sigma, nu, 4, seeds, config);
    REQUIRE(result.report.total == Catch::Approx(best).margin(1e-10));
}

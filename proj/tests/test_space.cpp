#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qrdesign/rng.hpp"
#include "qrdesign/space.hpp"

using namespace qrdesign;

TEST_CASE("discrete grid spaces expose ordered points and bounds") {
    const auto space = DesignSpace::discrete_grid(11, -1.0, 1.0);
    REQUIRE(space.kind() == SpaceKind::Discrete);
    REQUIRE(space.size() == 11);
    REQUIRE(space.lower() == -1.0);
    REQUIRE(space.upper() == 1.0);
    REQUIRE(space.points()[5] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(space.is_symmetric());
    REQUIRE(space.mirror_index(0) == 10);
    REQUIRE(space.mirror_index(3) == 7);
}

TEST_CASE("spaces validate their points") {
    REQUIRE_THROWS_AS(DesignSpace::discrete({0.0}), InvalidArgument);
    REQUIRE_THROWS_AS(DesignSpace::discrete({0.0, 0.0}), InvalidArgument);
    REQUIRE_THROWS_AS(DesignSpace::discrete({1.0, 0.0}), InvalidArgument);
    REQUIRE_THROWS_AS(DesignSpace::discrete_grid(5, 1.0, -1.0), InvalidArgument);
    const double inf = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(DesignSpace::discrete({0.0, inf}), InvalidArgument);
}

TEST_CASE("trapezoid weights integrate exactly linear functions") {
    const auto space = DesignSpace::continuous(-1.0, 1.0, 201);
    const auto w = space.quad_weights();
    double total = 0.0, first = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        total += w[i];
        first += w[i] * space.points()[i];
    }
    REQUIRE(total == Catch::Approx(2.0).epsilon(1e-13));
    REQUIRE(first == Catch::Approx(0.0).margin(1e-13));
    REQUIRE_THROWS_AS(DesignSpace::discrete_grid(5, 0.0, 1.0).quad_weights(),
                      InvalidArgument);
}

TEST_CASE("measures validate mass and nonnegativity") {
    const auto space = DesignSpace::discrete_grid(3, -1.0, 1.0);
    REQUIRE_THROWS_AS(DesignMeasure::discrete(space, {0.5, 0.5, 0.5}), InvalidArgument);
    REQUIRE_THROWS_AS(DesignMeasure::discrete(space, {-0.5, 1.0, 0.5}), InvalidArgument);
    REQUIRE_THROWS_AS(DesignMeasure::discrete(space, {0.5, 0.5}), InvalidArgument);
    const auto m = DesignMeasure::discrete(space, {0.25, 0.5, 0.25});
    REQUIRE(m.total_mass() == Catch::Approx(1.0));
    REQUIRE(m.support_size() == 3);
    const auto thin = DesignMeasure::discrete(space, {0.0, 1.0, 0.0});
    REQUIRE(thin.support_indices() == std::vector<std::size_t>{1});
}

TEST_CASE("normalized rescales raw weights and densities") {
    const auto space = DesignSpace::discrete_grid(4, 0.0, 3.0);
    const auto m = DesignMeasure::normalized(space, {1.0, 1.0, 1.0, 1.0});
    for (double v : m.values()) REQUIRE(v == Catch::Approx(0.25));

    const auto cspace = DesignSpace::continuous(0.0, 2.0, 101);
    const auto d = DesignMeasure::normalized(cspace, std::vector<double>(101, 7.0));
    REQUIRE(d.values()[50] == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("quantiles invert the cdf with ties toward smaller abscissae") {
    const auto space = DesignSpace::discrete({-1.0, 0.0, 1.0});
    const auto m = DesignMeasure::discrete(space, {0.25, 0.5, 0.25});
    REQUIRE(m.quantile(0.1) == -1.0);
    REQUIRE(m.quantile(0.25) == -1.0); // boundary resolves to the smaller point
    REQUIRE(m.quantile(0.3) == 0.0);
    REQUIRE(m.quantile(0.75) == 0.0);
    REQUIRE(m.quantile(0.76) == 1.0);
    REQUIRE(m.quantile(1.0) == 1.0);
}

TEST_CASE("implement_design matches the frozen quantile examples") {
    // Uniform density on [-1, 1], n = 4.
    const auto cspace = DesignSpace::continuous(-1.0, 1.0, 2001);
    const auto uniform = DesignMeasure::continuous(cspace, std::vector<double>(2001, 0.5));
    const auto pts = implement_design(uniform, 4);
    const std::vector<double> expected = {-0.75, -0.25, 0.25, 0.75};
    REQUIRE(pts.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        REQUIRE(pts[i] == Catch::Approx(expected[i]).margin(1e-9));

    // Point mass at x = 0, n = 3.
    const auto space3 = DesignSpace::discrete({-1.0, 0.0, 1.0});
    const auto atom = DesignMeasure::discrete(space3, {0.0, 1.0, 0.0});
    for (double x : implement_design(atom, 3)) REQUIRE(x == 0.0);

    // Half mass at each of {-1, 1}, n = 4.
    const auto space2 = DesignSpace::discrete({-1.0, 1.0});
    const auto half = DesignMeasure::discrete(space2, {0.5, 0.5});
    const auto pts2 = implement_design(half, 4);
    REQUIRE(pts2 == std::vector<double>{-1.0, -1.0, 1.0, 1.0});
}

TEST_CASE("implement_design is sorted, in-bounds, and close in Kolmogorov distance") {
    Rng rng = make_rng(42, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n_pts = 5 + static_cast<std::size_t>(unit(rng) * 20);
        const auto space = DesignSpace::discrete_grid(n_pts, -2.0, 3.0);
        std::vector<double> raw(n_pts);
        for (auto& v : raw) v = unit(rng) + 1e-3;
        const auto m = DesignMeasure::normalized(space, raw);
        for (std::size_t n : {10u, 100u, 1000u}) {
            const auto pts = implement_design(m, n);
            REQUIRE(pts.size() == n);
            REQUIRE(std::is_sorted(pts.begin(), pts.end()));
            REQUIRE(pts.front() >= space.lower());
            REQUIRE(pts.back() <= space.upper());
            // Kolmogorov distance between the empirical measure and m,
            // evaluated at the grid points, is at most 1/(2n).
            const auto cdf = m.cdf();
            double worst = 0.0;
            for (std::size_t i = 0; i < n_pts; ++i) {
                const double x = space.points()[i];
                const double emp =
                    static_cast<double>(std::upper_bound(pts.begin(), pts.end(), x) -
                                        pts.begin()) /
                    static_cast<double>(n);
                worst = std::max(worst, std::abs(emp - cdf[i]));
            }
            REQUIRE(worst <= 0.5 / static_cast<double>(n) + 1e-12);
        }
    }
}

TEST_CASE("space equality distinguishes kinds and points") {
    const auto a = DesignSpace::discrete_grid(5, -1.0, 1.0);
    const auto b = DesignSpace::discrete_grid(5, -1.0, 1.0);
    const auto c = DesignSpace::continuous(-1.0, 1.0, 5);
    REQUIRE(a == b);
    REQUIRE_FALSE(a == c);
}

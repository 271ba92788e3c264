#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qrdesign/analytic.hpp"
#include "qrdesign/simulate.hpp"

using namespace qrdesign;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

} // namespace

TEST_CASE("inverse normal CDF round-trips against erfc") {
    for (double p : {1e-10, 1e-6, 1e-4, 0.02, 0.05, 0.25, 0.5, 0.75, 0.95, 0.9999,
                     1.0 - 1e-6}) {
        const double x = inverse_normal_cdf(p);
        REQUIRE(normal_cdf(x) == Catch::Approx(p).margin(1e-12 + 1e-9 * p));
    }
    REQUIRE(inverse_normal_cdf(0.5) == 0.0);
    REQUIRE(inverse_normal_cdf(0.975) == Catch::Approx(1.959963984540054).margin(1e-12));
    REQUIRE(inverse_normal_cdf(0.025) == Catch::Approx(-1.959963984540054).margin(1e-12));
    for (double p : {0.1, 0.01, 0.3}) {
        REQUIRE(inverse_normal_cdf(1.0 - p) ==
                Catch::Approx(-inverse_normal_cdf(p)).margin(1e-12));
    }
    REQUIRE_THROWS_AS(inverse_normal_cdf(0.0), InvalidArgument);
    REQUIRE_THROWS_AS(inverse_normal_cdf(1.0), InvalidArgument);
    REQUIRE_THROWS_AS(inverse_normal_cdf(-0.2), InvalidArgument);
}

TEST_CASE("sampled misspecifications live in the basis complement at full norm") {
    const auto space = DesignSpace::discrete_grid(40, -1.0, 1.0);
    const auto basis = Basis::polynomial(2);
    const Matrix f = basis_matrix(space.points(), basis);
    Rng rng = make_rng(11, 0);
    const double eta = 2.0;
    for (int rep = 0; rep < 10; ++rep) {
        const auto mis = sample_delta0(space, basis, eta, rng);
        REQUIRE(mis.delta0.size() == 40);
        double norm2 = 0.0;
        for (double v : mis.delta0) norm2 += v * v / 40.0;
        REQUIRE(norm2 == Catch::Approx(eta * eta).margin(1e-10));
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (std::size_t i = 0; i < 40; ++i) dot += mis.delta0[i] * f(i, j) / 40.0;
            REQUIRE(std::abs(dot) <= 1e-10 * (1.0 + eta));
        }
        // The weighted-geometry scaling bounds each value by eta sqrt(N).
        for (double v : mis.delta0) REQUIRE(std::abs(v) <= eta * std::sqrt(40.0) + 1e-9);
    }
}

TEST_CASE("sampled misspecifications honor continuous quadrature weights") {
    const auto space = DesignSpace::continuous(-1.0, 1.0, 101);
    const auto basis = Basis::polynomial(1);
    const auto w = space.quad_weights();
    const Matrix f = basis_matrix(space.points(), basis);
    Rng rng = make_rng(12, 0);
    const auto mis = sample_delta0(space, basis, 0.7, rng);
    double norm2 = 0.0;
    for (std::size_t i = 0; i < 101; ++i) norm2 += w[i] * mis.delta0[i] * mis.delta0[i];
    REQUIRE(norm2 == Catch::Approx(0.49).margin(1e-10));
    for (int j = 0; j < 2; ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < 101; ++i) dot += w[i] * mis.delta0[i] * f(i, j);
        REQUIRE(std::abs(dot) <= 1e-10);
    }
}

TEST_CASE("misspecification sampling handles edge cases") {
    const auto space = DesignSpace::discrete_grid(10, -1.0, 1.0);
    Rng rng = make_rng(13, 0);

    const auto zero = sample_delta0(space, Basis::polynomial(1), 0.0, rng);
    for (double v : zero.delta0) REQUIRE(v == 0.0);

    REQUIRE_THROWS_AS(sample_delta0(space, Basis::polynomial(1), -1.0, rng),
                      InvalidArgument);
    const auto tiny = DesignSpace::discrete({-1.0, 0.0, 1.0});
    REQUIRE_THROWS_AS(sample_delta0(tiny, Basis::polynomial(2), 1.0, rng), NoComplement);

    // Identical streams give identical draws; successive draws differ.
    Rng r1 = make_rng(21, 5), r2 = make_rng(21, 5);
    const auto d1 = sample_delta0(space, Basis::polynomial(1), 1.0, r1);
    const auto d2 = sample_delta0(space, Basis::polynomial(1), 1.0, r2);
    REQUIRE(d1.delta0 == d2.delta0);
    const auto d3 = sample_delta0(space, Basis::polynomial(1), 1.0, r1);
    REQUIRE(d1.delta0 != d3.delta0);
}

TEST_CASE("loss-versus-weight curve is the affine interpolation of its endpoints") {
    const auto space = DesignSpace::discrete_grid(21, -1.0, 1.0);
    const auto basis = Basis::polynomial(1);
    const auto sigma = sigma_preset("constant", space);
    const auto design = uniform_design(space);
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(i / 10.0);
    const auto curve = mse_vs_nu_curve(design, basis, sigma, grid);
    REQUIRE(curve.size() == 11);

    // Uniform design, constant sigma: variance p, bias 1/N.
    REQUIRE(curve.front().second == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(curve.back().second == Catch::Approx(1.0 / 21.0).margin(1e-12));
    for (std::size_t i = 0; i < curve.size(); ++i) {
        const double nu = curve[i].first;
        const double expected =
            (1.0 - nu) * curve.front().second + nu * curve.back().second;
        REQUIRE(curve[i].second == Catch::Approx(expected).margin(1e-12));
    }
    REQUIRE_THROWS_AS(mse_vs_nu_curve(design, basis, sigma, {0.5, 1.2}), InvalidArgument);
}

TEST_CASE("scenario runs are deterministic and account for failures") {
    auto config = ScenarioConfig::standard();
    config.taus = {0.25, 0.75};
    config.n = 24;
    config.replications = 3;
    config.eval_grid_size = 64;
    const auto space = DesignSpace::discrete_grid(180, 0.0, 18.0);

    const auto uniform_points = implement_design(uniform_design(space), config.n);
    const std::vector<double> stuck(config.n, space.points().front());
    const std::vector<std::pair<std::string, std::vector<double>>> designs = {
        {"uniform", uniform_points}, {"stuck", stuck}};

    const auto a = run_scenario(config, space, designs);
    const auto b = run_scenario(config, space, designs);

    REQUIRE(a.table.size() == 4);
    // tau-major ordering with designs in input order.
    REQUIRE(a.table[0].tau == 0.25);
    REQUIRE(a.table[0].design == "uniform");
    REQUIRE(a.table[1].design == "stuck");
    REQUIRE(a.table[2].tau == 0.75);

    for (std::size_t i = 0; i < a.table.size(); ++i) {
        REQUIRE(a.table[i].rmse_mean == b.table[i].rmse_mean);
        REQUIRE(a.table[i].rmse_se == b.table[i].rmse_se);
        REQUIRE(a.table[i].n_failed == b.table[i].n_failed);
    }

    // The uniform design fits every replicate; the stuck design never does.
    REQUIRE(a.table[0].n_failed == 0);
    REQUIRE(a.table[0].rmse_mean > 0.0);
    REQUIRE(std::isfinite(a.table[0].rmse_mean));
    REQUIRE(a.table[0].rmse_se >= 0.0);
    REQUIRE(a.table[1].n_failed == 3);
    REQUIRE(a.table[1].rmse_mean == 0.0);

    // Loss curves exist only for designs with nonsingular empirical moments.
    REQUIRE(a.loss_curves.size() == 1);
    REQUIRE(a.loss_curves[0].first == "uniform");
    REQUIRE(a.loss_curves[0].second.size() == 21);
}

TEST_CASE("scenario error shrinks with the noise scale when the model is exact") {
    auto config = ScenarioConfig::standard();
    config.fit_basis = config.truth_basis;
    config.sigma_y_scale = 1e-6;
    config.taus = {0.5};
    // The truth basis has a narrow first knot span; n must be large enough
    // for the uniform quantile implementation to place a point inside it.
    config.n = 120;
    config.replications = 2;
    config.eval_grid_size = 64;
    const auto space = DesignSpace::discrete_grid(180, 0.0, 18.0);
    const auto points = implement_design(uniform_design(space), config.n);
    const auto result = run_scenario(config, space, {{"uniform", points}});
    REQUIRE(result.table.size() == 1);
    REQUIRE(result.table[0].n_failed == 0);
    REQUIRE(result.table[0].rmse_mean < 1e-3);
}

TEST_CASE("scenario rejects empty or invalid requests") {
    auto config = ScenarioConfig::standard();
    const auto space = DesignSpace::discrete_grid(50, 0.0, 18.0);
    REQUIRE_THROWS_AS(run_scenario(config, space, {}), InvalidArgument);
    config.taus = {0.0};
    REQUIRE_THROWS_AS(
        run_scenario(config, space, {{"u", implement_design(uniform_design(space), 20)}}),
        InvalidArgument);
    config.taus = {0.5};
    config.replications = 0;
    REQUIRE_THROWS_AS(
        run_scenario(config, space, {{"u", implement_design(uniform_design(space), 20)}}),
        InvalidArgument);
}

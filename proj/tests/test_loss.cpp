#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qrdesign/analytic.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/rng.hpp"

using namespace qrdesign;

TEST_CASE("loss config and contamination mixing validate and match the formula") {
    REQUIRE_THROWS_AS((LossConfig{1.5, 0.5}).validate(), InvalidArgument);
    REQUIRE_THROWS_AS((LossConfig{0.5, 0.0}).validate(), InvalidArgument);
    REQUIRE(nu_from_contamination(0.0, 0.5, default_g0()) == 0.0);
    REQUIRE(nu_from_contamination(1e9, 0.5, default_g0()) == Catch::Approx(1.0));
    const double pi = std::acos(-1.0);
    // tau = 1/2, g0 = standard normal height: variance factor is pi/2.
    REQUIRE(nu_from_contamination(1.0, 0.5, default_g0()) ==
            Catch::Approx(1.0 / (1.0 + pi / 2.0)).epsilon(1e-14));
    REQUIRE(default_g0() == Catch::Approx(1.0 / std::sqrt(2.0 * pi)).epsilon(1e-15));
}

TEST_CASE("uniform designs with unit sigma hit the closed-form loss") {
    for (int degree : {1, 2}) {
        for (std::size_t n : {11u, 101u}) {
            const auto space = DesignSpace::discrete_grid(n, -1.0, 1.0);
            const auto sigma = sigma_preset("constant", space);
            const auto m = uniform_design(space);
            for (double nu : {0.0, 0.25, 0.5, 1.0}) {
                LossConfig config;
                config.nu = nu;
                const auto rep = loss_fixed_sigma(m, Basis::polynomial(degree), sigma, config);
                const double p = degree + 1;
                const double expected = (1.0 - nu) * p + nu / static_cast<double>(n);
                REQUIRE(std::abs(rep.total - expected) <= 1e-12);
                REQUIRE(rep.variance_term == Catch::Approx(p).margin(1e-12));
                REQUIRE(rep.bias_term ==
                        Catch::Approx(1.0 / static_cast<double>(n)).margin(1e-12));
            }
        }
    }
}

TEST_CASE("endpoint half-mass straight-line loss equals one plus the second moment") {
    // Half the mass at each end of the 101-point grid, unit sigma, pure
    // variance weighting.  The information matrix of that design is the
    // identity, so the loss is tr(A) = 1 + (1/101) * sum(x_i^2).  The grid
    // second moment is exactly 0.34 (sum of squares 34.34 over 101 points).
    const auto space = DesignSpace::discrete_grid(101, -1.0, 1.0);
    std::vector<double> w(101, 0.0);
    w.front() = 0.5;
    w.back() = 0.5;
    const auto xi = DesignMeasure::discrete(space, w);
    const auto sigma = sigma_preset("constant", space);
    const auto rep = loss_fixed_sigma(xi, Basis::polynomial(1), sigma, LossConfig{0.0, 0.5});
    double s2 = 0.0;
    for (double x : space.points()) s2 += x * x;
    REQUIRE(s2 / 101.0 == Catch::Approx(0.34).epsilon(1e-13));
    REQUIRE(rep.total == Catch::Approx(1.34).epsilon(1e-13));
    REQUIRE(rep.total == Catch::Approx(1.0 + s2 / 101.0).epsilon(1e-14));
}

TEST_CASE("sigma-proportional designs attain the bias lower bound") {
    const auto space = DesignSpace::discrete_grid(101, -1.0, 1.0);
    for (const char* preset : {"reciprocal", "constant", "vee", "bowl"}) {
        const auto sigma = sigma_preset(preset, space);
        const auto design = minbias_design(sigma);
        const auto rep = loss_fixed_sigma(design, Basis::polynomial(1), sigma, {});
        REQUIRE(rep.bias_term == Catch::Approx(1.0 / 101.0).margin(1e-12));
    }
    // Continuous analogue: bias term 1 for the density proportional to sigma.
    const auto cspace = DesignSpace::continuous(-1.0, 1.0, 1001);
    const auto csigma = sigma_preset("bowl", cspace);
    const auto cdesign = minbias_design(csigma);
    const auto crep = loss_fixed_sigma(cdesign, Basis::polynomial(2), csigma, {});
    REQUIRE(crep.bias_term == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("variance-class loss is r-independent at uniform-on-support designs") {
    Rng rng = make_rng(11, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto space = DesignSpace::discrete_grid(25, -1.0, 1.0);
    const auto basis = Basis::polynomial(2);
    LossConfig config;
    config.nu = 0.35;
    for (int rep = 0; rep < 10; ++rep) {
        // Random support of size >= p (one sweep yields sorted unique indices).
        std::vector<std::size_t> support;
        while (support.size() < 4) {
            support.clear();
            for (std::size_t i = 0; i < 25; ++i)
                if (unit(rng) < 0.3) support.push_back(i);
        }
        std::vector<double> w(25, 0.0);
        for (std::size_t i : support) w[i] = 1.0 / static_cast<double>(support.size());
        const auto m = DesignMeasure::discrete(space, w);
        const double at_one = loss_sigma0_class(m, basis, 1.0, config).total;
        for (double r : default_r_grid()) {
            const double at_r = loss_sigma0_class(m, basis, r, config).total;
            REQUIRE(at_r == Catch::Approx(at_one).margin(1e-9 * (1.0 + at_one)));
        }
        const auto [r_star, worst] = worst_r_loss(m, basis, config);
        REQUIRE(r_star == 1.0);
        REQUIRE(worst.total == Catch::Approx(at_one).margin(1e-9 * (1.0 + at_one)));
    }
}

TEST_CASE("worst_r_loss dominates the uniform-on-support loss") {
    Rng rng = make_rng(13, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto space = DesignSpace::discrete_grid(15, -1.0, 1.0);
    const auto basis = Basis::polynomial(1);
    LossConfig config;
    config.nu = 0.65;
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<double> raw(15, 0.0);
        for (auto& v : raw) v = unit(rng) < 0.4 ? 0.0 : unit(rng) + 0.05;
        raw[0] += 0.05;
        raw[14] += 0.05; // ensure a two-point spread
        const auto m = DesignMeasure::normalized(space, raw);
        std::vector<double> uniform_w(15, 0.0);
        const auto support = m.support_indices();
        for (std::size_t i : support)
            uniform_w[i] = 1.0 / static_cast<double>(support.size());
        const auto u = DesignMeasure::discrete(space, uniform_w);
        const double worst = worst_r_loss(m, basis, config).second.total;
        const double at_uniform = worst_r_loss(u, basis, config).second.total;
        REQUIRE(worst >= at_uniform - 1e-9 * (1.0 + std::abs(at_uniform)));
    }
}

TEST_CASE("loss_sigma0_class validates r and rejects empty designs") {
    const auto space = DesignSpace::discrete_grid(5, -1.0, 1.0);
    const auto m = uniform_design(space);
    REQUIRE_THROWS_AS(loss_sigma0_class(m, Basis::polynomial(1), 2.5, {}), InvalidArgument);
    REQUIRE_THROWS_AS(worst_r_loss(m, Basis::polynomial(1), {}, {0.0, 2.0}),
                      InvalidArgument); // grid lacks r = 1
}

TEST_CASE("asymptotic mse reduces to the variance term when delta0 vanishes") {
    const auto space = DesignSpace::discrete_grid(21, -1.0, 1.0);
    const auto sigma = sigma_preset("vee", space);
    const auto basis = Basis::polynomial(1);
    Rng rng = make_rng(17, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> raw(21);
    for (auto& v : raw) v = unit(rng) + 0.1;
    const auto m = DesignMeasure::normalized(space, raw);

    const double tau = 0.3, g0 = default_g0();
    const auto am = asymptotic_mse_matrix(m, basis, sigma, [](double) { return 0.0; },
                                          tau, g0);
    const auto mm = t_matrices(m, basis, sigma);
    const double v = tau * (1.0 - tau) / (g0 * g0);
    const Matrix a = moment_matrix_A(space, basis);
    const double direct = (a * am.mse_matrix).trace();
    const double via_loss = v * (a * mm.T0).trace();
    REQUIRE(direct == Catch::Approx(via_loss).epsilon(1e-10));
    REQUIRE(am.mu0.cwiseAbs().maxCoeff() <= 1e-14);
    // P0 and P1 coincide with the design's moment matrices.
    REQUIRE((am.P0 - mm.T00).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE((am.P1 - mm.T01).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("psd gap is nonnegative for random weight functions") {
    Rng rng = make_rng(19, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto space = DesignSpace::discrete_grid(30, -1.0, 1.0);
    const auto cspace = DesignSpace::continuous(0.0, 2.0, 201);
    for (int rep = 0; rep < 25; ++rep) {
        const double c0 = unit(rng) * 2.0 - 1.0, c1 = unit(rng) * 2.0 - 1.0,
                     c2 = unit(rng) * 2.0 - 1.0;
        const auto p_fn = [=](double x) { return std::exp(c0 + c1 * x + c2 * x * x); };

        std::vector<std::size_t> support;
        while (support.size() < 5) {
            support.clear();
            for (std::size_t i = 0; i < 30; ++i)
                if (unit(rng) < 0.4) support.push_back(i);
        }
        REQUIRE(psd_gap(p_fn, Basis::polynomial(2), space, support) >= -1e-9);

        const std::size_t start = static_cast<std::size_t>(unit(rng) * 100);
        std::vector<std::size_t> run;
        for (std::size_t i = start; i < start + 60; ++i) run.push_back(i);
        REQUIRE(psd_gap(p_fn, Basis::polynomial(1), cspace, run) >= -1e-9);
    }
    REQUIRE_THROWS_AS(
        psd_gap([](double) { return -1.0; }, Basis::polynomial(1), space, {0, 1, 2}),
        InvalidArgument);
}

TEST_CASE("fixed-sigma loss is invariant under support-preserving symmetry") {
    // Mirror-symmetric designs and sigmas give identical losses after
    // mirroring, a smoke check on index handling.
    const auto space = DesignSpace::discrete_grid(9, -1.0, 1.0);
    const auto sigma = sigma_preset("bowl", space);
    std::vector<double> w = {0.3, 0.0, 0.1, 0.0, 0.2, 0.0, 0.1, 0.0, 0.3};
    const auto m = DesignMeasure::normalized(space, w);
    std::vector<double> mirrored(w.rbegin(), w.rend());
    const auto mm = DesignMeasure::normalized(space, mirrored);
    const auto r1 = loss_fixed_sigma(m, Basis::polynomial(2), sigma, {});
    const auto r2 = loss_fixed_sigma(mm, Basis::polynomial(2), sigma, {});
    REQUIRE(r1.total == Catch::Approx(r2.total).epsilon(1e-12));
}

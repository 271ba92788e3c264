#pragma once

#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/analytic.hpp"
#include "qrdesign/basis.hpp"
#include "qrdesign/errors.hpp"
#include "qrdesign/io.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/search.hpp"
#include "qrdesign/simulate.hpp"
#include "qrdesign/space.hpp"
#include "qrdesign/variance.hpp"

namespace qrdesign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverError = 3;

/** Stable human-readable list of the built-in presets. */
inline std::string list_presets_text() {
    std::ostringstream out;
    out << "knot presets:\n";
    for (const char* name : {"bestknots", "desknots"}) {
        const KnotPreset preset = knot_preset(name);
        out << "  " << name << " [" << io::format_double(preset.a) << ", "
            << io::format_double(preset.b) << "]:";
        for (double t : preset.internal) out << " " << io::format_double(t);
        out << "\n";
    }
    out << "sigma presets:\n";
    for (const auto& name : sigma_preset_names()) out << "  " << name << "\n";
    return out.str();
}

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_error(const std::string& field, const std::string& what) {
    throw InvalidArgument("config field '" + field + "': " + what);
}

inline const json& require(const json& j, const std::string& field) {
    const auto it = j.find(field);
    if (it == j.end()) config_error(field, "missing");
    return *it;
}

inline double number_in(const json& j, const std::string& field, double lo, double hi,
                        double fallback, bool required = false) {
    if (!j.contains(field)) {
        if (required) config_error(field, "missing");
        return fallback;
    }
    const json& v = j.at(field);
    if (!v.is_number()) config_error(field, "must be a number");
    const double x = v.get<double>();
    if (!(x >= lo && x <= hi))
        config_error(field, "value " + io::format_double(x) + " outside [" +
                                io::format_double(lo) + ", " + io::format_double(hi) + "]");
    return x;
}

inline std::int64_t integer_in(const json& j, const std::string& field, std::int64_t lo,
                               std::int64_t hi, std::int64_t fallback,
                               bool required = false) {
    if (!j.contains(field)) {
        if (required) config_error(field, "missing");
        return fallback;
    }
    const json& v = j.at(field);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        config_error(field, "must be an integer");
    const std::int64_t x = v.get<std::int64_t>();
    if (x < lo || x > hi)
        config_error(field, "value " + std::to_string(x) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return x;
}

inline DesignSpace space_from_json(const json& cfg) {
    const json& j = require(cfg, "space");
    const std::string kind = require(j, "kind").get<std::string>();
    try {
        if (kind == "discrete_grid") {
            const auto n = integer_in(j, "n_points", 2, 1000000, 0, true);
            const double a = number_in(j, "a", -1e12, 1e12, 0.0, true);
            const double b = number_in(j, "b", -1e12, 1e12, 0.0, true);
            return DesignSpace::discrete_grid(static_cast<std::size_t>(n), a, b);
        }
        if (kind == "discrete")
            return DesignSpace::discrete(require(j, "points").get<std::vector<double>>());
        if (kind == "continuous") {
            const double a = number_in(j, "a", -1e12, 1e12, 0.0, true);
            const double b = number_in(j, "b", -1e12, 1e12, 0.0, true);
            const auto nodes = integer_in(j, "nodes", 2, 1000000, 2001);
            return DesignSpace::continuous(a, b, static_cast<std::size_t>(nodes));
        }
    } catch (const InvalidArgument& e) {
        if (std::string(e.what()).rfind("config field", 0) == 0) throw;
        config_error("space", e.what());
    }
    config_error("space.kind", "must be discrete_grid, discrete, or continuous");
}

inline Basis basis_from_json(const json& cfg) {
    const json& j = require(cfg, "basis");
    const std::string kind = require(j, "kind").get<std::string>();
    try {
        if (kind == "polynomial") {
            const auto deg = integer_in(j, "degree", 0, 64, 0, true);
            return Basis::polynomial(static_cast<int>(deg));
        }
        if (kind == "bspline") {
            if (j.contains("preset"))
                return spline_from_preset(j.at("preset").get<std::string>());
            const double a = number_in(j, "a", -1e12, 1e12, 0.0, true);
            const double b = number_in(j, "b", -1e12, 1e12, 0.0, true);
            return Basis::cubic_bspline(
                a, b, require(j, "internal_knots").get<std::vector<double>>());
        }
    } catch (const InvalidArgument& e) {
        if (std::string(e.what()).rfind("config field", 0) == 0) throw;
        config_error("basis", e.what());
    }
    config_error("basis.kind", "must be polynomial or bspline");
}

inline FixedSigma sigma_from_json(const json& cfg, const DesignSpace& space) {
    if (!cfg.contains("sigma")) return sigma_preset("constant", space);
    const json& j = cfg.at("sigma");
    try {
        if (j.contains("preset")) return sigma_preset(j.at("preset").get<std::string>(), space);
        if (j.contains("values"))
            return FixedSigma::from_values(space, j.at("values").get<std::vector<double>>());
    } catch (const InvalidArgument& e) {
        config_error("sigma", e.what());
    }
    config_error("sigma", "must provide 'preset' or 'values'");
}

inline std::vector<double> nu_grid_from_json(const json& cfg) {
    if (!cfg.contains("nu_grid")) {
        std::vector<double> grid;
        for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
        return grid;
    }
    auto grid = cfg.at("nu_grid").get<std::vector<double>>();
    for (double nu : grid)
        if (!(nu >= 0.0 && nu <= 1.0)) config_error("nu_grid", "entries must lie in [0, 1]");
    return grid;
}

/** Apply one `path.to.key=value` override; value parsed as JSON if possible. */
inline void apply_override(json& cfg, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0)
        config_error("--set", "override must look like key.path=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string raw = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::exception&) {
        value = raw; // plain string
    }
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (key.empty()) config_error("--set", "empty key segment in: " + spec);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

struct TaskOutput {
    double total = std::numeric_limits<double>::quiet_NaN();
    bool has_total = false;
};

inline void write_measure_artifacts(const std::filesystem::path& dir,
                                    const DesignMeasure& measure,
                                    const std::vector<std::pair<std::string, std::string>>&
                                        comments = {}) {
    io::write_text_file((dir / "design.csv").string(), io::measure_to_csv(measure, comments));
    io::write_text_file((dir / "design.json").string(), io::measure_to_json(measure).dump(2) + "\n");
}

inline void write_loss_artifacts(const std::filesystem::path& dir, const LossReport& report) {
    io::write_text_file((dir / "loss.json").string(), io::loss_report_to_json(report).dump(2) + "\n");
}

inline void write_curve_artifact(const std::filesystem::path& dir, const std::string& name,
                                 const DesignMeasure& measure, const Basis& basis,
                                 const FixedSigma& sigma, const std::vector<double>& nu_grid) {
    const auto curve = mse_vs_nu_curve(measure, basis, sigma, nu_grid);
    io::write_text_file((dir / "curve.csv").string(), io::curves_to_csv({{name, curve}}));
}

inline TaskOutput run_task(const json& cfg, const std::string& task,
                           const std::filesystem::path& out_dir) {
    TaskOutput out;
    LossConfig loss_config;
    loss_config.nu = number_in(cfg, "nu", 0.0, 1.0, 0.5);
    loss_config.tau = number_in(cfg, "tau", 1e-12, 1.0 - 1e-12, 0.5);
    if (!(loss_config.tau > 0.0 && loss_config.tau < 1.0))
        config_error("tau", "must lie strictly in (0, 1)");

    if (task == "loss") {
        const DesignSpace space = space_from_json(cfg);
        const Basis basis = basis_from_json(cfg);
        DesignMeasure measure = [&]() {
            if (cfg.contains("measure_csv"))
                return io::measure_from_csv(
                    io::read_text_file(cfg.at("measure_csv").get<std::string>()));
            if (cfg.contains("measure")) return io::measure_from_json(cfg.at("measure"));
            return uniform_design(space);
        }();
        if (!(measure.space() == space))
            config_error("measure", "measure points do not match the configured space");
        if (cfg.contains("sigma") && cfg.at("sigma").contains("class_r")) {
            const double r = number_in(cfg.at("sigma"), "class_r", 0.0, 2.0, 1.0);
            const LossReport report = loss_sigma0_class(measure, basis, r, loss_config);
            write_loss_artifacts(out_dir, report);
            write_measure_artifacts(out_dir, measure);
            out.total = report.total;
            out.has_total = true;
            return out;
        }
        const FixedSigma sigma = sigma_from_json(cfg, space);
        const LossReport report = loss_fixed_sigma(measure, basis, sigma, loss_config);
        write_loss_artifacts(out_dir, report);
        write_measure_artifacts(out_dir, measure);
        write_curve_artifact(out_dir, "design", measure, basis, sigma, nu_grid_from_json(cfg));
        out.total = report.total;
        out.has_total = true;
        return out;
    }

    if (task == "minbias" || task == "uniform") {
        const DesignSpace space = space_from_json(cfg);
        const Basis basis = basis_from_json(cfg);
        const FixedSigma sigma = sigma_from_json(cfg, space);
        DesignMeasure measure =
            task == "minbias" ? minbias_design(sigma) : uniform_design(space);
        const LossReport report = loss_fixed_sigma(measure, basis, sigma, loss_config);
        write_measure_artifacts(out_dir, measure);
        write_loss_artifacts(out_dir, report);
        write_curve_artifact(out_dir, task, measure, basis, sigma, nu_grid_from_json(cfg));
        out.total = report.total;
        out.has_total = true;
        return out;
    }

    if (task == "straightline") {
        const DesignSpace space = space_from_json(cfg);
        const FixedSigma sigma = sigma_from_json(cfg, space);
        VariationalOptions options;
        options.seed = static_cast<std::uint64_t>(
            integer_in(cfg, "rng_seed", 0, std::numeric_limits<std::int64_t>::max(), 1729));
        const StraightLineSolution sol =
            solve_straight_line_discrete(space, sigma, loss_config, options);
        write_measure_artifacts(out_dir, sol.design);
        write_loss_artifacts(out_dir, sol.report);
        nlohmann::json mult;
        mult["lambda"] = {sol.multipliers.lambda[0], sol.multipliers.lambda[1],
                          sol.multipliers.lambda[2]};
        mult["branch"] = to_string(sol.multipliers.branch);
        mult["gamma0"] = sol.multipliers.gamma0;
        mult["gamma1"] = sol.multipliers.gamma1;
        mult["kappa1"] = sol.multipliers.kappa1;
        mult["kappa2"] = sol.multipliers.kappa2;
        mult["omega1"] = sol.multipliers.omega1;
        mult["omega2"] = sol.multipliers.omega2;
        io::write_text_file((out_dir / "multipliers.json").string(), mult.dump(2) + "\n");
        write_curve_artifact(out_dir, "straightline", sol.design, Basis::polynomial(1), sigma,
                             nu_grid_from_json(cfg));
        out.total = sol.report.total;
        out.has_total = true;
        return out;
    }

    if (task == "quadratic") {
        const DesignSpace space = space_from_json(cfg);
        const FixedSigma sigma = sigma_from_json(cfg, space);
        VariationalOptions options;
        options.seed = static_cast<std::uint64_t>(
            integer_in(cfg, "rng_seed", 0, std::numeric_limits<std::int64_t>::max(), 1729));
        const QuadraticSolution sol = solve_quadratic_continuous(sigma, loss_config, options);
        write_measure_artifacts(out_dir, sol.design);
        write_loss_artifacts(out_dir, sol.report);
        nlohmann::json params;
        params["a"] = sol.params.a;
        params["normalization_mode"] = sol.params.normalization_mode;
        io::write_text_file((out_dir / "params.json").string(), params.dump(2) + "\n");
        out.total = sol.report.total;
        out.has_total = true;
        return out;
    }

    if (task == "compound") {
        const DesignSpace space = space_from_json(cfg);
        const Basis basis = basis_from_json(cfg);
        const auto n = static_cast<std::size_t>(
            integer_in(cfg, "n", 1, 100000000, 0, true));
        const bool symmetric = cfg.value("symmetric", true);
        const CompoundDesign design =
            exchange_compound(space, basis, n, loss_config.nu, symmetric);
        const DesignMeasure measure = design.measure(space);
        write_measure_artifacts(
            out_dir, measure,
            {{"task", "compound"}, {"k_star", std::to_string(design.k_star)}});
        io::write_text_file((out_dir / "compound.json").string(),
                            io::compound_to_json(design).dump(2) + "\n");
        std::vector<double> run_points;
        for (std::size_t i = 0; i < design.support.size(); ++i) {
            const int reps = design.replication.empty() ? 1 : design.replication[i];
            for (int r = 0; r < reps; ++r)
                run_points.push_back(space.points()[design.support[i]]);
        }
        io::write_text_file((out_dir / "points.txt").string(), io::points_to_text(run_points));
        write_loss_artifacts(out_dir, design.loss);
        out.total = design.loss.total;
        out.has_total = true;
        return out;
    }

    if (task == "ga") {
        const DesignSpace space = space_from_json(cfg);
        const Basis basis = basis_from_json(cfg);
        const FixedSigma sigma = sigma_from_json(cfg, space);
        const auto n = static_cast<std::size_t>(integer_in(cfg, "n", 1, 1000000, 0, true));
        GAConfig ga;
        if (cfg.contains("ga")) {
            const json& g = cfg.at("ga");
            ga.population_size =
                static_cast<int>(integer_in(g, "population_size", 2, 100000, 40));
            ga.elite_fraction = number_in(g, "elite_fraction", 1e-9, 1.0 - 1e-9, 0.10);
            ga.mutation_probability = number_in(g, "mutation_probability", 0.0, 1.0, 0.02);
            ga.stall_limit = static_cast<int>(integer_in(g, "stall_limit", 1, 1000000, 1000));
            ga.max_generations =
                static_cast<int>(integer_in(g, "max_generations", 0, 100000000, 0));
        }
        ga.rng_seed = static_cast<std::uint64_t>(
            integer_in(cfg, "rng_seed", 0, std::numeric_limits<std::int64_t>::max(), 1729));
        const auto seeds = ga_default_seeds(space, basis, sigma, n);
        const GAResult result = ga_minimax(space, basis, sigma, loss_config.nu, n, seeds, ga);
        write_measure_artifacts(out_dir, result.design);
        write_loss_artifacts(out_dir, result.report);
        io::write_text_file((out_dir / "trace.csv").string(), io::trace_to_csv(result.trace));
        io::write_text_file((out_dir / "points.txt").string(),
                            io::points_to_text(implement_design(result.design, n)));
        out.total = result.report.total;
        out.has_total = true;
        return out;
    }

    if (task == "saturated") {
        const DesignSpace space = space_from_json(cfg);
        const Basis basis = basis_from_json(cfg);
        const FixedSigma sigma = sigma_from_json(cfg, space);
        const DesignMeasure measure = saturated_design(basis, space);
        const LossReport report = loss_fixed_sigma(measure, basis, sigma, loss_config);
        write_measure_artifacts(out_dir, measure);
        write_loss_artifacts(out_dir, report);
        out.total = report.total;
        out.has_total = true;
        return out;
    }

    if (task == "scenario") {
        ScenarioConfig scenario = ScenarioConfig::standard();
        std::size_t space_points = 1799;
        double a = 0.0, b = 18.0;
        double nu0 = 0.5;
        GAConfig ga;
        ga.stall_limit = 200;
        if (cfg.contains("scenario")) {
            const json& s = cfg.at("scenario");
            if (s.contains("sigma_preset"))
                scenario.sigma_preset = s.at("sigma_preset").get<std::string>();
            scenario.sigma_y_scale = number_in(s, "sigma_y_scale", 0.0, 1e12, 1.0);
            scenario.n = static_cast<std::size_t>(integer_in(s, "n", 4, 1000000, 200));
            scenario.replications =
                static_cast<int>(integer_in(s, "replications", 1, 1000000, 100));
            if (s.contains("taus")) scenario.taus = s.at("taus").get<std::vector<double>>();
            space_points =
                static_cast<std::size_t>(integer_in(s, "space_points", 16, 1000000, 1799));
            a = number_in(s, "a", -1e12, 1e12, 0.0);
            b = number_in(s, "b", -1e12, 1e12, 18.0);
            nu0 = number_in(s, "nu0", 0.0, 1.0, 0.5);
            ga.stall_limit =
                static_cast<int>(integer_in(s, "ga_stall_limit", 1, 1000000, 200));
        }
        scenario.rng_seed = static_cast<std::uint64_t>(
            integer_in(cfg, "rng_seed", 0, std::numeric_limits<std::int64_t>::max(), 1729));
        ga.rng_seed = scenario.rng_seed;
        const DesignSpace space = DesignSpace::discrete_grid(space_points, a, b);
        const FixedSigma sigma = sigma_preset(scenario.sigma_preset, space);
        const Basis& basis = scenario.fit_basis;

        std::vector<std::pair<std::string, std::vector<double>>> designs;
        designs.emplace_back("saturated",
                             implement_design(saturated_design(basis, space), scenario.n));
        designs.emplace_back("uniform",
                             implement_design(uniform_design(space), scenario.n));
        designs.emplace_back("minbias",
                             implement_design(minbias_design(sigma), scenario.n));
        const auto seeds = ga_default_seeds(space, basis, sigma, scenario.n);
        const GAResult minimax = ga_minimax(space, basis, sigma, nu0, scenario.n, seeds, ga);
        designs.emplace_back("minimax", implement_design(minimax.design, scenario.n));

        const ScenarioResult result = run_scenario(scenario, space, designs);
        io::write_text_file((out_dir / "table.csv").string(),
                            io::scenario_table_to_csv(result.table));
        io::write_text_file((out_dir / "curves.csv").string(),
                            io::curves_to_csv(result.loss_curves));
        for (const auto& [name, xs] : designs)
            io::write_text_file((out_dir / ("design_" + name + ".txt")).string(),
                                io::points_to_text(xs));
        out.total = minimax.report.total;
        out.has_total = true;
        return out;
    }

    config_error("task",
                 "must be one of loss, minbias, uniform, straightline, quadratic, "
                 "compound, ga, saturated, scenario");
}

} // namespace detail

/**
 * Run a JSON task configuration with optional `key.path=value` overrides.
 * Returns 0 on success, 2 on configuration errors (message names the
 * offending field), 3 on solver failures.
 */
inline int run_config_file(const std::string& config_path,
                           const std::vector<std::string>& overrides, std::ostream& out,
                           std::ostream& err) {
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(io::read_text_file(config_path));
    } catch (const nlohmann::json::exception& e) {
        err << "config error: cannot parse " << config_path << ": " << e.what() << "\n";
        return kExitConfigError;
    } catch (const Error& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }

    try {
        for (const auto& ov : overrides) detail::apply_override(cfg, ov);
        if (!cfg.is_object()) detail::config_error("<root>", "config must be a JSON object");
        const std::string task = detail::require(cfg, "task").get<std::string>();
        const std::string out_dir_name = cfg.value("output_dir", std::string("out"));
        const std::filesystem::path out_dir(out_dir_name);
        std::filesystem::create_directories(out_dir);
        const detail::TaskOutput result = detail::run_task(cfg, task, out_dir);
        out << "task=" << task << " total="
            << (result.has_total ? io::format_double(result.total) : std::string("na"))
            << " out=" << out_dir_name << "\n";
        return kExitOk;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const InvalidArgument& e) {
        err << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const Error& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolverError;
    } catch (const std::exception& e) {
        err << "solver error: " << e.what() << "\n";
        return kExitSolverError;
    }
}

} // namespace qrdesign::cli

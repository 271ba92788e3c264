#pragma once

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/errors.hpp"
#include "qrdesign/loss.hpp"
#include "qrdesign/search.hpp"
#include "qrdesign/simulate.hpp"
#include "qrdesign/space.hpp"

namespace qrdesign::io {

/** Shortest decimal string that round-trips the double exactly. */
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/**
 * Design measure as CSV: optional `# key=value` comment lines, a
 * `x,weight` (discrete) or `x,density` (continuous) header, then one row
 * per space point with full 17-digit precision.
 */
inline std::string measure_to_csv(const DesignMeasure& measure,
                                  const std::vector<std::pair<std::string, std::string>>&
                                      comments = {}) {
    std::ostringstream out;
    out << "# kind=" << (measure.kind() == SpaceKind::Discrete ? "discrete" : "continuous")
        << "\n";
    for (const auto& [k, v] : comments) out << "# " << k << "=" << v << "\n";
    out << (measure.kind() == SpaceKind::Discrete ? "x,weight" : "x,density") << "\n";
    const auto& xs = measure.space().points();
    const auto& vs = measure.values();
    for (std::size_t i = 0; i < xs.size(); ++i)
        out << format_double(xs[i]) << "," << format_double(vs[i]) << "\n";
    return out.str();
}

/** Parse a measure CSV produced by measure_to_csv (comments tolerated). */
inline DesignMeasure measure_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    bool continuous = false;
    std::vector<double> xs, vs;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.front() == '#') {
            if (line.find("kind=continuous") != std::string::npos) continuous = true;
            continue;
        }
        if (!header_seen) {
            header_seen = true; // column header row
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw InvalidArgument("measure_from_csv: malformed row: " + line);
        try {
            xs.push_back(std::stod(line.substr(0, comma)));
            vs.push_back(std::stod(line.substr(comma + 1)));
        } catch (const std::exception&) {
            throw InvalidArgument("measure_from_csv: non-numeric row: " + line);
        }
    }
    if (xs.size() < 2) throw InvalidArgument("measure_from_csv: fewer than two rows");
    if (continuous)
        return DesignMeasure::continuous(DesignSpace::continuous_nodes(xs), std::move(vs));
    return DesignMeasure::discrete(DesignSpace::discrete(xs), std::move(vs));
}

inline nlohmann::json measure_to_json(const DesignMeasure& measure) {
    nlohmann::json j;
    j["kind"] = measure.kind() == SpaceKind::Discrete ? "discrete" : "continuous";
    j["points"] = measure.space().points();
    j["values"] = measure.values();
    return j;
}

inline DesignMeasure measure_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    std::vector<double> pts = j.at("points").get<std::vector<double>>();
    std::vector<double> vals = j.at("values").get<std::vector<double>>();
    if (kind == "continuous")
        return DesignMeasure::continuous(DesignSpace::continuous_nodes(std::move(pts)),
                                         std::move(vals));
    if (kind == "discrete")
        return DesignMeasure::discrete(DesignSpace::discrete(std::move(pts)),
                                       std::move(vals));
    throw InvalidArgument("measure_from_json: unknown kind '" + kind + "'");
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json loss_report_to_json(const LossReport& report) {
    nlohmann::json j;
    j["variance_term"] = report.variance_term;
    j["bias_term"] = report.bias_term;
    j["nu"] = report.nu;
    j["total"] = report.total;
    j["moments"] = {{"A", matrix_to_json(report.moments.A)},
                    {"T00", matrix_to_json(report.moments.T00)},
                    {"T01", matrix_to_json(report.moments.T01)},
                    {"T02", matrix_to_json(report.moments.T02)},
                    {"T0", matrix_to_json(report.moments.T0)},
                    {"T2", matrix_to_json(report.moments.T2)}};
    return j;
}

/** Loss-versus-nu curves, one row per (nu, design) pair. */
inline std::string curves_to_csv(
    const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>&
        curves) {
    std::ostringstream out;
    out << "nu,design,loss\n";
    for (const auto& [name, curve] : curves)
        for (const auto& [nu, loss] : curve)
            out << format_double(nu) << "," << name << "," << format_double(loss) << "\n";
    return out.str();
}

inline std::string trace_to_csv(const std::vector<double>& trace) {
    std::ostringstream out;
    out << "generation,best_fitness\n";
    for (std::size_t g = 0; g < trace.size(); ++g)
        out << g << "," << format_double(trace[g]) << "\n";
    return out.str();
}

inline std::string scenario_table_to_csv(const std::vector<ScenarioCell>& table) {
    std::ostringstream out;
    out << "tau,design,rmse_mean,rmse_se\n";
    for (const auto& cell : table)
        out << format_double(cell.tau) << "," << cell.design << ","
            << format_double(cell.rmse_mean) << "," << format_double(cell.rmse_se) << "\n";
    return out.str();
}

inline std::string points_to_text(const std::vector<double>& points) {
    std::ostringstream out;
    for (double x : points) out << format_double(x) << "\n";
    return out.str();
}

inline nlohmann::json compound_to_json(const CompoundDesign& design) {
    nlohmann::json j;
    j["support"] = design.support;
    j["k_star"] = design.k_star;
    j["replication"] = design.replication;
    j["loss"] = loss_report_to_json(design.loss);
    return j;
}

} // namespace qrdesign::io

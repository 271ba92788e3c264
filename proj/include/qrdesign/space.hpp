#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qrdesign/errors.hpp"

namespace qrdesign {

enum class SpaceKind { Discrete, Continuous };

/**
 * The set of admissible observation abscissae.
 *
 * Discrete spaces hold the N admissible points themselves.  Continuous
 * spaces are an interval [a, b] represented by a fixed quadrature grid of
 * equispaced nodes (trapezoid rule); densities and integrals are evaluated
 * on that grid.  Points are strictly increasing in both cases.
 */
class DesignSpace {
public:
    static DesignSpace discrete(std::vector<double> points) {
        return DesignSpace(SpaceKind::Discrete, std::move(points));
    }

    /** N equispaced admissible points spanning [a, b]. */
    static DesignSpace discrete_grid(std::size_t n_points, double a, double b) {
        return DesignSpace(SpaceKind::Discrete, grid(n_points, a, b));
    }

    /** Interval [a, b] carried on an equispaced quadrature grid. */
    static DesignSpace continuous(double a, double b, std::size_t nodes = 2001) {
        return DesignSpace(SpaceKind::Continuous, grid(nodes, a, b));
    }

    /** Interval carried on an explicit (possibly non-equispaced) node grid. */
    static DesignSpace continuous_nodes(std::vector<double> nodes) {
        return DesignSpace(SpaceKind::Continuous, std::move(nodes));
    }

    SpaceKind kind() const { return kind_; }
    const std::vector<double>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double lower() const { return points_.front(); }
    double upper() const { return points_.back(); }
    double length() const { return upper() - lower(); }

    /**
     * Trapezoid quadrature weights over the node grid (continuous spaces).
     */
    std::vector<double> quad_weights() const {
        if (kind_ != SpaceKind::Continuous)
            throw InvalidArgument("quad_weights: space is not continuous");
        const std::size_t n = points_.size();
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double h = 0.5 * (points_[i + 1] - points_[i]);
            w[i] += h;
            w[i + 1] += h;
        }
        return w;
    }

    /** True when the point set is closed under negation. */
    bool is_symmetric(double tol = 1e-12) const {
        const std::size_t n = points_.size();
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(points_[i] + points_[n - 1 - i]) > tol) return false;
        return true;
    }

    /** Index of the mirror point -x[i] (requires a symmetric space). */
    std::size_t mirror_index(std::size_t i) const { return points_.size() - 1 - i; }

    friend bool operator==(const DesignSpace& a, const DesignSpace& b) {
        return a.kind_ == b.kind_ && a.points_ == b.points_;
    }

private:
    DesignSpace(SpaceKind kind, std::vector<double> points)
        : kind_(kind), points_(std::move(points)) {
        if (points_.size() < 2)
            throw InvalidArgument("DesignSpace: at least two points required");
        for (std::size_t i = 0; i + 1 < points_.size(); ++i)
            if (!(points_[i] < points_[i + 1]))
                throw InvalidArgument("DesignSpace: points must be strictly increasing");
        for (double x : points_)
            if (!std::isfinite(x))
                throw InvalidArgument("DesignSpace: points must be finite");
    }

    static std::vector<double> grid(std::size_t n, double a, double b) {
        if (n < 2) throw InvalidArgument("DesignSpace: grid needs at least two nodes");
        if (!(a < b)) throw InvalidArgument("DesignSpace: lower bound must be below upper");
        std::vector<double> xs(n);
        const double h = (b - a) / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; ++i) xs[i] = a + h * static_cast<double>(i);
        xs.front() = a;
        xs.back() = b;
        return xs;
    }

    SpaceKind kind_;
    std::vector<double> points_;
};

/**
 * A probability measure over a design space.
 *
 * Discrete: values are point masses on the space's points, nonnegative and
 * summing to one.  Continuous: values are a density sampled at the space's
 * quadrature nodes, nonnegative with trapezoid integral one.  Values are
 * stored exactly as given (validated, never silently rescaled), so writing
 * and re-reading a measure preserves every digit.
 */
class DesignMeasure {
public:
    static constexpr double kMassTolerance = 1e-8;

    static DesignMeasure discrete(const DesignSpace& space, std::vector<double> weights) {
        if (space.kind() != SpaceKind::Discrete)
            throw InvalidArgument("DesignMeasure::discrete: space is not discrete");
        return DesignMeasure(space, std::move(weights));
    }

    static DesignMeasure continuous(const DesignSpace& space, std::vector<double> density) {
        if (space.kind() != SpaceKind::Continuous)
            throw InvalidArgument("DesignMeasure::continuous: space is not continuous");
        return DesignMeasure(space, std::move(density));
    }

    /** Rescale nonnegative raw values to total mass one, then validate. */
    static DesignMeasure normalized(const DesignSpace& space, std::vector<double> raw) {
        double total = 0.0;
        if (space.kind() == SpaceKind::Discrete) {
            for (double v : raw) total += v;
        } else {
            const auto w = space.quad_weights();
            if (raw.size() != w.size())
                throw InvalidArgument("DesignMeasure::normalized: size mismatch");
            for (std::size_t i = 0; i < raw.size(); ++i) total += w[i] * raw[i];
        }
        if (!(total > 0.0) || !std::isfinite(total))
            throw InvalidArgument("DesignMeasure::normalized: total mass must be positive");
        for (double& v : raw) v /= total;
        return DesignMeasure(space, std::move(raw));
    }

    const DesignSpace& space() const { return space_; }
    SpaceKind kind() const { return space_.kind(); }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    /** Total mass: weight sum (discrete) or trapezoid integral (continuous). */
    double total_mass() const {
        if (kind() == SpaceKind::Discrete) {
            double s = 0.0;
            for (double v : values_) s += v;
            return s;
        }
        const auto w = space_.quad_weights();
        double s = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) s += w[i] * values_[i];
        return s;
    }

    /** Indices carrying strictly positive weight (or density). */
    std::vector<std::size_t> support_indices() const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < values_.size(); ++i)
            if (values_[i] > 0.0) idx.push_back(i);
        return idx;
    }

    std::size_t support_size() const { return support_indices().size(); }

    /**
     * Cumulative distribution at each grid point.  Discrete: running weight
     * sum.  Continuous: cumulative trapezoid integral of the density.
     */
    std::vector<double> cdf() const {
        const auto& xs = space_.points();
        std::vector<double> c(values_.size(), 0.0);
        if (kind() == SpaceKind::Discrete) {
            double run = 0.0;
            for (std::size_t i = 0; i < values_.size(); ++i) {
                run += values_[i];
                c[i] = run;
            }
        } else {
            for (std::size_t i = 1; i < values_.size(); ++i)
                c[i] = c[i - 1] +
                       0.5 * (values_[i - 1] + values_[i]) * (xs[i] - xs[i - 1]);
        }
        return c;
    }

    /**
     * Generalized inverse CDF: the smallest admissible x with CDF(x) >= u.
     *
     * Discrete measures return a grid point.  Continuous measures invert
     * the piecewise-linear interpolant of the cumulative trapezoid
     * integral.  Ties resolve toward the smaller abscissa.
     */
    double quantile(double u) const {
        const auto& xs = space_.points();
        const auto c = cdf();
        const double slack = 1e-12;
        if (u <= slack) {
            if (kind() == SpaceKind::Discrete) {
                for (std::size_t i = 0; i < c.size(); ++i)
                    if (values_[i] > 0.0) return xs[i];
                return xs.front();
            }
            return xs.front();
        }
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (c[i] >= u - slack) {
                if (kind() == SpaceKind::Discrete) return xs[i];
                if (i == 0) return xs[0];
                const double span = c[i] - c[i - 1];
                if (span <= 0.0) return xs[i - 1];
                const double t = std::clamp((u - c[i - 1]) / span, 0.0, 1.0);
                return xs[i - 1] + t * (xs[i] - xs[i - 1]);
            }
        }
        return xs.back();
    }

private:
    DesignMeasure(const DesignSpace& space, std::vector<double> values)
        : space_(space), values_(std::move(values)) {
        if (values_.size() != space_.size())
            throw InvalidArgument("DesignMeasure: one value per space point required");
        for (double v : values_)
            if (!std::isfinite(v) || v < -1e-12)
                throw InvalidArgument("DesignMeasure: values must be finite and nonnegative");
        const double mass = total_mass();
        if (std::abs(mass - 1.0) > kMassTolerance)
            throw InvalidArgument("DesignMeasure: total mass " + std::to_string(mass) +
                                  " is not 1 within " + std::to_string(kMassTolerance));
    }

    DesignSpace space_;
    std::vector<double> values_;
};

/**
 * Draw an n-point implementation of a design measure.
 *
 * Point i (1-based) is placed at the generalized inverse CDF evaluated at
 * (i - 1/2) / n, i.e. at the centers of n equal probability slices, so the
 * empirical distribution of the result tracks the measure to within 1/(2n)
 * in Kolmogorov distance plus the grid resolution.  Output is sorted.
 */
inline std::vector<double> implement_design(const DesignMeasure& measure, std::size_t n) {
    if (n == 0) throw InvalidArgument("implement_design: n must be positive");
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i)
        xs[i] = measure.quantile((static_cast<double>(i) + 0.5) / static_cast<double>(n));
    std::sort(xs.begin(), xs.end());
    return xs;
}

} // namespace qrdesign

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "qrdesign/errors.hpp"
#include "qrdesign/space.hpp"

namespace qrdesign {

/**
 * A known standard-deviation profile sigma(x) sampled on a design space.
 *
 * Values are strictly positive and carry the scale normalization used by
 * every loss in this library: the mean of sigma^2 over a discrete space is
 * one, and the integral of sigma^2 over a continuous space is one.  The
 * normalization is applied on construction.
 */
class FixedSigma {
public:
    template <class F>
    static FixedSigma from_function(const DesignSpace& space, F&& f) {
        std::vector<double> v(space.size());
        for (std::size_t i = 0; i < space.size(); ++i)
            v[i] = static_cast<double>(f(space.points()[i]));
        return from_values(space, std::move(v));
    }

    static FixedSigma from_values(const DesignSpace& space, std::vector<double> raw) {
        if (raw.size() != space.size())
            throw InvalidArgument("FixedSigma: one value per space point required");
        for (double v : raw)
            if (!std::isfinite(v) || v <= 0.0)
                throw InvalidArgument("FixedSigma: values must be finite and positive");
        double second_moment = 0.0;
        if (space.kind() == SpaceKind::Discrete) {
            for (double v : raw) second_moment += v * v;
            second_moment /= static_cast<double>(space.size());
        } else {
            const auto w = space.quad_weights();
            for (std::size_t i = 0; i < raw.size(); ++i)
                second_moment += w[i] * raw[i] * raw[i];
        }
        const double scale = 1.0 / std::sqrt(second_moment);
        for (double& v : raw) v *= scale;
        return FixedSigma(space, std::move(raw));
    }

    const DesignSpace& space() const { return space_; }
    const std::vector<double>& values() const { return values_; }
    double at(std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    /** Mean of sigma^2 (discrete) or integral of sigma^2 (continuous); one by construction. */
    double second_moment() const {
        double s = 0.0;
        if (space_.kind() == SpaceKind::Discrete) {
            for (double v : values_) s += v * v;
            return s / static_cast<double>(values_.size());
        }
        const auto w = space_.quad_weights();
        for (std::size_t i = 0; i < values_.size(); ++i) s += w[i] * values_[i] * values_[i];
        return s;
    }

    /** True when sigma(x) = sigma(-x) on a symmetric space. */
    bool is_symmetric(double tol = 1e-10) const {
        const std::size_t n = values_.size();
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(values_[i] - values_[n - 1 - i]) > tol) return false;
        return true;
    }

private:
    FixedSigma(const DesignSpace& space, std::vector<double> values)
        : space_(space), values_(std::move(values)) {}

    DesignSpace space_;
    std::vector<double> values_;
};

/**
 * The unknown-scale variance class indexed by exponent r in [0, 2]:
 * sigma(x) proportional to the design's own weight (or density) raised to
 * the power r/2 on its support.  Only the exponent is stored; the
 * proportionality constant is pinned by the same normalization as
 * FixedSigma and depends on the design it is paired with.
 */
struct Sigma0Class {
    double r = 1.0;
};

using VarianceSpec = std::variant<FixedSigma, Sigma0Class>;

/** Names of the shipped sigma profiles, in listing order. */
inline const std::vector<std::string>& sigma_preset_names() {
    static const std::vector<std::string> names = {
        "reciprocal", "constant", "vee", "bowl", "case_vee", "case_reciprocal"};
    return names;
}

/** The raw (pre-normalization) profile behind a named sigma preset. */
inline std::function<double(double)> sigma_preset_profile(std::string_view name) {
    if (name == "reciprocal") return [](double x) { return 1.0 / (1.0 + std::abs(x)); };
    if (name == "constant") return [](double) { return 1.0; };
    if (name == "vee") return [](double x) { return 0.2 + std::abs(x); };
    if (name == "bowl") return [](double x) { return 1.0 + 0.25 * x * x; };
    if (name == "case_vee") return [](double x) { return 0.2 + x; };
    if (name == "case_reciprocal") return [](double x) { return 1.0 / (1.0 + x); };
    throw InvalidArgument("sigma_preset_profile: unknown preset '" + std::string(name) + "'");
}

/** Normalized sigma preset sampled on a space. */
inline FixedSigma sigma_preset(std::string_view name, const DesignSpace& space) {
    return FixedSigma::from_function(space, sigma_preset_profile(name));
}

} // namespace qrdesign

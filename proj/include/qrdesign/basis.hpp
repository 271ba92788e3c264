#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qrdesign/errors.hpp"
#include "qrdesign/linalg.hpp"

namespace qrdesign {

enum class BasisKind { Polynomial, CubicBSpline };

/**
 * Regressor vector f(x) for the linear quantile-regression model.
 *
 * Polynomial(d): f(x) = (1, x, ..., x^d), p = d + 1, defined on all of R.
 *
 * CubicBSpline([a,b], internal knots): the p = q + 4 clamped cubic
 * B-splines on [a, b] with q strictly increasing internal knots (knot
 * vector with both endpoints repeated four times).  Evaluation outside
 * [a, b] raises OutOfDomain.  Each spline is nonzero only between its
 * first and last knot, and the functions sum to one everywhere on [a, b].
 */
class Basis {
public:
    static Basis polynomial(int degree) {
        if (degree < 0) throw InvalidArgument("Basis::polynomial: degree must be >= 0");
        Basis b;
        b.kind_ = BasisKind::Polynomial;
        b.degree_ = degree;
        return b;
    }

    static Basis cubic_bspline(double a, double b, std::vector<double> internal_knots) {
        if (!(a < b)) throw InvalidArgument("Basis::cubic_bspline: need a < b");
        for (std::size_t i = 0; i < internal_knots.size(); ++i) {
            if (!(internal_knots[i] > a) || !(internal_knots[i] < b))
                throw InvalidArgument(
                    "Basis::cubic_bspline: internal knots must lie strictly inside (a, b)");
            if (i > 0 && !(internal_knots[i] > internal_knots[i - 1]))
                throw InvalidArgument(
                    "Basis::cubic_bspline: internal knots must be strictly increasing");
        }
        Basis out;
        out.kind_ = BasisKind::CubicBSpline;
        out.lo_ = a;
        out.hi_ = b;
        out.internal_ = std::move(internal_knots);
        out.knots_.assign(4, a);
        out.knots_.insert(out.knots_.end(), out.internal_.begin(), out.internal_.end());
        out.knots_.insert(out.knots_.end(), 4, b);
        return out;
    }

    BasisKind kind() const { return kind_; }
    bool is_polynomial() const { return kind_ == BasisKind::Polynomial; }
    bool is_spline() const { return kind_ == BasisKind::CubicBSpline; }

    /** Number of basis functions p. */
    int dim() const {
        return is_polynomial() ? degree_ + 1 : static_cast<int>(internal_.size()) + 4;
    }

    int degree() const {
        if (!is_polynomial()) throw InvalidArgument("Basis::degree: not a polynomial basis");
        return degree_;
    }

    double domain_lower() const { return require_spline("domain_lower"), lo_; }
    double domain_upper() const { return require_spline("domain_upper"), hi_; }
    const std::vector<double>& internal_knots() const {
        require_spline("internal_knots");
        return internal_;
    }

    Vector eval(double x) const {
        if (is_polynomial()) {
            Vector f(degree_ + 1);
            double v = 1.0;
            for (int k = 0; k <= degree_; ++k) {
                f[k] = v;
                v *= x;
            }
            return f;
        }
        if (!(x >= lo_ && x <= hi_))
            throw OutOfDomain("Basis::eval: x = " + std::to_string(x) +
                              " outside [" + std::to_string(lo_) + ", " +
                              std::to_string(hi_) + "]");
        return eval_spline(x);
    }

    Vector operator()(double x) const { return eval(x); }

private:
    Basis() = default;

    void require_spline(const char* who) const {
        if (!is_spline())
            throw InvalidArgument(std::string("Basis::") + who + ": not a spline basis");
    }

    /**
     * Cox-de Boor evaluation of the four cubic splines alive on the knot
     * span containing x; all other entries are exactly zero.
     */
    Vector eval_spline(double x) const {
        const int p = dim();
        Vector f = Vector::Zero(p);
        // Index of the rightmost knot <= x among spans [t_i, t_{i+1}),
        // restricted to nonempty spans; x == b uses the last nonempty span.
        const int last_span = static_cast<int>(knots_.size()) - 5; // == p - 1
        int span;
        if (x >= knots_[last_span + 1]) {
            span = last_span;
        } else {
            span = static_cast<int>(
                       std::upper_bound(knots_.begin() + 3, knots_.begin() + last_span + 1, x) -
                       knots_.begin()) -
                   1;
        }
        double n[4] = {1.0, 0.0, 0.0, 0.0};
        double left[4], right[4];
        for (int j = 1; j <= 3; ++j) {
            left[j] = x - knots_[span + 1 - j];
            right[j] = knots_[span + j] - x;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double denom = right[r + 1] + left[j - r];
                const double temp = denom != 0.0 ? n[r] / denom : 0.0;
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        for (int r = 0; r <= 3; ++r) {
            const int idx = span - 3 + r;
            if (idx >= 0 && idx < p) f[idx] = n[r];
        }
        return f;
    }

    BasisKind kind_ = BasisKind::Polynomial;
    int degree_ = 0;
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<double> internal_;
    std::vector<double> knots_;
};

inline Vector eval_basis(const Basis& basis, double x) { return basis.eval(x); }

namespace detail {

/** Golden-section maximization of a unimodal function on [lo, hi]. */
template <class F>
double golden_max(F&& f, double lo, double hi, double xtol) {
    const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > xtol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    const double mid = 0.5 * (a + b);
    // Prefer an exact endpoint when the bracket has collapsed onto one.
    if (std::abs(mid - lo) <= xtol) return lo;
    if (std::abs(hi - mid) <= xtol) return hi;
    return mid;
}

} // namespace detail

/**
 * Abscissa of the maximum of each spline basis function, in increasing
 * order.  Each cubic B-spline is unimodal on the interval between its
 * first and last knot, so the peak is located by golden-section search
 * (position tolerance xtol).
 */
inline std::vector<double> spline_peak_locations(const Basis& basis, double xtol = 1e-8) {
    if (!basis.is_spline())
        throw InvalidArgument("spline_peak_locations: basis is not a spline");
    const int p = basis.dim();
    const double a = basis.domain_lower();
    const double b = basis.domain_upper();
    std::vector<double> knots;
    knots.assign(4, a);
    const auto& internal = basis.internal_knots();
    knots.insert(knots.end(), internal.begin(), internal.end());
    knots.insert(knots.end(), 4, b);
    std::vector<double> peaks(p);
    for (int j = 0; j < p; ++j) {
        const double lo = knots[j];
        const double hi = knots[j + 4];
        peaks[j] = detail::golden_max(
            [&](double x) { return basis.eval(x)[j]; }, lo, hi, xtol);
    }
    std::sort(peaks.begin(), peaks.end());
    return peaks;
}

/** A named clamped-cubic-spline knot layout: domain plus internal knots. */
struct KnotPreset {
    double a;
    double b;
    std::vector<double> internal;
};

/**
 * Shipped knot layouts on [0, 18]:
 *   "bestknots" - 12 internal knots concentrated near the origin (p = 16),
 *   "desknots"  - 8 equispaced internal knots (p = 12).
 */
inline const KnotPreset& knot_preset(std::string_view name) {
    static const KnotPreset best{
        0.0, 18.0, {0.2, 0.5, 1.0, 1.5, 2.0, 5.0, 8.0, 10.0, 11.5, 13.0, 14.5, 16.0}};
    static const KnotPreset des{0.0, 18.0, {2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0}};
    if (name == "bestknots") return best;
    if (name == "desknots") return des;
    throw InvalidArgument("knot_preset: unknown preset '" + std::string(name) + "'");
}

inline Basis spline_from_preset(std::string_view name) {
    const KnotPreset& kp = knot_preset(name);
    return Basis::cubic_bspline(kp.a, kp.b, kp.internal);
}

} // namespace qrdesign

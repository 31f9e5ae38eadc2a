#pragma once

#include <cmath>
#include <limits>

#include "rsim/common.hpp"

namespace rsim {

/// Standard normal CDF via the error function.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.7071067811865475244); }

/// Normal distribution truncated to [lower, upper].
///
/// Used for the maximum-available-deceleration-rate model: braking capability
/// is normally distributed across the fleet but physically bounded.
struct TruncatedNormal {
    double mean = 8.45;
    double stddev = 1.40;
    double lower = 4.23;
    double upper = 12.68;

    void validate() const {
        if (!(stddev > 0.0)) throw DataError("truncated normal: stddev must be > 0");
        if (!(lower < upper)) throw DataError("truncated normal: lower must be < upper");
    }

    /// F(x) = (Phi(z(x)) - Phi(z(lower))) / (Phi(z(upper)) - Phi(z(lower))),
    /// clamped to 0 below the lower bound and 1 above the upper bound.
    double cdf(double x) const {
        validate();
        if (x <= lower) return 0.0;
        if (x >= upper) return 1.0;
        const double a = normal_cdf((lower - mean) / stddev);
        const double b = normal_cdf((upper - mean) / stddev);
        const double z = normal_cdf((x - mean) / stddev);
        return (z - a) / (b - a);
    }

    /// P(X > x) -- exceedance probability.
    double exceedance(double x) const { return 1.0 - cdf(x); }
};

namespace detail {

inline double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

// Continued fraction for the regularized incomplete beta, evaluated with the
// modified Lentz method. https://en.wikipedia.org/wiki/Beta_function
inline double beta_continued_fraction(double x, double a, double b) {
    const double tiny = 1e-300;
    const double eps = 1e-15;
    double c = 1.0;
    double d = 1.0 - (a + b) * x / (a + 1.0);
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double f = d;
    for (int m = 1; m <= 400; ++m) {
        const double m2 = 2.0 * m;
        // even step
        double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        f *= d * c;
        // odd step
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
        d = 1.0 + num * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + num / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        f *= delta;
        if (std::fabs(delta - 1.0) < eps) break;
    }
    return f;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b), absolute error well under 1e-10 for
/// the degrees of freedom used here.
inline double regularized_incomplete_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw DataError("incomplete beta: a and b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
    // use the symmetry I_x(a,b) = 1 - I_{1-x}(b,a) to keep the continued
    // fraction in its fast-converging region
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(x, a, b) / a;
    return 1.0 - std::exp(b * std::log1p(-x) + a * std::log(x) - detail::log_beta(b, a)) *
                     detail::beta_continued_fraction(1.0 - x, b, a) / b;
}

}  // namespace rsim

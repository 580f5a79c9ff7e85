#pragma once

#include <cmath>
#include <limits>

namespace misspec {

inline constexpr double kLog2Pi = 1.8378770664093454836;

// Standard normal CDF via erfc; accurate over the full double range.
inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

inline double norm_logpdf(double x) {
    return -0.5 * (x * x + kLog2Pi);
}

inline double norm_pdf(double x) {
    return std::exp(norm_logpdf(x));
}

namespace detail {

// Acklam's rational approximation to the normal quantile (~1e-9 relative).
inline double norm_quantile_acklam(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;

    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

// Inverse standard normal CDF. Acklam's approximation polished by one Halley
// step against the erfc-based CDF; relative error well below 1e-12 over
// (1e-8, 1 - 1e-8). Inputs outside [1e-16, 1 - 1e-16] are clamped.
inline double norm_quantile(double p) {
    const double pmin = 1e-16;
    if (p < pmin) p = pmin;
    if (p > 1.0 - 2.3e-16) p = 1.0 - 2.3e-16;

    double x = detail::norm_quantile_acklam(p);
    // Halley refinement: e = Phi(x) - p, u = e / phi(x).
    double e = norm_cdf(x) - p;
    double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

}  // namespace misspec

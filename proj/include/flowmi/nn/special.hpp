#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

#include "flowmi/error.hpp"

namespace flowmi::nn {

inline constexpr double kLnTwoPi = 1.8378770664093454835606594728112;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;

// Standard normal density.
inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double norm_logpdf(double x) { return -0.5 * (x * x + kLnTwoPi); }

// Standard normal CDF via erfc. Result is pinned strictly inside (0, 1) so
// callers can take logs or Gaussian quantiles of it for any finite input.
inline double norm_cdf(double x) {
    const double p = 0.5 * std::erfc(-x * 0.70710678118654752440084436210485);
    const double lo = std::numeric_limits<double>::min();
    const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0; // largest double < 1
    return std::clamp(p, lo, hi);
}

// Inverse standard normal CDF: rational approximation (Acklam) followed by
// one Newton step against norm_cdf.
inline double norm_icdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw flowmi::DomainError("norm_icdf: p must lie strictly in (0,1)");

    static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,  -2.759285104469687e+02,
                                    1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                    6.680131188771972e+01, -1.328068155288572e+01};
    static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                    -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                    3.754408661907416e+00};
    static constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    const double err = norm_cdf(x) - p;
    x -= err / norm_pdf(x);
    return x;
}

// ln sum_i exp(t_i), max-shifted.
inline double log_sum_exp(std::span<const double> terms) {
    if (terms.empty()) throw flowmi::DomainError("log_sum_exp: empty input");
    double m = terms[0];
    for (double t : terms) m = std::max(m, t);
    if (!std::isfinite(m)) return m; // all -inf, or some +inf/NaN: nothing to stabilize
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

// scalar helpers shared with the generic (autodiff-capable) kernels
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double max2(double a, double b) { return a >= b ? a : b; }
inline double clamp_val(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

} // namespace flowmi::nn

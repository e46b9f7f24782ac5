#pragma once

// Shared test-side oracles. These deliberately avoid the library's own code
// paths: the normal CDF is recomputed by quadrature, derivatives by central
// finite differences, and inverses by bisection.

#include <cmath>
#include <functional>
#include <vector>

namespace testutil {

// Composite Simpson integration of the standard normal density on [a, b].
inline double normal_mass(double a, double b, int intervals = 8192) {
    auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * 3.14159265358979323846); };
    if (intervals % 2) ++intervals;
    const double h = (b - a) / intervals;
    double s = phi(a) + phi(b);
    for (int i = 1; i < intervals; ++i) s += phi(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

// Quadrature CDF: integrates from far in the left tail.
inline double quadrature_normal_cdf(double x) { return normal_mass(-14.0, x); }

// Bisection inverse of the quadrature CDF.
inline double bisect_normal_icdf(double p) {
    double lo = -14.0, hi = 14.0;
    for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
        const double mid = 0.5 * (lo + hi);
        (quadrature_normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// |a - b| <= tol * max(1, |a|, |b|); the absolute floor absorbs finite
// difference truncation noise near zero.
inline bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double variance_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.size() > 1 ? s / static_cast<double>(v.size() - 1) : 0.0;
}

} // namespace testutil

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "core.hpp"

namespace cpemd {

// Regularized incomplete gamma functions, series + continued fraction.
namespace detail {

inline double gamma_p_series(double a, double x) {
    double sum = 1.0 / a, term = sum;
    for (int k = 1; k < 500; ++k) {
        term *= x / (a + k);
        sum += term;
        if (std::abs(term) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

inline double gamma_q_contfrac(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
    for (int k = 1; k < 500; ++k) {
        double an = -k * (k - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace detail

// Q(a, x) = upper regularized incomplete gamma.
inline double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) throw input_error("gamma_q: bad arguments");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_contfrac(a, x);
}

// Survival p-value of a chi-squared statistic with `dof` degrees of freedom.
inline double chi_squared_pvalue(double stat, double dof) {
    return gamma_q(dof / 2.0, stat / 2.0);
}

// Pearson chi-squared test of observed counts against expected probabilities.
inline double chi_squared_uniformity_pvalue(const std::vector<std::size_t>& counts,
                                            const std::vector<double>& probs) {
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    double stat = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        double expect = total * probs[k];
        if (expect <= 0.0) continue;
        double diff = static_cast<double>(counts[k]) - expect;
        stat += diff * diff / expect;
    }
    return chi_squared_pvalue(stat, static_cast<double>(counts.size() - 1));
}

// Least-squares slope of log(y) against log(x); the fitted scaling exponent.
inline double fit_log_log_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw input_error("fit_log_log_slope: need at least two points");
    double mx = 0, my = 0;
    std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

}  // namespace cpemd

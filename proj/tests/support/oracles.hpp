#pragma once

// Independent reference values for the tests: everything here is computed
// by direct numerical quadrature or elementary formulas, never through the
// library's own closed forms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

/// Unnormalized q-Gaussian kernel e_q(-x²), written out directly.
inline double kernel(double x, double q) {
    if (std::abs(q - 1.0) < 1e-12) return std::exp(-x * x);
    return std::pow(1.0 + (q - 1.0) * x * x, -1.0 / (q - 1.0));
}

/// ∫_0^∞ f(x) dx by the exp-sinh rule.
inline double half_line(const std::function<double(double)>& f) {
    boost::math::quadrature::exp_sinh<double> rule;
    return rule.integrate(f, 1e-13);
}

/// ∫_a^b f(x) dx, adaptive Gauss-Kronrod.
inline double interval(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-13);
}

/// C_q = ∫ e_q(-x²) dx over the real line.
inline double cq(double q) {
    return 2.0 * half_line([q](double x) { return kernel(x, q); });
}

inline double pdf(double x, double q, double beta) {
    return std::sqrt(beta) * kernel(std::sqrt(beta) * x, q) / cq(q);
}

/// 2 ∫_0^s g_q(y) dy.
inline double q_erf(double s, double q) {
    const double c = cq(q);
    const double sign = s < 0 ? -1.0 : 1.0;
    const double a = std::abs(s);
    auto g = [q](double y) { return kernel(y, q); };
    // Split so each piece is smooth on its own scale.
    if (a > 16.0) {
        const double tail = half_line([&](double u) { return kernel(a + u, q); });
        return sign * (1.0 - 2.0 * tail / c);
    }
    double total = 0.0;
    double lo = 0.0;
    for (double hi : {1.0, 4.0, 16.0}) {
        const double top = std::min(hi, a);
        if (top > lo) total += interval(g, lo, top);
        lo = top;
        if (lo >= a) break;
    }
    return sign * 2.0 * total / c;
}

/// ∫ x² p(x) dx for the q-Gaussian with the given beta.
inline double second_moment(double q, double beta) {
    const double c = cq(q);
    const double sb = std::sqrt(beta);
    return 2.0 * half_line([&](double x) { return x * x * sb * kernel(sb * x, q) / c; });
}

/// ∫ x² p^q dx / ∫ p^q dx.
inline double escort_second_moment(double q, double beta) {
    const double c = cq(q);
    const double sb = std::sqrt(beta);
    auto pq = [&](double x) { return std::pow(sb * kernel(sb * x, q) / c, q); };
    const double num = half_line([&](double x) { return x * x * pq(x); });
    const double den = half_line(pq);
    return num / den;
}

/// Two-sided Kolmogorov-Smirnov distance between a sample and a CDF.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n),
                      std::abs(static_cast<double>(i + 1) / n - f)});
    }
    return d;
}

/// Least-squares line y = a + b x.
struct Line {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
};

inline Line least_squares(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    Line l;
    l.slope = sxy / sxx;
    l.intercept = my - l.slope * mx;
    double ssr = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - l.intercept - l.slope * x[i];
        ssr += r * r;
    }
    l.slope_se = x.size() > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    return l;
}

/// Standard normal quantile by bisection on std::erfc.
inline double normal_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace oracle

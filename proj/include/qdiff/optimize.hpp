#pragma once

// Small numerical helpers: a Nelder-Mead simplex minimizer and ordinary
// least-squares line fits.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "qdiff/error.hpp"

namespace qdiff::optimize {

template <std::size_t N>
using Point = std::array<double, N>;

template <std::size_t N>
struct MinimizeResult {
    Point<N> x{};
    double value = std::numeric_limits<double>::infinity();
    std::size_t evaluations = 0;
    bool converged = false;
};

struct NelderMeadOptions {
    std::size_t max_evaluations = 2000;
    double x_tolerance = 1e-9;  // simplex diameter, absolute
    double f_tolerance = 1e-14; // spread of values, relative to |f| + tiny
};

/// Derivative-free minimization by the Nelder-Mead simplex method with the
/// standard coefficients (1, 2, 1/2, 1/2).
template <std::size_t N, class F>
MinimizeResult<N> nelder_mead(F&& f, const Point<N>& start, const Point<N>& step,
                              const NelderMeadOptions& opt = {}) {
    std::array<Point<N>, N + 1> simplex;
    std::array<double, N + 1> fv;
    MinimizeResult<N> res;

    auto eval = [&](const Point<N>& x) {
        ++res.evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };

    simplex[0] = start;
    for (std::size_t i = 0; i < N; ++i) {
        simplex[i + 1] = start;
        simplex[i + 1][i] += step[i];
    }
    for (std::size_t i = 0; i <= N; ++i) fv[i] = eval(simplex[i]);

    std::array<std::size_t, N + 1> order;
    while (res.evaluations < opt.max_evaluations) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return fv[a] < fv[b];
        });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[N - 1];

        double diameter = 0.0;
        for (std::size_t i = 0; i <= N; ++i) {
            for (std::size_t k = 0; k < N; ++k) {
                diameter = std::max(diameter, std::abs(simplex[i][k] - simplex[best][k]));
            }
        }
        const double spread = std::abs(fv[worst] - fv[best]);
        if (diameter < opt.x_tolerance ||
            spread <= opt.f_tolerance * (std::abs(fv[best]) + 1e-300)) {
            res.converged = true;
            break;
        }

        Point<N> centroid{};
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < N; ++k) centroid[k] += simplex[i][k] / N;
        }
        auto along = [&](double coef) {
            Point<N> p;
            for (std::size_t k = 0; k < N; ++k) {
                p[k] = centroid[k] + coef * (simplex[worst][k] - centroid[k]);
            }
            return p;
        };

        const Point<N> reflected = along(-1.0);
        const double fr = eval(reflected);
        if (fr < fv[best]) {
            const Point<N> expanded = along(-2.0);
            const double fe = eval(expanded);
            if (fe < fr) {
                simplex[worst] = expanded;
                fv[worst] = fe;
            } else {
                simplex[worst] = reflected;
                fv[worst] = fr;
            }
            continue;
        }
        if (fr < fv[second]) {
            simplex[worst] = reflected;
            fv[worst] = fr;
            continue;
        }
        const bool outside = fr < fv[worst];
        const Point<N> contracted = along(outside ? -0.5 : 0.5);
        const double fc = eval(contracted);
        if (fc < (outside ? fr : fv[worst])) {
            simplex[worst] = contracted;
            fv[worst] = fc;
            continue;
        }
        for (std::size_t i = 0; i <= N; ++i) {
            if (i == best) continue;
            for (std::size_t k = 0; k < N; ++k) {
                simplex[i][k] = simplex[best][k] + 0.5 * (simplex[i][k] - simplex[best][k]);
            }
            fv[i] = eval(simplex[i]);
        }
    }

    const std::size_t best = static_cast<std::size_t>(
        std::min_element(fv.begin(), fv.end()) - fv.begin());
    res.x = simplex[best];
    res.value = fv[best];
    return res;
}

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    double intercept_se = 0.0;
    double ssr = 0.0;
    std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope * x. Standard errors are
/// zero when n = 2 (the fit is exact).
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) fail(ErrorKind::configuration, "fit_line: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) fail(ErrorKind::configuration, "fit_line needs at least two points");
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) fail(ErrorKind::configuration, "fit_line: x values are all equal");
    LineFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - fit.intercept - fit.slope * x[i];
        fit.ssr += r * r;
    }
    if (n > 2) {
        const double s2 = fit.ssr / static_cast<double>(n - 2);
        fit.slope_se = std::sqrt(s2 / sxx);
        fit.intercept_se = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    }
    return fit;
}

} // namespace qdiff::optimize

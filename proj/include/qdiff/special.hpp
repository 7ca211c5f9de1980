#pragma once

// Special functions needed by the q-statistics layer: the Gauss
// hypergeometric function 2F1 on the real half-line z < 1, the regularized
// incomplete beta function and a cancellation-free ln Γ(m-1/2) - ln Γ(m).

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

#include "qdiff/error.hpp"

namespace qdiff::special {

/// ln Γ(m - 1/2) - ln Γ(m) for m > 1/2.
///
/// For large m the two log-gammas are O(m ln m) while their difference is
/// O(ln m), so subtracting std::lgamma results loses most digits. Above
/// m = 20 the Stirling series is differenced analytically instead.
inline double log_gamma_ratio_half(double m) {
    if (!(m > 0.5)) {
        fail(ErrorKind::domain, "log_gamma_ratio_half requires m > 1/2");
    }
    if (m < 20.0) {
        return std::lgamma(m - 0.5) - std::lgamma(m);
    }
    // Stirling: ln Γ(z) = (z - 1/2) ln z - z + ln(2π)/2 + Σ B_2k / (2k(2k-1) z^(2k-1)).
    const double z1 = m - 0.5;
    const double leading = (m - 1.0) * std::log1p(-0.5 / m) - 0.5 * std::log(m) + 0.5;
    auto tail = [](double z) {
        const double z2 = z * z;
        return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z;
    };
    return leading + tail(z1) - tail(m);
}

/// Regularized incomplete beta I_x(p, r) by Lentz's continued fraction,
/// using the symmetry I_x(p, r) = 1 - I_{1-x}(r, p) where it converges
/// faster. `log_beta` is ln B(p, r), passed in so callers with a more
/// accurate value for extreme parameters can supply it.
inline double regularized_incomplete_beta(double p, double r, double x, double log_beta) {
    if (!(p > 0.0) || !(r > 0.0) || !(x >= 0.0 && x <= 1.0)) {
        fail(ErrorKind::domain, "incomplete beta requires p, r > 0 and 0 <= x <= 1");
    }
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;

    auto continued_fraction = [](double a, double b, double xx) {
        constexpr double tiny = 1e-300;
        constexpr double eps = 1e-16;
        constexpr int max_iter = 200000;
        const double qab = a + b;
        const double qap = a + 1.0;
        const double qam = a - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * xx / qap;
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int k = 1; k <= max_iter; ++k) {
            const double kk = static_cast<double>(k);
            const double m2 = 2.0 * kk;
            double aa = kk * (b - kk) * xx / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a + kk) * (qab + kk) * xx / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + aa / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < eps) return h;
        }
        std::ostringstream os;
        os << "incomplete beta continued fraction did not converge (a=" << a << ", b=" << b
           << ", x=" << xx << ", iterations=" << max_iter << ")";
        fail(ErrorKind::numeric, os.str());
    };

    // x^p (1-x)^r / B(p, r), in logs.
    const double log_front = p * std::log(x) + r * std::log1p(-x) - log_beta;
    if (x < (p + 1.0) / (p + r + 2.0)) {
        return std::exp(log_front) * continued_fraction(p, r, x) / p;
    }
    return 1.0 - std::exp(log_front) * continued_fraction(r, p, 1.0 - x) / r;
}

struct SeriesResult {
    double value = 0.0;
    double abs_sum = 0.0;     // Σ|term|, for the cancellation estimate
    std::size_t terms = 0;
    bool converged = false;
};

/// Direct Gauss series Σ (a)_n (b)_n / ((c)_n n!) z^n.
inline SeriesResult hyp2f1_series(double a, double b, double c, double z,
                                  std::size_t max_terms = 100000) {
    SeriesResult out;
    double term = 1.0;
    out.value = 1.0;
    out.abs_sum = 1.0;
    int small_run = 0;
    for (std::size_t n = 0; n < max_terms; ++n) {
        const double nn = static_cast<double>(n);
        term *= (a + nn) * (b + nn) / ((c + nn) * (nn + 1.0)) * z;
        out.value += term;
        out.abs_sum += std::abs(term);
        out.terms = n + 1;
        if (term == 0.0) {
            out.converged = true;
            break;
        }
        if (std::abs(term) <= 1e-17 * std::abs(out.value)) {
            if (++small_run >= 2) {
                out.converged = true;
                break;
            }
        } else {
            small_run = 0;
        }
    }
    return out;
}

namespace detail {

// Series are accepted when Σ|t| / |Σ t| stays below this, i.e. at most
// ~5 of the 16 available digits are lost to cancellation.
inline constexpr double max_series_condition = 1e5;

inline bool series_usable(const SeriesResult& s) {
    return s.converged && std::isfinite(s.value) && s.value != 0.0 &&
           s.abs_sum / std::abs(s.value) < max_series_condition;
}

[[noreturn]] inline void hyp2f1_failure(double a, double b, double c, double z,
                                        const SeriesResult& last, const char* why) {
    std::ostringstream os;
    os.precision(17);
    os << "2F1(" << a << ", " << b << "; " << c << "; " << z << ") not evaluable: " << why
       << " (terms=" << last.terms << ", partial=" << last.value
       << ", condition=" << (last.value != 0.0 ? last.abs_sum / std::abs(last.value) : 0.0)
       << ")";
    fail(ErrorKind::numeric, os.str());
}

} // namespace detail

/// Gauss hypergeometric 2F1(a, b; c; z) for real z < 1.
///
/// Evaluation order:
///   1. direct series when |z| < 0.9 and cancellation is bounded;
///   2. for z < 0, Pfaff's transformation
///        2F1(a,b;c;z) = (1-z)^(-a) 2F1(a, c-b; c; z/(z-1)),
///      whose argument lies in (0, 1), summed directly when below 0.9;
///   3. when c = a + 1 (the incomplete-beta family, which contains the
///      q-error function), the transformed function equals
///        a w^(-a) B(a, 1-c+b) I_w(a, 1-c+b)
///      and is evaluated through the continued fraction, which converges
///      on all of (0, 1).
/// Anything else throws ErrorKind::numeric with diagnostics.
///
/// `log_beta_hint`, when finite, replaces ln B(a, 1-c+b) in step 3.
inline double hyp2f1(double a, double b, double c, double z,
                     double log_beta_hint = std::numeric_limits<double>::quiet_NaN()) {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c) || !std::isfinite(z)) {
        fail(ErrorKind::domain, "2F1 arguments must be finite");
    }
    if (!(z < 1.0)) {
        fail(ErrorKind::domain, "2F1 is evaluated only for real z < 1");
    }
    if (c <= 0.0 && c == std::floor(c)) {
        fail(ErrorKind::domain, "2F1 undefined for non-positive integer c");
    }
    if (z == 0.0) return 1.0;

    SeriesResult direct;
    if (std::abs(z) < 0.9) {
        direct = hyp2f1_series(a, b, c, z);
        if (detail::series_usable(direct)) return direct.value;
    }
    if (z > 0.0) {
        detail::hyp2f1_failure(a, b, c, z, direct, "z in [0.9, 1) is not supported");
    }

    const double w = z / (z - 1.0);
    const double bt = c - b;
    const double pfaff = std::pow(1.0 - z, -a);
    SeriesResult transformed;
    if (w < 0.9) {
        transformed = hyp2f1_series(a, bt, c, w);
        if (detail::series_usable(transformed)) return pfaff * transformed.value;
    }

    if (c == a + 1.0 && a > 0.0 && 1.0 - bt > 0.0) {
        const double r = 1.0 - bt;
        const double log_beta = std::isfinite(log_beta_hint)
                                    ? log_beta_hint
                                    : std::lgamma(a) + std::lgamma(r) - std::lgamma(a + r);
        const double ib = regularized_incomplete_beta(a, r, w, log_beta);
        // a w^(-a) B(a, r) I_w(a, r), assembled in logs to avoid overflow.
        return pfaff * a * std::exp(log_beta - a * std::log(w)) * ib;
    }
    detail::hyp2f1_failure(a, b, c, z, transformed.terms ? transformed : direct,
                           "series ill-conditioned and no closed transformation applies");
}

} // namespace qdiff::special

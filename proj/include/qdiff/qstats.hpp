#pragma once

// q-statistics: the q-exponential, the q-Gaussian family and its
// self-similar time-dependent form, the q-error function, moment
// identities, a seeded sampler and a finite-difference residual check of
// the nonlinear diffusion equation the self-similar family solves.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/special.hpp"

namespace qdiff {

/// |q - 1| below this switches every function to its Gaussian limit.
inline constexpr double q_unit_tolerance = 1e-8;

inline bool is_gaussian_q(double q) { return std::abs(q - 1.0) < q_unit_tolerance; }

/// Parameters of the anomalous-diffusion q-Gaussian.
///
/// `beta` is the inverse squared width for a single distribution. When the
/// distribution is bound to a lag t, the width follows from alpha and D via
/// beta = (D t)^(-2/alpha); `beta_at` computes that.
struct QParams {
    double q = 1.0;
    double beta = 1.0;
    double alpha = 2.0;
    double D = 1.0;
    std::optional<double> xi;

    /// alpha = (3 - q) / xi.
    static QParams from_xi(double q, double xi, double D) {
        QParams p;
        p.q = q;
        p.xi = xi;
        p.alpha = (3.0 - q) / xi;
        p.D = D;
        return p;
    }

    [[nodiscard]] double beta_at(double t) const { return std::pow(D * t, -2.0 / alpha); }

    /// (D t)^(1/alpha), the spatial scale at lag t.
    [[nodiscard]] double width_at(double t) const { return std::pow(D * t, 1.0 / alpha); }
};

namespace detail {

inline void require_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
        std::ostringstream os;
        os << what << " must be finite (got " << v << ")";
        fail(ErrorKind::domain, os.str());
    }
}

inline void require_q_range(double q, const char* op) {
    if (!(q >= 1.0 - q_unit_tolerance && q < 3.0)) {
        std::ostringstream os;
        os << op << " requires 1 <= q < 3 (got q=" << q << ")";
        fail(ErrorKind::domain, os.str());
    }
}

inline void require_positive(double v, const char* what) {
    if (!(v > 0.0) || !std::isfinite(v)) {
        std::ostringstream os;
        os << what << " must be positive and finite (got " << v << ")";
        fail(ErrorKind::domain, os.str());
    }
}

inline void check_params(const QParams& p) {
    require_q_range(p.q, "QParams");
    require_positive(p.alpha, "alpha");
    require_positive(p.D, "D");
}

// ln B(1/2, m - 1/2) with m = 1/(q-1).
inline double log_beta_half(double m) {
    return 0.5 * std::log(std::numbers::pi) + special::log_gamma_ratio_half(m);
}

} // namespace detail

/// e_q(x) = [1 + (1-q) x]^(1/(1-q)), with the Tsallis cutoff (0) for q < 1
/// where the bracket is non-positive.
inline double q_exponential(double x, double q) {
    detail::require_finite(x, "x");
    detail::require_finite(q, "q");
    if (!(q > 0.0 && q < 3.0)) {
        fail(ErrorKind::domain, "q_exponential requires 0 < q < 3");
    }
    if (is_gaussian_q(q)) return std::exp(x);
    const double arg = (1.0 - q) * x;
    if (arg <= -1.0) {
        if (q < 1.0) return 0.0;
        fail(ErrorKind::domain, "q_exponential pole: 1 + (1-q)x <= 0 for q > 1");
    }
    return std::exp(std::log1p(arg) / (1.0 - q));
}

/// C_q = sqrt(pi/(q-1)) Γ((3-q)/(2(q-1))) / Γ(1/(q-1)), sqrt(pi) at q = 1.
inline double normalization_cq(double q) {
    detail::require_finite(q, "q");
    if (is_gaussian_q(q)) return std::sqrt(std::numbers::pi);
    if (!(q > 1.0 && q < 3.0)) {
        std::ostringstream os;
        os << "normalization C_q requires 1 < q < 3 (got q=" << q << ")";
        fail(ErrorKind::domain, os.str());
    }
    const double m = 1.0 / (q - 1.0);
    return std::sqrt(std::numbers::pi / (q - 1.0)) * std::exp(special::log_gamma_ratio_half(m));
}

/// Unit q-Gaussian g_q(y) = e_q(-y^2) / C_q.
inline double g_q(double y, double q) {
    if (is_gaussian_q(q)) return std::exp(-y * y) / std::sqrt(std::numbers::pi);
    const double m = 1.0 / (q - 1.0);
    return std::exp(-m * std::log1p((q - 1.0) * y * y)) / normalization_cq(q);
}

/// sqrt(beta) g_q(sqrt(beta) x).
inline double q_gaussian_pdf(double x, double q, double beta) {
    detail::require_finite(x, "x");
    detail::require_q_range(q, "q_gaussian_pdf");
    detail::require_positive(beta, "beta");
    const double sb = std::sqrt(beta);
    return sb * g_q(sb * x, q);
}

/// (D t)^(-1/alpha) g_q(x / (D t)^(1/alpha)).
inline double scaled_pdf(double x, double t, const QParams& params) {
    detail::require_finite(x, "x");
    if (!(t > 0.0)) fail(ErrorKind::domain, "scaled_pdf requires t > 0");
    detail::check_params(params);
    return q_gaussian_pdf(x, params.q, params.beta_at(t));
}

/// q-error function erf_q(s) = 2 ∫_0^s g_q(y) dy, evaluated through the
/// closed form (2s / C_q) 2F1(1/2, 1/(q-1); 3/2; (1-q) s^2) near the
/// centre and through its tail, a regularized incomplete beta, beyond
/// (q-1) s^2 = 1.
inline double q_erf(double s, double q) {
    detail::require_finite(q, "q");
    if (!(q >= 1.0 - q_unit_tolerance && q < 3.0)) {
        std::ostringstream os;
        os << "q_erf requires 1 <= q < 3 (got q=" << q << ")";
        fail(ErrorKind::domain, os.str());
    }
    if (std::isnan(s)) fail(ErrorKind::domain, "q_erf argument is NaN");
    if (std::isinf(s)) return s > 0 ? 1.0 : -1.0;
    if (s == 0.0) return 0.0;
    if (is_gaussian_q(q)) return std::erf(s);

    const double m = 1.0 / (q - 1.0);
    const double sign = s < 0.0 ? -1.0 : 1.0;
    const double a = std::abs(s);
    if ((q - 1.0) * a * a > 1.0) {
        // Tail form: 1 - erf_q(s) = I_u(m - 1/2, 1/2), u = 1/(1 + (q-1) s²).
        const double p = m - 0.5;
        const double log_b = detail::log_beta_half(m);
        const double log_u = -std::log(q - 1.0) - 2.0 * std::log(a);
        double tail;
        if (log_u < -600.0) {
            // u underflows; only the leading term u^p / (p B) survives.
            tail = std::exp(p * log_u - log_b) / p;
        } else {
            tail = special::regularized_incomplete_beta(p, 0.5, 1.0 / (1.0 + (q - 1.0) * a * a),
                                                        log_b);
        }
        return sign * std::clamp(1.0 - tail, 0.0, 1.0);
    }
    const double z = (1.0 - q) * s * s;
    const double f = special::hyp2f1(0.5, m, 1.5, z, detail::log_beta_half(m));
    const double v = 2.0 * s / normalization_cq(q) * f;
    return std::clamp(v, -1.0, 1.0);
}

/// Inverse of q_erf on [0, 1): the s >= 0 with q_erf(s, q) = p.
inline double q_erf_inverse(double p, double q) {
    detail::require_q_range(q, "q_erf_inverse");
    if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::domain, "q_erf_inverse requires 0 <= p < 1");
    if (p == 0.0) return 0.0;
    double lo = 0.0;
    double hi = 1.0;
    while (q_erf(hi, q) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) fail(ErrorKind::numeric, "q_erf_inverse failed to bracket");
    }
    double s = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double f = q_erf(s, q) - p;
        if (f > 0) hi = s; else lo = s;
        const double deriv = 2.0 * g_q(s, q);
        double next = s - f / deriv;
        if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, s)) {
            return next;
        }
        s = next;
    }
    return s;
}

/// F(x, t) = 1/2 + erf_q(x sqrt(beta)) / 2 with beta = (D t)^(-2/alpha).
inline double cdf(double x, double t, const QParams& params) {
    if (!(t > 0.0)) fail(ErrorKind::domain, "cdf requires t > 0");
    detail::check_params(params);
    if (std::isnan(x)) fail(ErrorKind::domain, "cdf argument is NaN");
    return 0.5 + 0.5 * q_erf(x / params.width_at(t), params.q);
}

/// P(|X - X̄| > x) = 1 - erf_q(x sqrt(beta)) for a single distribution.
inline double exceedance_beta(double x, double q, double beta) {
    if (!(x >= 0.0)) fail(ErrorKind::domain, "exceedance requires x >= 0");
    detail::require_positive(beta, "beta");
    return 1.0 - q_erf(x * std::sqrt(beta), q);
}

/// P(|X - X̄| > x) = 1 - erf_q(x / (D t)^(1/alpha)).
inline double exceedance(double x, double t, const QParams& params) {
    if (!(x >= 0.0)) fail(ErrorKind::domain, "exceedance requires x >= 0");
    if (!(t > 0.0)) fail(ErrorKind::domain, "exceedance requires t > 0");
    detail::check_params(params);
    return 1.0 - q_erf(x / params.width_at(t), params.q);
}

/// <x^2> = 1 / (beta (5 - 3q)), finite only for q < 5/3.
inline double variance_from_beta(double q, double beta) {
    detail::require_q_range(q, "variance_from_beta");
    detail::require_positive(beta, "beta");
    if (q >= 5.0 / 3.0) {
        std::ostringstream os;
        os << "second moment diverges for q >= 5/3 (q=" << q << "); use the escort q-variance";
        fail(ErrorKind::divergent_moment, os.str());
    }
    return 1.0 / (beta * (5.0 - 3.0 * q));
}

/// Escort second moment <x^2>_q = ∫x² p^q / ∫p^q = 1 / ((3 - q) beta).
inline double q_variance_from_beta(double q, double beta) {
    detail::require_q_range(q, "q_variance_from_beta");
    detail::require_positive(beta, "beta");
    return 1.0 / ((3.0 - q) * beta);
}

/// Uniform double in (0, 1] built from the top 53 bits of a 64-bit engine
/// draw, so a given engine sequence maps to the same doubles everywhere.
template <class Engine>
double uniform_open_closed(Engine& engine) {
    static_assert(Engine::max() - Engine::min() == std::numeric_limits<std::uint64_t>::max(),
                  "needs a full-range 64-bit engine");
    const std::uint64_t bits = static_cast<std::uint64_t>(engine() - Engine::min()) >> 11;
    return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

/// q-Gaussian variates by the generalized Box-Muller construction: with
/// q' = (1+q)/(3-q), Z = sqrt(-2 ln_q'(U1)) cos(2π U2) is q-Gaussian with
/// beta = 1/(3-q); rescaling by sqrt((3-q) beta) gives any beta.
class QGaussianDistribution {
public:
    QGaussianDistribution(double q, double beta) : q_(q), beta_(beta) {
        detail::require_q_range(q, "QGaussianDistribution");
        detail::require_positive(beta, "beta");
        q_prime_ = (1.0 + q) / (3.0 - q);
        scale_ = 1.0 / std::sqrt((3.0 - q) * beta);
    }

    template <class Engine>
    double operator()(Engine& engine) const {
        const double u1 = uniform_open_closed(engine);
        const double u2 = uniform_open_closed(engine);
        double ln_q;
        if (std::abs(q_prime_ - 1.0) < q_unit_tolerance) {
            ln_q = std::log(u1);
        } else {
            ln_q = std::expm1((1.0 - q_prime_) * std::log(u1)) / (1.0 - q_prime_);
        }
        const double radius = std::sqrt(-2.0 * ln_q);
        return scale_ * radius * std::cos(2.0 * std::numbers::pi * u2);
    }

    [[nodiscard]] double q() const { return q_; }
    [[nodiscard]] double beta() const { return beta_; }

private:
    double q_;
    double beta_;
    double q_prime_ = 1.0;
    double scale_ = 1.0;
};

/// SplitMix64 finalizer, used to derive independent engine seeds from a
/// master seed and a stream index.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Self-similar scale constant of the density family that solves
///   t^(1-xi) dp/dt = xi D d²(p^(2-q))/dx²,
/// i.e. the D_s for which (D_s t)^(-1/alpha) g_q(x/(D_s t)^(1/alpha)) with
/// alpha = (3-q)/xi is an exact solution:
///   D_s^xi = 2 (2-q) (3-q) C_q^(q-1) D.
inline double self_similar_scale(double q, double xi, double D) {
    detail::require_q_range(q, "self_similar_scale");
    detail::require_positive(xi, "xi");
    detail::require_positive(D, "D");
    if (!(q < 2.0)) {
        fail(ErrorKind::domain, "the diffusion equation has no spreading solution for q >= 2");
    }
    const double cq = normalization_cq(q);
    return std::pow(2.0 * (2.0 - q) * (3.0 - q) * std::pow(cq, q - 1.0) * D, 1.0 / xi);
}

struct PdeResidual {
    double relative = 0.0;  // max|residual| / max|t^(1-xi) dp/dt|
    double max_abs = 0.0;
    double max_lhs = 0.0;
};

/// n i.i.d. q-Gaussian draws; identical for identical seeds.
inline std::vector<double> sample_q_gaussian(double q, double beta, std::size_t n,
                                             std::uint64_t seed) {
    QGaussianDistribution dist(q, beta);
    std::mt19937_64 engine(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(engine);
    return out;
}

/// Finite-difference residual of t^(1-xi) dp/dt - xi D d²(p^(2-q))/dx² over
/// the interior of (x_grid × t_grid), with p the self-similar density built
/// from params.alpha and the scale constant matched to (q, xi, D) by
/// `self_similar_scale`. A params.alpha other than (3-q)/xi leaves a
/// residual that does not vanish under refinement.
inline PdeResidual pde_residual(const QParams& params, std::span<const double> x_grid,
                                std::span<const double> t_grid) {
    if (x_grid.size() < 5 || t_grid.size() < 5) {
        fail(ErrorKind::configuration, "pde_residual needs at least 5 points per axis");
    }
    auto strictly_increasing = [](std::span<const double> g) {
        return std::adjacent_find(g.begin(), g.end(), std::greater_equal<>()) == g.end();
    };
    if (!strictly_increasing(x_grid) || !strictly_increasing(t_grid)) {
        fail(ErrorKind::configuration, "pde_residual grids must be strictly increasing");
    }
    if (!(t_grid.front() > 0.0)) fail(ErrorKind::configuration, "t grid must be positive");
    if (!params.xi) fail(ErrorKind::configuration, "pde_residual needs xi");
    detail::check_params(params);

    const double q = params.q;
    const double xi = *params.xi;
    QParams solution = params;
    solution.D = self_similar_scale(q, xi, params.D);

    const std::size_t nx = x_grid.size();
    const std::size_t nt = t_grid.size();
    std::vector<double> p(nx * nt);
    for (std::size_t j = 0; j < nt; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            p[j * nx + i] = scaled_pdf(x_grid[i], t_grid[j], solution);
        }
    }
    auto at = [&](std::size_t i, std::size_t j) { return p[j * nx + i]; };

    PdeResidual out;
    for (std::size_t j = 1; j + 1 < nt; ++j) {
        const double hm = t_grid[j] - t_grid[j - 1];
        const double hp = t_grid[j + 1] - t_grid[j];
        const double tpow = std::pow(t_grid[j], 1.0 - xi);
        for (std::size_t i = 1; i + 1 < nx; ++i) {
            // Three-point first derivative, second order on non-uniform grids.
            const double dpdt = (-hp / (hm * (hm + hp))) * at(i, j - 1) +
                                ((hp - hm) / (hm * hp)) * at(i, j) +
                                (hm / (hp * (hm + hp))) * at(i, j + 1);
            const double km = x_grid[i] - x_grid[i - 1];
            const double kp = x_grid[i + 1] - x_grid[i];
            const double um = std::pow(at(i - 1, j), 2.0 - q);
            const double u0 = std::pow(at(i, j), 2.0 - q);
            const double up = std::pow(at(i + 1, j), 2.0 - q);
            const double d2 = 2.0 * (km * up - (km + kp) * u0 + kp * um) / (km * kp * (km + kp));
            const double lhs = tpow * dpdt;
            const double res = lhs - xi * params.D * d2;
            out.max_abs = std::max(out.max_abs, std::abs(res));
            out.max_lhs = std::max(out.max_lhs, std::abs(lhs));
        }
    }
    out.relative = out.max_lhs > 0.0 ? out.max_abs / out.max_lhs
                                     : std::numeric_limits<double>::infinity();
    return out;
}

} // namespace qdiff

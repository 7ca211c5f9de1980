#pragma once

// Empirical distributions of the fluctuation at fixed lags, (q, beta)
// estimators and the anomalous-diffusion exponents alpha(t), D(t).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/optimize.hpp"
#include "qdiff/qstats.hpp"

namespace qdiff {

enum class FitMethod { pdf_ls, q_moments, cdf_ls };

inline std::string_view to_string(FitMethod m) {
    switch (m) {
    case FitMethod::pdf_ls: return "pdf-ls";
    case FitMethod::q_moments: return "q-moments";
    case FitMethod::cdf_ls: return "cdf-ls";
    }
    return "?";
}

inline FitMethod parse_fit_method(std::string_view s) {
    if (s == "pdf-ls") return FitMethod::pdf_ls;
    if (s == "q-moments") return FitMethod::q_moments;
    if (s == "cdf-ls") return FitMethod::cdf_ls;
    fail(ErrorKind::configuration,
         "unknown fitting method '" + std::string(s) + "' (pdf-ls | q-moments | cdf-ls)");
}

/// Linear-interpolation quantile (type 7) of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
    if (sorted.empty()) fail(ErrorKind::estimation, "quantile of empty sample");
    const double pos = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct Histogram {
    std::vector<double> edges;   // size bins + 1, uniform
    std::vector<double> density; // integrates to 1 over [edges.front(), edges.back()]
    std::vector<std::size_t> counts;

    [[nodiscard]] std::size_t bins() const { return density.size(); }
    [[nodiscard]] double width() const { return edges.size() > 1 ? edges[1] - edges[0] : 0.0; }
    [[nodiscard]] double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
    [[nodiscard]] std::size_t occupied() const {
        return static_cast<std::size_t>(
            std::count_if(density.begin(), density.end(), [](double d) { return d > 0.0; }));
    }
    [[nodiscard]] double integral() const {
        double s = 0.0;
        for (std::size_t i = 0; i < bins(); ++i) s += density[i] * (edges[i + 1] - edges[i]);
        return s;
    }
};

/// Samples of the detrended increment at one lag, with histogram and
/// empirical CDF.
class EmpiricalDistribution {
public:
    /// Histogram range is clipped symmetrically at the larger magnitude of
    /// the 0.1 and 99.9 percentiles; the bin width follows Freedman-Diaconis
    /// unless `bins` is non-zero.
    static EmpiricalDistribution from_samples(double horizon, std::vector<double> samples,
                                              std::size_t bins = 0) {
        if (!(horizon > 0.0)) fail(ErrorKind::configuration, "horizon must be positive");
        if (samples.empty()) fail(ErrorKind::estimation, "no samples");
        EmpiricalDistribution d;
        d.horizon_ = horizon;
        std::sort(samples.begin(), samples.end());
        d.samples_ = std::move(samples);
        d.histogram_ = build_histogram(d.samples_, bins);
        return d;
    }

    /// A distribution known only through its histogram (e.g. analytic bin
    /// masses). Sample-based estimators reject it.
    static EmpiricalDistribution from_histogram(double horizon, std::vector<double> edges,
                                                std::vector<double> density) {
        if (edges.size() != density.size() + 1 || density.empty()) {
            fail(ErrorKind::configuration, "histogram needs bins + 1 edges");
        }
        EmpiricalDistribution d;
        d.horizon_ = horizon;
        d.histogram_.edges = std::move(edges);
        d.histogram_.density = std::move(density);
        d.histogram_.counts.assign(d.histogram_.density.size(), 0);
        const double total = d.histogram_.integral();
        if (!(total > 0.0)) fail(ErrorKind::estimation, "histogram has no mass");
        for (auto& v : d.histogram_.density) v /= total;
        return d;
    }

    [[nodiscard]] double horizon() const { return horizon_; }
    [[nodiscard]] std::size_t size() const { return samples_.size(); }
    [[nodiscard]] std::span<const double> samples() const { return samples_; }
    [[nodiscard]] const Histogram& histogram() const { return histogram_; }

    /// Fraction of samples <= x.
    [[nodiscard]] double ecdf(double x) const {
        const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
        return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
    }

private:
    static Histogram build_histogram(const std::vector<double>& sorted, std::size_t bins) {
        Histogram h;
        const double n = static_cast<double>(sorted.size());
        const double range = std::max(std::abs(sorted_quantile(sorted, 0.001)),
                                      std::abs(sorted_quantile(sorted, 0.999)));
        if (!(range > 0.0)) {
            // Degenerate sample: all mass at zero.
            h.edges = {-0.5, 0.5};
            h.density = {1.0};
            h.counts = {sorted.size()};
            return h;
        }
        if (bins == 0) {
            const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
            double width = 2.0 * iqr / std::cbrt(n);
            double count = width > 0.0 ? std::ceil(2.0 * range / width) : std::ceil(std::sqrt(n));
            bins = static_cast<std::size_t>(std::clamp(count, 10.0, 4096.0));
        }
        const double width = 2.0 * range / static_cast<double>(bins);
        h.edges.resize(bins + 1);
        for (std::size_t i = 0; i <= bins; ++i) {
            h.edges[i] = -range + width * static_cast<double>(i);
        }
        h.edges.back() = range;
        h.counts.assign(bins, 0);
        std::size_t inside = 0;
        for (double x : sorted) {
            if (x < -range || x > range) continue;
            auto k = static_cast<std::size_t>((x + range) / width);
            if (k >= bins) k = bins - 1;
            ++h.counts[k];
            ++inside;
        }
        h.density.resize(bins);
        for (std::size_t i = 0; i < bins; ++i) {
            h.density[i] = static_cast<double>(h.counts[i]) / (static_cast<double>(inside) * width);
        }
        return h;
    }

    double horizon_ = 1.0;
    std::vector<double> samples_;
    Histogram histogram_;
};

struct DistributionOptions {
    std::size_t bins = 0;           // 0 = Freedman-Diaconis
    std::size_t min_samples = 500;
};

/// For each lag t, the increments {x(τ+t) - x(τ)} over all valid τ.
inline std::vector<EmpiricalDistribution> empirical_distributions(
    std::span<const double> fluct, std::span<const std::size_t> horizons,
    const DistributionOptions& opt = {}) {
    std::vector<EmpiricalDistribution> out;
    out.reserve(horizons.size());
    for (std::size_t lag : horizons) {
        if (lag == 0) fail(ErrorKind::configuration, "horizons must be at least one step");
        const std::size_t count = fluct.size() > lag ? fluct.size() - lag : 0;
        if (count < opt.min_samples) {
            std::ostringstream os;
            os << "horizon " << lag << " has " << count << " samples, fewer than the required "
               << opt.min_samples;
            fail(ErrorKind::estimation, os.str());
        }
        std::vector<double> s(count);
        for (std::size_t tau = 0; tau < count; ++tau) s[tau] = fluct[tau + lag] - fluct[tau];
        out.push_back(EmpiricalDistribution::from_samples(static_cast<double>(lag), std::move(s),
                                                          opt.bins));
    }
    return out;
}

struct FitResult {
    FitMethod method = FitMethod::cdf_ls;
    double q = 1.0;
    double beta = 1.0;
    double q_se = std::numeric_limits<double>::quiet_NaN();
    double beta_se = std::numeric_limits<double>::quiet_NaN();
    double residual_norm = 0.0;     // sqrt of the minimized sum of squares
    double relative_residual = 0.0; // residual_norm / norm of the fitted data
    std::size_t evaluations = 0;
};

namespace detail {

inline constexpr double fit_q_max = 2.995;

inline double q_from_unbounded(double u) {
    const double s = std::sin(u);
    return 1.0 + (fit_q_max - 1.0) * s * s;
}

inline double unbounded_from_q(double q) {
    return std::asin(std::sqrt(std::clamp((q - 1.0) / (fit_q_max - 1.0), 0.0, 1.0)));
}

/// Robust starting width: beta for a Gaussian with the sample's IQR.
inline double initial_beta(std::span<const double> sorted) {
    const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
    if (!(iqr > 0.0)) fail(ErrorKind::estimation, "sample has zero interquartile range");
    const double sigma = iqr / 1.3489795003921634;
    return 1.0 / (2.0 * sigma * sigma);
}

/// Multi-start bounded least squares over (q, ln beta). `residuals` fills a
/// vector of model-minus-data deviations for given (q, beta).
template <class Residuals>
FitResult least_squares_qbeta(FitMethod method, Residuals&& residuals, std::size_t n_res,
                              double beta0, double data_norm) {
    std::vector<double> r(n_res);
    auto ssr_at = [&](double q, double beta) {
        residuals(q, beta, r);
        double s = 0.0;
        for (double v : r) s += v * v;
        return s;
    };
    auto objective = [&](const optimize::Point<2>& p) {
        return ssr_at(q_from_unbounded(p[0]), std::exp(p[1]));
    };

    FitResult out;
    out.method = method;
    optimize::MinimizeResult<2> best;
    optimize::NelderMeadOptions coarse;
    coarse.max_evaluations = 400;
    for (double q0 : {1.1, 1.4, 1.7, 2.0}) {
        auto res = optimize::nelder_mead<2>(objective, {unbounded_from_q(q0), std::log(beta0)},
                                            {0.15, 0.3}, coarse);
        out.evaluations += res.evaluations;
        if (res.value < best.value) best = res;
    }
    optimize::NelderMeadOptions fine;
    fine.max_evaluations = 3000;
    fine.x_tolerance = 1e-10;
    auto polished = optimize::nelder_mead<2>(objective, best.x, {0.02, 0.05}, fine);
    out.evaluations += polished.evaluations;
    if (!polished.converged || !std::isfinite(polished.value)) {
        std::ostringstream os;
        os << to_string(method) << " fit did not converge after " << out.evaluations
           << " evaluations (q=" << q_from_unbounded(polished.x[0])
           << ", beta=" << std::exp(polished.x[1]) << ", ssr=" << polished.value << ")";
        fail(ErrorKind::estimation, os.str());
    }
    out.q = q_from_unbounded(polished.x[0]);
    if (out.q < 1.0 + q_unit_tolerance) out.q = 1.0;
    out.beta = std::exp(polished.x[1]);
    out.residual_norm = std::sqrt(polished.value);
    out.relative_residual = data_norm > 0.0 ? out.residual_norm / data_norm : 0.0;

    // Standard errors from the Gauss-Newton covariance s² (JᵀJ)⁻¹, with the
    // Jacobian by finite differences in (q, beta).
    if (n_res > 2) {
        std::vector<double> rp(n_res), rm(n_res);
        std::array<std::vector<double>, 2> jac{std::vector<double>(n_res),
                                               std::vector<double>(n_res)};
        const double hq = 1e-5;
        const double q_lo = std::max(1.0, out.q - hq);
        const double q_hi = std::min(fit_q_max, out.q + hq);
        residuals(q_hi, out.beta, rp);
        residuals(q_lo, out.beta, rm);
        for (std::size_t i = 0; i < n_res; ++i) jac[0][i] = (rp[i] - rm[i]) / (q_hi - q_lo);
        const double hb = 1e-5 * out.beta;
        residuals(out.q, out.beta + hb, rp);
        residuals(out.q, out.beta - hb, rm);
        for (std::size_t i = 0; i < n_res; ++i) jac[1][i] = (rp[i] - rm[i]) / (2.0 * hb);
        double a = 0.0, b = 0.0, c = 0.0;
        for (std::size_t i = 0; i < n_res; ++i) {
            a += jac[0][i] * jac[0][i];
            b += jac[0][i] * jac[1][i];
            c += jac[1][i] * jac[1][i];
        }
        const double det = a * c - b * b;
        const double s2 = polished.value / static_cast<double>(n_res - 2);
        if (det > 0.0) {
            out.q_se = std::sqrt(s2 * c / det);
            out.beta_se = std::sqrt(s2 * a / det);
        }
    }
    return out;
}

} // namespace detail

/// Least-squares fit of sqrt(beta) g_q(sqrt(beta) x) to the histogram.
inline FitResult fit_pdf_least_squares(const EmpiricalDistribution& dist) {
    const Histogram& h = dist.histogram();
    if (h.occupied() < 10) {
        std::ostringstream os;
        os << "pdf-ls needs at least 10 occupied bins (horizon " << dist.horizon() << " has "
           << h.occupied() << ")";
        fail(ErrorKind::estimation, os.str());
    }
    const std::size_t nb = h.bins();
    std::vector<double> centers(nb);
    double norm = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
        centers[i] = h.center(i);
        norm += h.density[i] * h.density[i];
    }
    double beta0;
    if (dist.size() > 0) {
        beta0 = detail::initial_beta(dist.samples());
    } else {
        // Histogram-only input: second moment of the bin masses.
        double m2 = 0.0;
        for (std::size_t i = 0; i < nb; ++i) m2 += centers[i] * centers[i] * h.density[i] * h.width();
        beta0 = 1.0 / (2.0 * m2);
    }
    auto residuals = [&](double q, double beta, std::vector<double>& r) {
        for (std::size_t i = 0; i < nb; ++i) {
            r[i] = q_gaussian_pdf(centers[i], q, beta) - h.density[i];
        }
    };
    return detail::least_squares_qbeta(FitMethod::pdf_ls, residuals, nb, beta0, std::sqrt(norm));
}

struct CdfFitOptions {
    std::size_t points = 500; // order statistics used in the objective
};

/// Least-squares fit of 0.5 + erf_q(x sqrt(beta))/2 to the empirical CDF,
/// evaluated at evenly spaced order statistics.
inline FitResult fit_cdf_least_squares(const EmpiricalDistribution& dist,
                                       const CdfFitOptions& opt = {}) {
    const auto s = dist.samples();
    if (s.size() < 100) {
        std::ostringstream os;
        os << "cdf-ls needs at least 100 samples (horizon " << dist.horizon() << " has "
           << s.size() << ")";
        fail(ErrorKind::estimation, os.str());
    }
    const std::size_t k = std::min(opt.points, s.size());
    std::vector<double> x(k), f(k);
    double norm = 0.0;
    const double n = static_cast<double>(s.size());
    for (std::size_t j = 0; j < k; ++j) {
        const double pos = (static_cast<double>(j) + 0.5) / static_cast<double>(k) * n - 0.5;
        const auto idx = static_cast<std::size_t>(std::clamp(std::round(pos), 0.0, n - 1.0));
        x[j] = s[idx];
        f[j] = (static_cast<double>(idx) + 0.5) / n;
        norm += f[j] * f[j];
    }
    auto residuals = [&](double q, double beta, std::vector<double>& r) {
        const double sb = std::sqrt(beta);
        for (std::size_t j = 0; j < k; ++j) r[j] = 0.5 + 0.5 * q_erf(x[j] * sb, q) - f[j];
    };
    return detail::least_squares_qbeta(FitMethod::cdf_ls, residuals, k,
                                       detail::initial_beta(s), std::sqrt(norm));
}

struct MomentSolution {
    double q = 1.0;
    double beta = 1.0;
};

/// Closed-form solve of <x²> = 1/(beta(5-3q)) and <x²>_q = 1/((3-q) beta)
/// given both moments: with r = m2/m2q, q = (5r - 3)/(3r - 1).
inline MomentSolution solve_q_moments(double m2, double m2q) {
    if (!(m2 > 0.0) || !(m2q > 0.0) || !std::isfinite(m2) || !std::isfinite(m2q)) {
        fail(ErrorKind::estimation, "q-moments need positive finite moments");
    }
    const double r = m2 / m2q;
    MomentSolution s;
    if (r < 1.0) {
        if (r < 0.95) {
            std::ostringstream os;
            os << "moment ratio " << r << " < 1 implies tails lighter than Gaussian";
            fail(ErrorKind::estimation, os.str());
        }
        s.q = 1.0;
    } else {
        s.q = (5.0 * r - 3.0) / (3.0 * r - 1.0);
    }
    s.beta = 1.0 / ((3.0 - s.q) * m2q);
    return s;
}

/// Plug-in density at each sorted sample: k-nearest-neighbour spacing
/// estimate p̂(x_i) = (j_hi - j_lo) / (n (x_(j_hi) - x_(j_lo))) over the
/// k neighbours on each side, widened where ties give zero spacing.
inline std::vector<double> knn_density(std::span<const double> sorted, std::size_t k) {
    const std::size_t n = sorted.size();
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t kk = k;
        while (true) {
            const std::size_t lo = i >= kk ? i - kk : 0;
            const std::size_t hi = std::min(n - 1, i + kk);
            const double w = sorted[hi] - sorted[lo];
            if (w > 0.0) {
                p[i] = static_cast<double>(hi - lo) / (static_cast<double>(n) * w);
                break;
            }
            if (lo == 0 && hi == n - 1) {
                fail(ErrorKind::estimation, "degenerate sample (all values equal)");
            }
            kk *= 2;
        }
    }
    return p;
}

/// Escort second moment ∫x² p^q / ∫p^q written as sample averages,
/// Σ x_i² p̂_i^(q-1) / Σ p̂_i^(q-1); at q = 1 it is exactly the sample
/// second moment.
inline double escort_second_moment(std::span<const double> samples,
                                   std::span<const double> density, double q) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = std::pow(density[i], q - 1.0);
        num += samples[i] * samples[i] * w;
        den += w;
    }
    if (!(den > 0.0)) fail(ErrorKind::estimation, "escort weights vanish");
    return num / den;
}

/// Nontrivial moment solutions at or above this are treated as q >= 5/3:
/// the sample second moment does not converge there, and finite samples pin
/// the solution just below 5/3.
inline constexpr double divergent_q_threshold = 5.0 / 3.0 - 0.03;

/// q-moments estimator. The sample second moment is combined with the
/// plug-in escort second moment; q is the self-consistent solution
/// q = Q(m2 / m2q(q)) of the closed-form moment system, taking the largest
/// root (q = 1 always solves it trivially).
inline FitResult fit_q_moments(const EmpiricalDistribution& dist) {
    const auto s = dist.samples();
    if (s.size() < 100) fail(ErrorKind::estimation, "q-moments need at least 100 samples");
    double m2 = 0.0;
    double m4 = 0.0;
    for (double x : s) {
        m2 += x * x;
        m4 += x * x * x * x;
    }
    const double n = static_cast<double>(s.size());
    m2 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) fail(ErrorKind::estimation, "degenerate sample (zero second moment)");

    const auto k = static_cast<std::size_t>(std::max(10.0, std::sqrt(n)));
    const std::vector<double> density = knn_density(s, k);
    auto implied_gap = [&](double qt) {
        const double r = m2 / escort_second_moment(s, density, qt);
        const double q = r >= 1.0 ? (5.0 * r - 3.0) / (3.0 * r - 1.0) : 1.0;
        return q - qt;
    };

    constexpr double q_top = 5.0 / 3.0 - 1e-6;
    constexpr double q_bottom = 1.0 + 1e-3;
    constexpr double step = 2.5e-3;
    double root = 1.0;
    double hi = q_top;
    double g_hi = implied_gap(hi);
    for (double lo = q_top - step; lo >= q_bottom; lo -= step) {
        const double g_lo = implied_gap(lo);
        if ((g_lo >= 0.0) != (g_hi >= 0.0)) {
            double a = lo, b = hi, ga = g_lo;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (a + b);
                const double gm = implied_gap(mid);
                if ((gm >= 0.0) == (ga >= 0.0)) {
                    a = mid;
                    ga = gm;
                } else {
                    b = mid;
                }
            }
            root = 0.5 * (a + b);
            break;
        }
        hi = lo;
        g_hi = g_lo;
    }

    const double m2q = escort_second_moment(s, density, root);
    const double r = m2 / m2q;
    const double implied = r >= 1.0 ? (5.0 * r - 3.0) / (3.0 * r - 1.0) : 1.0;
    if (std::max(root, implied) >= divergent_q_threshold) {
        std::ostringstream os;
        os << "q-moments imply q=" << std::max(root, implied) << " at horizon " << dist.horizon()
           << ", where the second moment diverges (q >= 5/3); use the cdf-ls method";
        fail(ErrorKind::divergent_moment, os.str());
    }

    const MomentSolution sol = solve_q_moments(m2, m2q);
    FitResult out;
    out.method = FitMethod::q_moments;
    out.q = sol.q;
    out.beta = sol.beta;
    // Delta-method errors from the sampling variance of m2 only.
    const double m2_se = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
    const double dq_dr = 4.0 / ((3.0 * r - 1.0) * (3.0 * r - 1.0));
    out.q_se = dq_dr * r * m2_se / m2;
    out.beta_se = out.beta * out.q_se / (3.0 - out.q);
    return out;
}

inline FitResult fit_distribution(const EmpiricalDistribution& dist, FitMethod method) {
    switch (method) {
    case FitMethod::pdf_ls: return fit_pdf_least_squares(dist);
    case FitMethod::q_moments: return fit_q_moments(dist);
    case FitMethod::cdf_ls: return fit_cdf_least_squares(dist);
    }
    fail(ErrorKind::configuration, "unknown fit method");
}

/// D = beta^(-alpha/2) / t, the inverse of beta = (D t)^(-2/alpha).
inline double extract_d(double beta, double alpha, double t) {
    if (!(beta > 0.0) || !(alpha > 0.0) || !(t > 0.0)) {
        fail(ErrorKind::domain, "extract_d requires beta, alpha, t > 0");
    }
    return std::pow(beta, -alpha / 2.0) / t;
}

struct AlphaEstimate {
    double horizon = 0.0;
    double alpha = 0.0;
    double slope = 0.0;         // d ln beta / d ln t over the window
    double log_intercept = 0.0; // ln b in beta = b t^slope
    std::size_t first = 0;      // window, inclusive indices into the input
    std::size_t last = 0;
};

/// Local power-law exponent of beta(t): for each horizon, ln beta = ln b +
/// m ln t is fitted over a window of `window` neighbouring horizons and
/// alpha = -2/m. `segments` are inclusive index ranges (zones); windows are
/// kept inside the segment that owns the horizon. Empty = one segment.
inline std::vector<AlphaEstimate> extract_alpha(
    std::span<const double> horizons, std::span<const double> betas, std::size_t window,
    std::span<const std::pair<std::size_t, std::size_t>> segments = {}) {
    const std::size_t n = horizons.size();
    if (betas.size() != n) fail(ErrorKind::configuration, "extract_alpha: size mismatch");
    if (window < 3) fail(ErrorKind::configuration, "alpha window needs at least 3 horizons");
    if (n < 3) fail(ErrorKind::estimation, "alpha extraction needs at least 3 horizons");
    std::vector<double> lt(n), lb(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(horizons[i] > 0.0) || !(betas[i] > 0.0)) {
            fail(ErrorKind::domain, "extract_alpha requires positive horizons and beta");
        }
        if (i > 0 && horizons[i] <= horizons[i - 1]) {
            fail(ErrorKind::configuration, "horizons must be strictly increasing");
        }
        lt[i] = std::log(horizons[i]);
        lb[i] = std::log(betas[i]);
    }
    std::vector<std::pair<std::size_t, std::size_t>> segs(segments.begin(), segments.end());
    if (segs.empty()) segs.emplace_back(0, n - 1);

    std::vector<AlphaEstimate> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // The owning segment is the last one starting at or before i.
        std::pair<std::size_t, std::size_t> seg = segs.front();
        for (const auto& s : segs) {
            if (s.first <= i && i <= s.second) seg = s;
        }
        const std::size_t len = seg.second - seg.first + 1;
        std::size_t first;
        std::size_t last;
        if (len <= window) {
            first = seg.first;
            last = seg.second;
        } else {
            const std::size_t half = (window - 1) / 2;
            first = i >= seg.first + half ? i - half : seg.first;
            first = std::min(first, seg.second + 1 - window);
            last = first + window - 1;
        }
        if (last - first + 1 < 3) {
            std::ostringstream os;
            os << "fewer than 3 horizons available around horizon " << horizons[i];
            fail(ErrorKind::estimation, os.str());
        }
        const auto fit = optimize::fit_line(
            std::span<const double>(lt).subspan(first, last - first + 1),
            std::span<const double>(lb).subspan(first, last - first + 1));
        if (!(fit.slope < 0.0)) {
            std::ostringstream os;
            os << "beta does not decay around horizon " << horizons[i]
               << " (log-log slope " << fit.slope << "); no diffusion scaling";
            fail(ErrorKind::estimation, os.str());
        }
        AlphaEstimate a;
        a.horizon = horizons[i];
        a.slope = fit.slope;
        a.log_intercept = fit.intercept;
        a.alpha = -2.0 / fit.slope;
        a.first = first;
        a.last = last;
        out.push_back(a);
    }
    return out;
}

/// Per-horizon estimates of the diffusion parameters.
struct HorizonEstimate {
    double horizon = 0.0; // lag in steps
    double q = 1.0;
    double q_se = std::numeric_limits<double>::quiet_NaN();
    double beta = 1.0;
    double beta_se = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double D = std::numeric_limits<double>::quiet_NaN();
    std::string zone; // A, B, C, crossover, or empty before segmentation
    std::size_t samples = 0;
    double residual = std::numeric_limits<double>::quiet_NaN();
};

struct LagParams {
    double q = 1.0;
    double beta = 1.0;
};

struct ParameterCurves {
    FitMethod method = FitMethod::cdf_ls;
    std::vector<HorizonEstimate> rows; // ascending horizon

    [[nodiscard]] std::vector<double> horizons() const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.horizon);
        return v;
    }
    [[nodiscard]] std::vector<double> betas() const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.beta);
        return v;
    }

    /// Constant (q, alpha, D) tabulated on the given horizons.
    static ParameterCurves from_params(const QParams& p, std::span<const double> horizons) {
        ParameterCurves c;
        for (double t : horizons) {
            HorizonEstimate r;
            r.horizon = t;
            r.q = p.q;
            r.beta = p.beta_at(t);
            r.alpha = p.alpha;
            r.D = p.D;
            c.rows.push_back(r);
        }
        return c;
    }

    /// (q, beta) at an arbitrary lag: log-linear interpolation of beta and
    /// linear-in-log-lag interpolation of q between tabulated horizons, which
    /// is exact inside a power-law zone.
    [[nodiscard]] LagParams at(double lag) const {
        if (rows.empty()) fail(ErrorKind::configuration, "parameter curves are empty");
        const double lo = rows.front().horizon;
        const double hi = rows.back().horizon;
        const double tol = 1e-9 * hi;
        if (!(lag >= lo - tol && lag <= hi + tol)) {
            std::ostringstream os;
            os << "parameter curves cover lags [" << lo << ", " << hi << "] but lag " << lag
               << " was requested";
            fail(ErrorKind::configuration, os.str());
        }
        lag = std::clamp(lag, lo, hi);
        auto it = std::lower_bound(rows.begin(), rows.end(), lag,
                                   [](const HorizonEstimate& r, double v) { return r.horizon < v; });
        if (it == rows.begin()) return {it->q, it->beta};
        if (it->horizon == lag) return {it->q, it->beta};
        const auto prev = it - 1;
        const double w = (std::log(lag) - std::log(prev->horizon)) /
                         (std::log(it->horizon) - std::log(prev->horizon));
        LagParams p;
        p.q = prev->q + w * (it->q - prev->q);
        p.beta = std::exp(std::log(prev->beta) + w * (std::log(it->beta) - std::log(prev->beta)));
        return p;
    }
};

/// Fits every distribution with one method; rows follow horizon order.
inline ParameterCurves fit_curves(std::span<const EmpiricalDistribution> dists, FitMethod method) {
    ParameterCurves c;
    c.method = method;
    for (const auto& d : dists) {
        FitResult f;
        try {
            f = fit_distribution(d, method);
        } catch (const Error& e) {
            std::ostringstream os;
            os << "horizon " << d.horizon() << ": " << e.message();
            throw Error(e.kind(), os.str());
        }
        HorizonEstimate r;
        r.horizon = d.horizon();
        r.q = f.q;
        r.q_se = f.q_se;
        r.beta = f.beta;
        r.beta_se = f.beta_se;
        r.samples = d.size();
        r.residual = f.relative_residual;
        c.rows.push_back(r);
    }
    std::sort(c.rows.begin(), c.rows.end(),
              [](const HorizonEstimate& a, const HorizonEstimate& b) { return a.horizon < b.horizon; });
    return c;
}

/// Fills alpha and D per horizon from the windowed power law of beta(t).
inline void assign_alpha_d(ParameterCurves& curves, std::size_t window,
                           std::span<const std::pair<std::size_t, std::size_t>> segments = {}) {
    const auto h = curves.horizons();
    const auto b = curves.betas();
    const auto alphas = extract_alpha(h, b, window, segments);
    for (std::size_t i = 0; i < curves.rows.size(); ++i) {
        curves.rows[i].alpha = alphas[i].alpha;
        curves.rows[i].D = extract_d(curves.rows[i].beta, alphas[i].alpha, curves.rows[i].horizon);
    }
}

} // namespace qdiff

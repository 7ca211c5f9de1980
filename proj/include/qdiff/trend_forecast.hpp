#pragma once

// Deterministic response trends, the q-Gaussian cone of uncertainty around
// them, simulated index paths and forecast scoring.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/estimate.hpp"
#include "qdiff/optimize.hpp"
#include "qdiff/qstats.hpp"
#include "qdiff/series.hpp"

namespace qdiff {

/// OLS slope of I(t) against time over [fit_start, fit_end], in price per
/// day, with time counted in trading steps (`steps_per_day` per day).
inline double fit_collapse_slope(const IndexSeries& series, Timestamp fit_start,
                                 Timestamp fit_end, double steps_per_day = 1.0) {
    if (!(steps_per_day > 0.0)) fail(ErrorKind::configuration, "steps_per_day must be > 0");
    if (fit_end < fit_start) fail(ErrorKind::configuration, "collapse fit interval is reversed");
    const std::size_t first = series.lower_index(fit_start);
    const std::size_t last = series.lower_index(fit_end + 1);
    if (last <= first) fail(ErrorKind::configuration, "collapse fit interval holds no observations");
    if (last - first < 2) {
        fail(ErrorKind::configuration, "collapse fit interval needs at least two observations");
    }
    std::vector<double> t;
    std::vector<double> v;
    for (std::size_t i = first; i < last; ++i) {
        t.push_back(static_cast<double>(i - first) / steps_per_day);
        v.push_back(series.values()[i]);
    }
    return optimize::fit_line(t, v).slope;
}

enum class TrendKind { parabola, hyperbola };

inline std::string to_string(TrendKind k) {
    return k == TrendKind::parabola ? "parabola" : "hyperbola";
}

inline TrendKind parse_trend_kind(const std::string& s) {
    if (s == "parabola") return TrendKind::parabola;
    if (s == "hyperbola") return TrendKind::hyperbola;
    fail(ErrorKind::configuration, "unknown trend kind '" + s + "' (parabola | hyperbola)");
}

/// Deterministic trend Ĩ(t), t in days since the anchor t0.
struct TrendModel {
    TrendKind kind = TrendKind::parabola;
    Timestamp t0 = 0;
    double I0 = 0.0;
    double collapse_slope = 0.0; // price/day
    double recovery_time = 0.0;  // days: zero-derivative point or asymptote intersection
    double recovery_ratio = 0.5; // hyperbola only
    double smoothing = 0.0;      // hyperbola only, price units
    double curvature = 0.0;      // parabola: c in I0 + slope t + c t²
    double offset = 0.0;         // hyperbola: calibration so that Ĩ(0) = I0

    [[nodiscard]] double value(double t) const {
        if (kind == TrendKind::parabola) {
            return I0 + collapse_slope * t + curvature * t * t;
        }
        const double l1 = collapse_line(t);
        const double l2 = recovery_line(t);
        const double half = 0.5 * (l1 - l2);
        return 0.5 * (l1 + l2) + std::hypot(half, smoothing) + offset;
    }

    [[nodiscard]] double derivative(double t) const {
        if (kind == TrendKind::parabola) return collapse_slope + 2.0 * curvature * t;
        const double s1 = collapse_slope;
        const double s2 = recovery_slope();
        const double half = 0.5 * (collapse_line(t) - recovery_line(t));
        const double r = std::hypot(half, smoothing);
        return 0.5 * (s1 + s2) + (r > 0.0 ? half / r : 0.0) * 0.5 * (s1 - s2);
    }

    [[nodiscard]] double collapse_line(double t) const { return I0 + collapse_slope * t; }
    [[nodiscard]] double recovery_slope() const {
        return recovery_ratio * std::abs(collapse_slope);
    }
    [[nodiscard]] double recovery_line(double t) const {
        return collapse_line(recovery_time) + recovery_slope() * (t - recovery_time);
    }
};

/// Ĩ(t) = I0 + slope t + c t² with c = -slope / (2 recovery_time), so that
/// Ĩ(0) = I0, Ĩ'(0) = slope and Ĩ'(recovery_time) = 0.
inline TrendModel parabola_trend(double I0, double slope, double recovery_time,
                                 Timestamp t0 = 0) {
    if (!std::isfinite(I0) || !std::isfinite(slope)) {
        fail(ErrorKind::configuration, "trend level and slope must be finite");
    }
    if (!(recovery_time > 0.0)) fail(ErrorKind::configuration, "recovery_time must be > 0");
    if (slope > 0.0) fail(ErrorKind::configuration, "collapse slope must not be positive");
    TrendModel m;
    m.kind = TrendKind::parabola;
    m.t0 = t0;
    m.I0 = I0;
    m.collapse_slope = slope;
    m.recovery_time = recovery_time;
    m.curvature = -slope / (2.0 * recovery_time);
    return m;
}

/// Smoothed maximum of the collapse line L1(t) = I0 + slope t and the
/// recovery line L2 of slope recovery_ratio |slope| crossing L1 at
/// `intersection_time`:
///   Ĩ = (L1 + L2)/2 + sqrt(((L1 - L2)/2)² + smoothing²) + offset,
/// a convex hyperbola with L1 and L2 as asymptotes; the offset makes
/// Ĩ(0) = I0.
inline TrendModel hyperbola_trend(double I0, double slope, double recovery_ratio,
                                  double smoothing, double intersection_time,
                                  Timestamp t0 = 0) {
    if (!std::isfinite(I0) || !std::isfinite(slope)) {
        fail(ErrorKind::configuration, "trend level and slope must be finite");
    }
    if (!(slope < 0.0)) fail(ErrorKind::configuration, "hyperbola needs a negative collapse slope");
    if (!(recovery_ratio > 0.0 && recovery_ratio <= 1.0)) {
        fail(ErrorKind::configuration, "recovery_ratio must be in (0, 1]");
    }
    if (!(smoothing > 0.0) || !std::isfinite(smoothing)) {
        fail(ErrorKind::configuration, "hyperbola smoothing must be > 0");
    }
    if (!(intersection_time > 0.0)) {
        fail(ErrorKind::configuration, "asymptote intersection time must be > 0");
    }
    TrendModel m;
    m.kind = TrendKind::hyperbola;
    m.t0 = t0;
    m.I0 = I0;
    m.collapse_slope = slope;
    m.recovery_ratio = recovery_ratio;
    m.smoothing = smoothing;
    m.recovery_time = intersection_time;
    m.offset = 0.0;
    m.offset = I0 - m.value(0.0);
    return m;
}

inline double default_smoothing(double I0) { return 0.02 * std::abs(I0); }

struct ForecastOptions {
    double horizon_days = 60.0;
    double day_step = 1.0;      // spacing of the time grid, days
    double steps_per_day = 1.0; // trading steps per day, converts days to lags
    std::vector<double> levels{0.05, 0.15, 0.3173, 0.5, 0.75};
    std::size_t price_points = 201;
    double price_margin_level = 0.01; // price grid spans this exceedance band
};

struct Contour {
    double level = 0.0;
    std::vector<double> lower; // per grid time
    std::vector<double> upper;
};

/// Exceedance probability P(|X - X̄| > |price - Ĩ(t)|) on a time × price
/// grid, centred on the trend.
struct ForecastCone {
    Timestamp t0 = 0;
    std::vector<double> days;  // grid times, days since t0 (> 0)
    std::vector<double> trend; // Ĩ at each grid time
    std::vector<double> q;     // parameters at each grid time
    std::vector<double> beta;
    std::vector<double> prices;                   // common price grid
    std::vector<std::vector<double>> exceedance;  // [time][price]
    std::vector<Contour> contours;

    /// Exceedance of an arbitrary price at grid time index i.
    [[nodiscard]] double exceedance_at(std::size_t i, double price) const {
        return exceedance_beta(std::abs(price - trend[i]), q[i], beta[i]);
    }

    /// Half-width of the band where exceedance >= level at grid time i.
    [[nodiscard]] double half_width(std::size_t i, double level) const {
        if (!(level > 0.0 && level <= 1.0)) {
            fail(ErrorKind::configuration, "cone levels must be in (0, 1]");
        }
        return q_erf_inverse(1.0 - level, q[i]) / std::sqrt(beta[i]);
    }
};

namespace detail {

inline std::vector<double> day_grid(const ForecastOptions& opt) {
    if (!(opt.horizon_days > 0.0)) fail(ErrorKind::configuration, "forecast horizon must be > 0");
    if (!(opt.day_step > 0.0)) fail(ErrorKind::configuration, "forecast day_step must be > 0");
    if (!(opt.steps_per_day > 0.0)) fail(ErrorKind::configuration, "steps_per_day must be > 0");
    std::vector<double> days;
    const auto n = static_cast<std::size_t>(std::floor(opt.horizon_days / opt.day_step + 1e-9));
    for (std::size_t i = 1; i <= n; ++i) days.push_back(static_cast<double>(i) * opt.day_step);
    if (days.empty()) fail(ErrorKind::configuration, "forecast horizon is shorter than one step");
    return days;
}

inline LagParams lag_params(const ParameterCurves& curves, double day, double steps_per_day) {
    try {
        return curves.at(day * steps_per_day);
    } catch (const Error& e) {
        std::ostringstream os;
        os << "day " << day << ": " << e.message();
        throw Error(e.kind(), os.str());
    }
}

} // namespace detail

inline ForecastCone forecast_cone(const TrendModel& trend, const ParameterCurves& curves,
                                  const ForecastOptions& opt = {}) {
    for (double l : opt.levels) {
        if (!(l > 0.0 && l < 1.0)) fail(ErrorKind::configuration, "cone levels must be in (0, 1)");
    }
    if (opt.price_points < 2) fail(ErrorKind::configuration, "price grid needs at least 2 points");
    if (!(opt.price_margin_level > 0.0 && opt.price_margin_level < 1.0)) {
        fail(ErrorKind::configuration, "price_margin_level must be in (0, 1)");
    }
    ForecastCone cone;
    cone.t0 = trend.t0;
    cone.days = detail::day_grid(opt);
    for (double d : cone.days) {
        const LagParams p = detail::lag_params(curves, d, opt.steps_per_day);
        cone.trend.push_back(trend.value(d));
        cone.q.push_back(p.q);
        cone.beta.push_back(p.beta);
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < cone.days.size(); ++i) {
        const double w = cone.half_width(i, opt.price_margin_level);
        lo = std::min(lo, cone.trend[i] - w);
        hi = std::max(hi, cone.trend[i] + w);
    }
    cone.prices.resize(opt.price_points);
    for (std::size_t k = 0; k < opt.price_points; ++k) {
        cone.prices[k] = lo + (hi - lo) * static_cast<double>(k) /
                                  static_cast<double>(opt.price_points - 1);
    }
    cone.exceedance.resize(cone.days.size());
    for (std::size_t i = 0; i < cone.days.size(); ++i) {
        cone.exceedance[i].reserve(cone.prices.size());
        for (double p : cone.prices) cone.exceedance[i].push_back(cone.exceedance_at(i, p));
    }

    std::vector<double> levels = opt.levels;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    for (double l : levels) {
        Contour c;
        c.level = l;
        for (std::size_t i = 0; i < cone.days.size(); ++i) {
            const double w = cone.half_width(i, l);
            c.lower.push_back(cone.trend[i] - w);
            c.upper.push_back(cone.trend[i] + w);
        }
        cone.contours.push_back(std::move(c));
    }
    return cone;
}

/// n index paths Ĩ(t) + x(t) on the cone's day grid; x(t) is an
/// independent draw from the lag-t marginal law for every day.
struct PathEnsemble {
    std::vector<double> days;
    std::vector<double> trend;
    std::size_t paths = 0;
    std::vector<double> values; // path-major: values[p * days.size() + i]

    [[nodiscard]] double at(std::size_t path, std::size_t day_index) const {
        return values[path * days.size() + day_index];
    }
};

inline PathEnsemble simulate_paths(const TrendModel& trend, const ParameterCurves& curves,
                                   std::size_t n, std::uint64_t seed,
                                   const ForecastOptions& opt = {}) {
    if (n < 1) fail(ErrorKind::configuration, "simulate_paths needs at least one path");
    PathEnsemble e;
    e.days = detail::day_grid(opt);
    e.paths = n;
    std::vector<QGaussianDistribution> laws;
    for (double d : e.days) {
        const LagParams p = detail::lag_params(curves, d, opt.steps_per_day);
        laws.emplace_back(p.q, p.beta);
        e.trend.push_back(trend.value(d));
    }
    const std::size_t m = e.days.size();
    e.values.resize(n * m);
    for (std::size_t p = 0; p < n; ++p) {
        std::mt19937_64 engine(mix_seed(seed, p));
        for (std::size_t i = 0; i < m; ++i) e.values[p * m + i] = e.trend[i] + laws[i](engine);
    }
    return e;
}

struct PathSummaryRow {
    double day = 0.0;
    double trend = 0.0;
    double mean = 0.0;
    double std = 0.0;
    double q05 = 0.0;
    double q50 = 0.0;
    double q95 = 0.0;
};

inline std::vector<PathSummaryRow> summarize_paths(const PathEnsemble& e) {
    std::vector<PathSummaryRow> out;
    std::vector<double> col(e.paths);
    for (std::size_t i = 0; i < e.days.size(); ++i) {
        double sum = 0.0;
        for (std::size_t p = 0; p < e.paths; ++p) {
            col[p] = e.at(p, i);
            sum += col[p];
        }
        PathSummaryRow r;
        r.day = e.days[i];
        r.trend = e.trend[i];
        r.mean = sum / static_cast<double>(e.paths);
        double ss = 0.0;
        for (double v : col) ss += (v - r.mean) * (v - r.mean);
        r.std = e.paths > 1 ? std::sqrt(ss / static_cast<double>(e.paths - 1)) : 0.0;
        std::sort(col.begin(), col.end());
        r.q05 = sorted_quantile(col, 0.05);
        r.q50 = sorted_quantile(col, 0.50);
        r.q95 = sorted_quantile(col, 0.95);
        out.push_back(r);
    }
    return out;
}

struct AccuracyFlag {
    double day = 0.0;
    double realized = 0.0;
    double trend = 0.0;
    double exceedance = 0.0;
    bool inside = false;
};

struct AccuracyReport {
    double level = 0.15;
    std::size_t inside = 0;
    std::size_t total = 0;
    double fraction = 0.0;
    std::vector<AccuracyFlag> flags;
};

/// Fraction of realized observations inside the band where the exceedance
/// probability is at least `level`. Observations are matched to the cone's
/// grid by their trading-step offset from t0.
inline AccuracyReport accuracy(const ForecastCone& cone, const IndexSeries& realized,
                               double level = 0.15, double steps_per_day = 1.0) {
    if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::configuration, "accuracy level must be in (0, 1)");
    if (!(steps_per_day > 0.0)) fail(ErrorKind::configuration, "steps_per_day must be > 0");
    AccuracyReport rep;
    rep.level = level;
    const std::size_t start = realized.lower_index(cone.t0);
    if (start < realized.size() && realized.timestamps()[start] == cone.t0) {
        for (std::size_t i = start + 1; i < realized.size(); ++i) {
            const double day = static_cast<double>(i - start) / steps_per_day;
            const auto it = std::lower_bound(cone.days.begin(), cone.days.end(), day - 1e-9);
            if (it == cone.days.end()) break;
            if (std::abs(*it - day) > 1e-9) continue;
            const auto k = static_cast<std::size_t>(it - cone.days.begin());
            AccuracyFlag f;
            f.day = day;
            f.realized = realized.values()[i];
            f.trend = cone.trend[k];
            f.exceedance = cone.exceedance_at(k, f.realized);
            f.inside = f.exceedance >= level;
            rep.flags.push_back(f);
        }
    }
    if (rep.flags.empty()) {
        fail(ErrorKind::configuration, "realized series does not overlap the forecast grid");
    }
    for (const auto& f : rep.flags) rep.inside += f.inside ? 1 : 0;
    rep.total = rep.flags.size();
    rep.fraction = static_cast<double>(rep.inside) / static_cast<double>(rep.total);
    return rep;
}

/// Accuracy of simulated paths scored against their own cone, over all
/// path-days. With the paths drawn from the cone's laws the expected
/// fraction is 1 - level.
inline AccuracyReport ensemble_accuracy(const ForecastCone& cone, const PathEnsemble& e,
                                        double level = 0.15) {
    if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::configuration, "accuracy level must be in (0, 1)");
    if (e.days.size() != cone.days.size()) {
        fail(ErrorKind::configuration, "path ensemble and cone use different time grids");
    }
    AccuracyReport rep;
    rep.level = level;
    for (std::size_t i = 0; i < cone.days.size(); ++i) {
        const double w = cone.half_width(i, level);
        for (std::size_t p = 0; p < e.paths; ++p) {
            rep.inside += std::abs(e.at(p, i) - cone.trend[i]) <= w ? 1 : 0;
        }
    }
    rep.total = e.paths * cone.days.size();
    rep.fraction = static_cast<double>(rep.inside) / static_cast<double>(rep.total);
    return rep;
}

} // namespace qdiff

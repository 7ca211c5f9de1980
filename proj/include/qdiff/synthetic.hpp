#pragma once

// Synthetic daily index with a smooth trend, q-Gaussian fluctuations that
// diffuse anomalously at short lags, and a crash followed by a hyperbolic
// recovery. Used for the bundled example dataset and end-to-end tests.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "qdiff/qstats.hpp"
#include "qdiff/series.hpp"
#include "qdiff/trend_forecast.hpp"

namespace qdiff {

struct SyntheticSpec {
    std::size_t history_days = 24000; // trading days up to and including t0
    std::size_t after_days = 80;      // realized trading days after t0
    std::size_t crash_days = 40;      // length of the decline before t0
    double crash_slope = -15.0;       // price/day
    double recovery_days = 60.0;
    double recovery_ratio = 0.5;
    double level = 2000.0;
    double drift = 0.03;   // price/day of the smooth trend
    double cycle = 200.0;  // amplitude of the slow cycle
    double period = 5000.0;
    double q = 1.3;        // innovation law
    double beta = 0.09;
    double momentum = 0.5;     // AR(1) of daily increments (short memory)
    double persistence = 0.9;  // AR(1) of a slower increment component
    double slow_share = 0.15;  // its innovation scale relative to the fast one
    double reversion = 5000.0; // mean-reversion time of the level, days
    std::uint64_t seed = 20200228;
    int start_year = 1926;
};

struct SyntheticIndex {
    IndexSeries series;
    Timestamp t0 = 0;
    Timestamp crash_start = 0;
    TrendModel recovery; // the deterministic trend after t0
};

/// Weekday timestamps (UTC midnight) starting on the first weekday of
/// `start_year`.
inline std::vector<Timestamp> weekday_timestamps(std::size_t n, int start_year) {
    using namespace std::chrono;
    sys_days d{year{start_year} / January / 1};
    std::vector<Timestamp> out;
    out.reserve(n);
    while (out.size() < n) {
        const weekday wd{d};
        if (wd != Saturday && wd != Sunday) {
            out.push_back(static_cast<Timestamp>(d.time_since_epoch().count()) * 86400);
        }
        d += days{1};
    }
    return out;
}

inline SyntheticIndex make_synthetic_index(const SyntheticSpec& s = {}) {
    const std::size_t n = s.history_days + s.after_days;
    std::mt19937_64 engine(s.seed);
    const QGaussianDistribution fast(s.q, s.beta);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double slow_sd = s.slow_share * std::sqrt(variance_from_beta(s.q, s.beta));

    std::vector<double> fluct(n);
    double a = 0.0;
    double b = 0.0;
    double y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        a = s.momentum * a + fast(engine);
        b = s.persistence * b + slow_sd * gauss(engine);
        y = (1.0 - 1.0 / s.reversion) * y + a + b;
        fluct[i] = y;
    }

    const std::size_t i0 = s.history_days - 1;
    const std::size_t ic = i0 - s.crash_days;
    auto smooth = [&](double t) {
        return s.level + s.drift * t + s.cycle * std::sin(2.0 * std::numbers::pi * t / s.period);
    };
    const double crash_top = smooth(static_cast<double>(ic));
    const double I0_trend = crash_top + s.crash_slope * static_cast<double>(s.crash_days);

    SyntheticIndex out;
    auto ts = weekday_timestamps(n, s.start_year);
    out.t0 = ts[i0];
    out.crash_start = ts[ic];
    out.recovery = hyperbola_trend(I0_trend, s.crash_slope, s.recovery_ratio,
                                   default_smoothing(I0_trend), s.recovery_days, out.t0);

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        double base;
        if (i <= ic) {
            base = smooth(static_cast<double>(i));
        } else if (i <= i0) {
            base = crash_top + s.crash_slope * static_cast<double>(i - ic);
        } else {
            base = out.recovery.value(static_cast<double>(i - i0));
        }
        values[i] = base + fluct[i];
    }
    out.series = IndexSeries(std::move(ts), std::move(values), 86400);
    return out;
}

} // namespace qdiff

#pragma once

// Price returns, moving-window trend and the detrended fluctuation.

#include <algorithm>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/series.hpp"

namespace qdiff {

/// X(t) = X̄(t) + x(t), aligned on the timestamps from t0 onwards.
struct Decomposition {
    std::vector<Timestamp> timestamps;
    std::vector<double> price_return;
    std::vector<double> trend;
    std::vector<double> fluctuation;
    std::size_t window = 0; // steps actually averaged over (odd)

    [[nodiscard]] std::size_t size() const { return timestamps.size(); }
};

/// X(t) = I(t0 + t) - I(t0) for every observation at or after t0.
inline TimeSeries price_return(const IndexSeries& series, Timestamp t0) {
    const std::size_t start = series.index_of(t0);
    const auto ts = series.timestamps();
    const auto v = series.values();
    TimeSeries out;
    out.timestamps.assign(ts.begin() + static_cast<std::ptrdiff_t>(start), ts.end());
    out.values.reserve(out.timestamps.size());
    const double base = v[start];
    for (std::size_t i = start; i < v.size(); ++i) out.values.push_back(v[i] - base);
    return out;
}

/// Effective averaging width: even windows are widened by one step so the
/// average stays centred.
inline std::size_t centred_window(std::size_t window_steps) {
    return window_steps % 2 == 0 ? window_steps + 1 : window_steps;
}

/// Centred moving average of width `window_steps`. Near the ends the
/// half-width shrinks to the distance to the nearer end, so every average
/// stays symmetric about its point (the first and last points average over
/// themselves only).
inline std::vector<double> moving_average(std::span<const double> values,
                                          std::size_t window_steps) {
    if (window_steps < 2) {
        fail(ErrorKind::configuration, "trend window must span at least 2 steps");
    }
    const std::size_t n = values.size();
    if (n < window_steps) {
        std::ostringstream os;
        os << "series of " << n << " points is shorter than the " << window_steps
           << "-step trend window";
        fail(ErrorKind::configuration, os.str());
    }
    const std::size_t half = centred_window(window_steps) / 2;

    // Compensated prefix sums of values - values[0]; the offset keeps the
    // partial sums small so a constant shift of the input moves the output by
    // the same constant up to rounding of the shift itself.
    const double origin = values[0];
    std::vector<long double> prefix(n + 1, 0.0L);
    long double sum = 0.0L;
    long double comp = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double y = static_cast<long double>(values[i] - origin) - comp;
        const long double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        prefix[i + 1] = sum;
    }

    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t h = std::min({half, i, n - 1 - i});
        const std::size_t lo = i - h;
        const std::size_t hi = i + h + 1;
        const long double mean = (prefix[hi] - prefix[lo]) / static_cast<long double>(hi - lo);
        out[i] = origin + static_cast<double>(mean);
    }
    return out;
}

/// Moving-window trend of the index levels, aligned with the input.
inline TimeSeries moving_trend(const IndexSeries& series, std::size_t window_steps) {
    TimeSeries out;
    const auto ts = series.timestamps();
    out.timestamps.assign(ts.begin(), ts.end());
    out.values = moving_average(series.values(), window_steps);
    return out;
}

/// Splits the price return from t0 into trend and stationary fluctuation.
inline Decomposition detrend(const IndexSeries& series, Timestamp t0, std::size_t window_steps) {
    TimeSeries ret = price_return(series, t0);
    Decomposition d;
    d.trend = moving_average(ret.values, window_steps);
    d.window = centred_window(window_steps);
    d.fluctuation.resize(ret.size());
    for (std::size_t i = 0; i < ret.size(); ++i) d.fluctuation[i] = ret.values[i] - d.trend[i];
    d.timestamps = std::move(ret.timestamps);
    d.price_return = std::move(ret.values);
    return d;
}

} // namespace qdiff

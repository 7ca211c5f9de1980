#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qdiff/error.hpp"

namespace qdiff {

/// Seconds since the Unix epoch.
using Timestamp = std::int64_t;

/// A plain timestamped series of real values, used for derived quantities
/// (returns, trends, fluctuations) that may be zero or negative.
struct TimeSeries {
    std::vector<Timestamp> timestamps;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const { return values.size(); }
};

/// Index levels I(t) observed at a fixed resolution.
///
/// Market closures appear as timestamp jumps larger than the resolution.
/// They are kept as they are: lags and horizons are counted in positions
/// (trading time), never by calendar arithmetic, and nothing is
/// interpolated into the gaps.
class IndexSeries {
public:
    IndexSeries() = default;

    IndexSeries(std::vector<Timestamp> timestamps, std::vector<double> values,
                std::int64_t resolution_seconds)
        : timestamps_(std::move(timestamps)), values_(std::move(values)),
          resolution_(resolution_seconds) {
        validate();
    }

    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }
    [[nodiscard]] std::span<const Timestamp> timestamps() const { return timestamps_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }
    [[nodiscard]] std::int64_t resolution() const { return resolution_; }

    /// Position of an exact timestamp.
    [[nodiscard]] std::size_t index_of(Timestamp ts) const {
        auto it = std::lower_bound(timestamps_.begin(), timestamps_.end(), ts);
        if (it == timestamps_.end() || *it != ts) {
            std::ostringstream os;
            os << "timestamp " << ts << " not present in series";
            fail(ErrorKind::lookup, os.str());
        }
        return static_cast<std::size_t>(it - timestamps_.begin());
    }

    /// Position of the first observation at or after ts.
    [[nodiscard]] std::size_t lower_index(Timestamp ts) const {
        return static_cast<std::size_t>(
            std::lower_bound(timestamps_.begin(), timestamps_.end(), ts) - timestamps_.begin());
    }

    /// Number of steps where consecutive timestamps are further apart than
    /// the resolution (closures, holidays).
    [[nodiscard]] std::size_t gap_count() const {
        std::size_t gaps = 0;
        for (std::size_t i = 1; i < timestamps_.size(); ++i) {
            if (timestamps_[i] - timestamps_[i - 1] > resolution_) ++gaps;
        }
        return gaps;
    }

    /// Copy with a constant added to every level.
    [[nodiscard]] IndexSeries shifted(double c) const {
        std::vector<double> v(values_);
        for (auto& x : v) x += c;
        return IndexSeries(timestamps_, std::move(v), resolution_);
    }

    /// Observations in [first, last) by position.
    [[nodiscard]] IndexSeries slice(std::size_t first, std::size_t last) const {
        last = std::min(last, size());
        first = std::min(first, last);
        return IndexSeries(
            std::vector<Timestamp>(timestamps_.begin() + static_cast<std::ptrdiff_t>(first),
                                   timestamps_.begin() + static_cast<std::ptrdiff_t>(last)),
            std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(first),
                                values_.begin() + static_cast<std::ptrdiff_t>(last)),
            resolution_);
    }

private:
    void validate() const {
        if (timestamps_.size() != values_.size()) {
            fail(ErrorKind::data, "timestamps and values differ in length");
        }
        if (resolution_ <= 0) {
            fail(ErrorKind::configuration, "series resolution must be positive");
        }
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]) || values_[i] <= 0.0) {
                std::ostringstream os;
                os << "index value at position " << i << " must be finite and positive";
                fail(ErrorKind::data, os.str());
            }
            if (i > 0 && timestamps_[i] <= timestamps_[i - 1]) {
                std::ostringstream os;
                os << "timestamps not strictly increasing at position " << i;
                fail(ErrorKind::data, os.str());
            }
        }
    }

    std::vector<Timestamp> timestamps_;
    std::vector<double> values_;
    std::int64_t resolution_ = 86400;
};

} // namespace qdiff

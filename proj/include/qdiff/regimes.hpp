#pragma once

// Segmentation of the horizon axis into diffusion zones from slope changes
// of ln beta versus ln t.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/estimate.hpp"

namespace qdiff {

struct Zone {
    std::string label; // A, B or C
    double start_horizon = 0.0;
    double end_horizon = 0.0;
    double slope = 0.0;         // d ln beta / d ln t
    double log_intercept = 0.0; // ln beta = log_intercept + slope ln t
    double alpha = 0.0;         // -2 / slope
};

struct ZoneSegmentation {
    std::array<double, 2> boundaries{};       // first horizons of zones B and C
    std::array<std::size_t, 2> break_index{}; // their positions in the sorted table
    std::array<Zone, 3> zones;
    std::vector<std::pair<double, double>> crossovers;
    std::vector<double> horizons;    // sorted
    std::vector<std::string> labels; // per horizon: A, B, C or crossover
    double residual = 0.0;           // sum of squared ln beta residuals

    // Normal-diffusion limits inside zone C: |alpha - 2| <= 0.05 and
    // |q - 1| <= 0.05. A failed check is reported, not thrown, so the
    // segmentation of data that never reaches normal diffusion stays usable.
    bool zone_c_normal = false;
    double zone_c_mean_q = std::numeric_limits<double>::quiet_NaN();
    std::string zone_c_note;

    /// Inclusive index ranges of the three zones, suitable as extract_alpha
    /// segments.
    [[nodiscard]] std::vector<std::pair<std::size_t, std::size_t>> segments() const {
        return {{0, break_index[0] - 1},
                {break_index[0], break_index[1] - 1},
                {break_index[1], horizons.size() - 1}};
    }
};

struct ZoneOptions {
    double sensitivity = 0.02;        // minimum |slope change| at a break
    double jump_sensitivity = 0.15;   // or minimum |ln beta jump| at a break
    double significance = 5.0;        // standard errors a change must exceed
    std::size_t min_points = 3;       // per zone
    std::size_t crossover_points = 1; // grid points on each side of a break
    double alpha_tolerance = 0.05;
    double q_tolerance = 0.05;
};

namespace detail {

// Prefix sums of (1, u, u^2, y, uy, y^2) for O(1) segment line fits.
struct PrefixSums {
    std::vector<double> n, u, uu, y, uy, yy;

    PrefixSums(std::span<const double> uv, std::span<const double> yv) {
        const std::size_t m = uv.size();
        n.assign(m + 1, 0.0);
        u = uu = y = uy = yy = n;
        for (std::size_t i = 0; i < m; ++i) {
            n[i + 1] = n[i] + 1.0;
            u[i + 1] = u[i] + uv[i];
            uu[i + 1] = uu[i] + uv[i] * uv[i];
            y[i + 1] = y[i] + yv[i];
            uy[i + 1] = uy[i] + uv[i] * yv[i];
            yy[i + 1] = yy[i] + yv[i] * yv[i];
        }
    }
};

struct SegmentFit {
    double slope = 0.0;
    double intercept = 0.0; // in the centred coordinates
    double ssr = 0.0;
    double n = 0.0;
    double mean_u = 0.0;
    double sxx = 0.0;

    // Variances per unit residual variance.
    [[nodiscard]] double slope_var() const { return 1.0 / sxx; }
    [[nodiscard]] double value_var(double at) const {
        return 1.0 / n + (at - mean_u) * (at - mean_u) / sxx;
    }
};

// Least-squares line over indices [first, last).
inline SegmentFit fit_segment(const PrefixSums& s, std::size_t first, std::size_t last) {
    const double n = s.n[last] - s.n[first];
    const double su = s.u[last] - s.u[first];
    const double sy = s.y[last] - s.y[first];
    const double sxx = (s.uu[last] - s.uu[first]) - su * su / n;
    const double sxy = (s.uy[last] - s.uy[first]) - su * sy / n;
    const double syy = (s.yy[last] - s.yy[first]) - sy * sy / n;
    SegmentFit f;
    f.n = n;
    f.mean_u = su / n;
    f.sxx = sxx;
    f.slope = sxy / sxx;
    f.intercept = (sy - f.slope * su) / n;
    f.ssr = std::max(0.0, syy - f.slope * sxy);
    return f;
}

} // namespace detail

/// Two-break least-squares segmentation of ln beta versus ln t: three
/// independent power laws, exhaustive over break pairs on the horizon grid,
/// minimal total residual with ties going to the lexicographically first
/// pair. A break sits at the first horizon of the later zone. Each break
/// must change the log-log slope by at least `sensitivity` or shift ln beta
/// by at least `jump_sensitivity`.
inline ZoneSegmentation detect_zones(const ParameterCurves& curves, const ZoneOptions& opt = {}) {
    std::vector<HorizonEstimate> rows = curves.rows;
    std::sort(rows.begin(), rows.end(), [](const HorizonEstimate& a, const HorizonEstimate& b) {
        return a.horizon < b.horizon;
    });
    const std::size_t n = rows.size();
    if (n < 8) {
        std::ostringstream os;
        os << "zone detection needs at least 8 horizons, got " << n;
        fail(ErrorKind::configuration, os.str());
    }
    if (!(opt.sensitivity > 0.0)) fail(ErrorKind::configuration, "zone sensitivity must be > 0");
    if (opt.min_points < 2) fail(ErrorKind::configuration, "zones need at least 2 points");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(rows[i].horizon > 0.0) || !(rows[i].beta > 0.0)) {
            fail(ErrorKind::domain, "zone detection requires positive horizons and beta");
        }
        if (i > 0 && rows[i].horizon == rows[i - 1].horizon) {
            std::ostringstream os;
            os << "duplicate horizon " << rows[i].horizon;
            fail(ErrorKind::configuration, os.str());
        }
    }
    if (rows.back().horizon < 100.0 * rows.front().horizon) {
        fail(ErrorKind::configuration, "horizons must span at least two decades");
    }
    const std::size_t k = opt.min_points;
    if (n < 3 * k) {
        fail(ErrorKind::configuration, "too few horizons for three zones of the minimum size");
    }

    std::vector<double> lt(n), u(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        lt[i] = std::log(rows[i].horizon);
        y[i] = std::log(rows[i].beta);
    }
    const double centre = std::accumulate(lt.begin(), lt.end(), 0.0) / static_cast<double>(n);
    const double ymean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = lt[i] - centre;
        y[i] -= ymean;
        total += y[i] * y[i];
    }
    const detail::PrefixSums sums(u, y);
    // Residual differences below this are rounding, not evidence.
    const double tie = 1e-12 * (total + 1.0);

    double best = std::numeric_limits<double>::infinity();
    std::size_t b1 = 0;
    std::size_t b2 = 0;
    for (std::size_t i = k; i + 2 * k <= n; ++i) {
        const double left = detail::fit_segment(sums, 0, i).ssr;
        for (std::size_t j = i + k; j + k <= n; ++j) {
            const double ssr = left + detail::fit_segment(sums, i, j).ssr +
                               detail::fit_segment(sums, j, n).ssr;
            if (ssr < best - tie) {
                best = ssr;
                b1 = i;
                b2 = j;
            }
        }
    }

    const std::array<detail::SegmentFit, 3> fits{detail::fit_segment(sums, 0, b1),
                                                 detail::fit_segment(sums, b1, b2),
                                                 detail::fit_segment(sums, b2, n)};
    // Slope change and ln beta jump between adjacent fits, the jump taken
    // midway (in ln t) between the last point of one zone and the first of
    // the next.
    // Each change must also stand out from the pooled residual scatter by
    // `significance` standard errors, so noise alone does not make zones.
    const double s2 = n > 6 ? best / static_cast<double>(n - 6) : 0.0;
    struct Change {
        double slope;
        double jump;
        bool detectable;
    };
    auto change = [&](std::size_t b, const detail::SegmentFit& l, const detail::SegmentFit& r) {
        const double um = 0.5 * (u[b - 1] + u[b]);
        Change c;
        c.slope = r.slope - l.slope;
        c.jump = (r.intercept + r.slope * um) - (l.intercept + l.slope * um);
        const double z2 = opt.significance * opt.significance * s2;
        const bool slope_ok = std::abs(c.slope) >= opt.sensitivity &&
                              c.slope * c.slope >= z2 * (l.slope_var() + r.slope_var());
        const bool jump_ok = std::abs(c.jump) >= opt.jump_sensitivity &&
                             c.jump * c.jump >= z2 * (l.value_var(um) + r.value_var(um));
        c.detectable = slope_ok || jump_ok;
        return c;
    };
    const Change c1 = change(b1, fits[0], fits[1]);
    const Change c2 = change(b2, fits[1], fits[2]);
    const double d1 = c1.slope, j1 = c1.jump, d2 = c2.slope, j2 = c2.jump;
    if (!c1.detectable || !c2.detectable) {
        std::ostringstream os;
        os << "fewer than two detectable changes (slope change >= " << opt.sensitivity
           << " or ln beta jump >= " << opt.jump_sensitivity << ", at " << opt.significance
           << " standard errors); candidates: t="
           << rows[b1].horizon << " (slope change " << d1 << ", jump " << j1 << "), t="
           << rows[b2].horizon << " (slope change " << d2 << ", jump " << j2 << ")";
        fail(ErrorKind::segmentation, os.str());
    }

    ZoneSegmentation seg;
    seg.residual = best;
    seg.break_index = {b1, b2};
    seg.boundaries = {rows[b1].horizon, rows[b2].horizon};
    for (const auto& r : rows) seg.horizons.push_back(r.horizon);

    const std::array<std::size_t, 3> first{0, b1, b2};
    const std::array<std::size_t, 3> last{b1 - 1, b2 - 1, n - 1};
    const char* names[3] = {"A", "B", "C"};
    for (std::size_t z = 0; z < 3; ++z) {
        Zone& zn = seg.zones[z];
        zn.label = names[z];
        zn.start_horizon = rows[first[z]].horizon;
        zn.end_horizon = rows[last[z]].horizon;
        zn.slope = fits[z].slope;
        zn.log_intercept = ymean + fits[z].intercept - fits[z].slope * centre;
        zn.alpha = zn.slope < 0.0 ? -2.0 / zn.slope : std::numeric_limits<double>::infinity();
    }

    seg.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) seg.labels[i] = i < b1 ? "A" : (i < b2 ? "B" : "C");
    const std::size_t w = opt.crossover_points;
    if (w > 0) {
        for (std::size_t b : {b1, b2}) {
            const std::size_t lo = b >= w ? b - w : 0;
            const std::size_t hi = std::min(n - 1, b + w - 1);
            for (std::size_t i = lo; i <= hi; ++i) seg.labels[i] = "crossover";
            seg.crossovers.emplace_back(rows[lo].horizon, rows[hi].horizon);
        }
    }

    double qsum = 0.0;
    std::size_t qn = 0;
    for (std::size_t i = b2; i < n; ++i) {
        if (seg.labels[i] == "C") {
            qsum += rows[i].q;
            ++qn;
        }
    }
    if (qn == 0) {
        for (std::size_t i = b2; i < n; ++i) qsum += rows[i].q;
        qn = n - b2;
    }
    seg.zone_c_mean_q = qsum / static_cast<double>(qn);
    const double ac = seg.zones[2].alpha;
    seg.zone_c_normal = std::abs(ac - 2.0) <= opt.alpha_tolerance &&
                        std::abs(seg.zone_c_mean_q - 1.0) <= opt.q_tolerance;
    std::ostringstream note;
    note << "zone C alpha=" << ac << " mean q=" << seg.zone_c_mean_q
         << (seg.zone_c_normal ? " (normal diffusion)" : " (outside normal-diffusion limits)");
    seg.zone_c_note = note.str();
    return seg;
}

/// Tags every curve row with its zone label. Rows must be on the
/// segmentation's horizon grid.
inline void label_curves(ParameterCurves& curves, const ZoneSegmentation& seg) {
    for (auto& r : curves.rows) {
        const auto it = std::lower_bound(seg.horizons.begin(), seg.horizons.end(), r.horizon);
        if (it == seg.horizons.end() || *it != r.horizon) {
            std::ostringstream os;
            os << "horizon " << r.horizon << " is not part of the segmentation";
            fail(ErrorKind::lookup, os.str());
        }
        r.zone = seg.labels[static_cast<std::size_t>(it - seg.horizons.begin())];
    }
}

} // namespace qdiff

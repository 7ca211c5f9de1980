#pragma once

// End-to-end run: ingest -> decompose -> estimate -> regimes -> trend and
// forecast, with every artifact rendered as a delimited table.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/config.hpp"
#include "qdiff/decompose.hpp"
#include "qdiff/error.hpp"
#include "qdiff/estimate.hpp"
#include "qdiff/io.hpp"
#include "qdiff/regimes.hpp"
#include "qdiff/series.hpp"
#include "qdiff/trend_forecast.hpp"

namespace qdiff {

enum class Stage { ingest, decompose, fit, zones, trend, forecast, score };

inline std::string_view to_string(Stage s) {
    switch (s) {
    case Stage::ingest: return "ingest";
    case Stage::decompose: return "decompose";
    case Stage::fit: return "fit";
    case Stage::zones: return "zones";
    case Stage::trend: return "trend";
    case Stage::forecast: return "forecast";
    case Stage::score: return "score";
    }
    return "?";
}

/// Runs `f`, prefixing any library error with the stage name.
template <class F>
auto in_stage(Stage s, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.kind(), "[" + std::string(to_string(s)) + "] " + e.message());
    }
}

struct PipelineResult {
    IndexSeries series;  // everything ingested
    IndexSeries history; // observations up to the forecast anchor
    double steps_per_day = 1.0;
    std::optional<Decomposition> decomposition;
    std::optional<ParameterCurves> curves;
    std::optional<ZoneSegmentation> zones;
    std::optional<TrendModel> trend;
    std::optional<ForecastCone> cone;
    std::optional<PathEnsemble> paths;
    std::optional<AccuracyReport> ensemble_accuracy;
    std::optional<AccuracyReport> realized_accuracy;
};

namespace detail {

inline Timestamp require_t0(const RunConfig& c) {
    if (!c.trend.t0) fail(ErrorKind::configuration, "trend.t0 is required for this stage");
    return io::parse_config_timestamp(*c.trend.t0, "trend.t0");
}

} // namespace detail

/// Runs every stage up to and including `last`.
inline PipelineResult run_pipeline(const RunConfig& config, Stage last) {
    validate(config);
    PipelineResult r;
    const auto reached = [&](Stage s) { return static_cast<int>(last) >= static_cast<int>(s); };

    in_stage(Stage::ingest, [&] {
        if (config.input.empty()) fail(ErrorKind::configuration, "no input file configured");
        r.series = io::ingest(config.input, config.ingest);
        r.steps_per_day = config.steps_per_day > 0.0
                              ? config.steps_per_day
                              : 86400.0 / static_cast<double>(r.series.resolution());
        r.history = r.series;
        // Estimation only sees data up to the forecast anchor.
        if (config.trend.t0 && reached(Stage::decompose)) {
            const Timestamp t0 = detail::require_t0(config);
            const std::size_t i = r.series.index_of(t0);
            r.history = r.series.slice(0, i + 1);
        }
    });
    if (!reached(Stage::decompose)) return r;

    in_stage(Stage::decompose, [&] {
        const Timestamp start = config.decompose_start
                                    ? io::parse_config_timestamp(*config.decompose_start,
                                                                 "decompose.start")
                                    : r.history.timestamps().front();
        r.decomposition = detrend(r.history, start, config.trend_window);
    });
    if (!reached(Stage::fit)) return r;

    // Fitting alpha and D needs the zone boundaries, so the fit stage runs
    // zone detection as well.
    in_stage(Stage::fit, [&] {
        const auto horizons = config.horizon_list();
        std::span<const double> fluct = r.decomposition->fluctuation;
        if (config.trim_edges) {
            // Within half a window of either end the truncated average hugs
            // the series and the fluctuation is artificially small.
            const std::size_t half = r.decomposition->window / 2;
            if (fluct.size() <= 2 * half) {
                fail(ErrorKind::configuration, "series too short to trim the trend window edges");
            }
            fluct = fluct.subspan(half, fluct.size() - 2 * half);
        }
        const auto dists = empirical_distributions(fluct, horizons, config.distributions);
        r.curves = fit_curves(dists, config.method);
    });
    in_stage(Stage::zones, [&] {
        r.zones = detect_zones(*r.curves, config.zones);
        label_curves(*r.curves, *r.zones);
        const auto segs = r.zones->segments();
        assign_alpha_d(*r.curves, config.alpha_window, segs);
    });
    if (!reached(Stage::trend)) return r;

    in_stage(Stage::trend, [&] {
        const Timestamp t0 = detail::require_t0(config);
        const double I0 = r.series.values()[r.series.index_of(t0)];
        double slope = 0.0;
        if (config.trend.slope) {
            slope = *config.trend.slope;
        } else {
            if (!config.trend.fit_start) {
                fail(ErrorKind::configuration, "trend.fit_start or trend.slope is required");
            }
            const Timestamp a = io::parse_config_timestamp(*config.trend.fit_start, "trend.fit_start");
            const Timestamp b = config.trend.fit_end
                                    ? io::parse_config_timestamp(*config.trend.fit_end, "trend.fit_end")
                                    : t0;
            slope = fit_collapse_slope(r.series, a, b, r.steps_per_day);
        }
        if (config.trend.kind == TrendKind::parabola) {
            r.trend = parabola_trend(I0, slope, config.trend.recovery_days, t0);
        } else {
            r.trend = hyperbola_trend(I0, slope, config.trend.recovery_ratio,
                                      config.trend.smoothing.value_or(default_smoothing(I0)),
                                      config.trend.recovery_days, t0);
        }
    });
    if (!reached(Stage::forecast)) return r;

    ForecastOptions fo = config.forecast;
    fo.steps_per_day = r.steps_per_day;
    in_stage(Stage::forecast, [&] {
        r.cone = forecast_cone(*r.trend, *r.curves, fo);
        r.paths = simulate_paths(*r.trend, *r.curves, config.paths, config.seed, fo);
        r.ensemble_accuracy = ensemble_accuracy(*r.cone, *r.paths, config.accuracy_level);
    });
    if (!reached(Stage::score)) return r;

    in_stage(Stage::score, [&] {
        r.realized_accuracy = accuracy(*r.cone, r.series, config.accuracy_level, r.steps_per_day);
    });
    return r;
}

// ---------------------------------------------------------------------------
// Artifact tables. Each has a writer from domain objects and a reader that
// parses the table back into rows, so write -> read -> write is stable.

namespace artifacts {

using io::format_number;
using io::Table;

struct DecompositionRow {
    Timestamp timestamp = 0;
    double price_return = 0.0;
    double trend = 0.0;
    double fluctuation = 0.0;
};

struct ZoneRow {
    std::string label;
    double start_horizon = 0.0;
    double end_horizon = 0.0;
    double slope = 0.0;
    double log_intercept = 0.0;
    double alpha = 0.0;
};

struct TrendRow {
    double day = 0.0;
    double value = 0.0;
    double derivative = 0.0;
};

struct ConeRow {
    double day = 0.0;
    double price = 0.0;
    double exceedance = 0.0;
};

struct ContourRow {
    double level = 0.0;
    double day = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct AccuracyRow {
    std::string scope;
    double level = 0.0;
    std::size_t inside = 0;
    std::size_t total = 0;
    double fraction = 0.0;
};

inline const std::vector<std::string> decomposition_columns{"timestamp", "price_return", "trend",
                                                           "fluctuation"};
inline const std::vector<std::string> curve_columns{
    "horizon", "q", "q_se", "beta", "beta_se", "alpha", "D", "zone", "samples", "residual",
    "method"};
inline const std::vector<std::string> zone_columns{"label", "start_horizon", "end_horizon",
                                                   "slope", "log_intercept", "alpha"};
inline const std::vector<std::string> trend_columns{"day", "value", "derivative"};
inline const std::vector<std::string> cone_columns{"day", "price", "exceedance"};
inline const std::vector<std::string> contour_columns{"level", "day", "lower", "upper"};
inline const std::vector<std::string> paths_columns{"day", "trend", "mean", "std",
                                                    "q05", "q50", "q95"};
inline const std::vector<std::string> accuracy_columns{"scope", "level", "inside", "total",
                                                       "fraction"};
inline const std::vector<std::string> flag_columns{"day", "realized", "trend", "exceedance",
                                                   "inside"};

namespace detail {

inline void expect_columns(const Table& t, const std::vector<std::string>& cols,
                           std::string_view name) {
    if (t.columns != cols) {
        fail(ErrorKind::data, std::string(name) + ": unexpected header");
    }
}

inline std::size_t cell_count(const Table& t, std::size_t r, std::size_t c, std::string_view name) {
    const auto v = io::parse_int(t.rows[r][c]);
    if (!v || *v < 0) {
        std::ostringstream os;
        os << name << " line " << t.lines[r] << ": not a count: '" << t.rows[r][c] << "'";
        fail(ErrorKind::data, os.str());
    }
    return static_cast<std::size_t>(*v);
}

} // namespace detail

// Decomposition --------------------------------------------------------------

inline std::vector<DecompositionRow> rows_of(const Decomposition& d) {
    std::vector<DecompositionRow> out;
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.push_back({d.timestamps[i], d.price_return[i], d.trend[i], d.fluctuation[i]});
    }
    return out;
}

inline Table to_table(const std::vector<DecompositionRow>& rows) {
    Table t{decomposition_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({io::format_timestamp(r.timestamp), format_number(r.price_return),
                          format_number(r.trend), format_number(r.fluctuation)});
    }
    return t;
}

inline std::vector<DecompositionRow> read_decomposition(const Table& t,
                                                        std::string_view name = "decomposition") {
    detail::expect_columns(t, decomposition_columns, name);
    std::vector<DecompositionRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto ts = io::parse_timestamp(t.rows[r][0], io::TimestampFormat::automatic);
        if (!ts) fail(ErrorKind::data, std::string(name) + ": bad timestamp");
        out.push_back({*ts, io::cell_double(t, r, 1, name), io::cell_double(t, r, 2, name),
                       io::cell_double(t, r, 3, name)});
    }
    return out;
}

// Parameter curves -----------------------------------------------------------

inline Table to_table(const ParameterCurves& c) {
    Table t{curve_columns, {}, {}};
    for (const auto& r : c.rows) {
        t.rows.push_back({format_number(r.horizon), format_number(r.q), format_number(r.q_se),
                          format_number(r.beta), format_number(r.beta_se),
                          format_number(r.alpha), format_number(r.D), r.zone,
                          format_number(r.samples), format_number(r.residual),
                          std::string(to_string(c.method))});
    }
    return t;
}

inline ParameterCurves read_curves(const Table& t, std::string_view name = "parameter_curves") {
    detail::expect_columns(t, curve_columns, name);
    ParameterCurves c;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        HorizonEstimate e;
        e.horizon = io::cell_double(t, r, 0, name);
        e.q = io::cell_double(t, r, 1, name);
        e.q_se = io::cell_double(t, r, 2, name);
        e.beta = io::cell_double(t, r, 3, name);
        e.beta_se = io::cell_double(t, r, 4, name);
        e.alpha = io::cell_double(t, r, 5, name);
        e.D = io::cell_double(t, r, 6, name);
        e.zone = t.rows[r][7];
        e.samples = detail::cell_count(t, r, 8, name);
        e.residual = io::cell_double(t, r, 9, name);
        c.method = parse_fit_method(t.rows[r][10]);
        c.rows.push_back(e);
    }
    return c;
}

// Zones ------------------------------------------------------------------------

inline std::vector<ZoneRow> rows_of(const ZoneSegmentation& s) {
    std::vector<ZoneRow> out;
    for (const auto& z : s.zones) {
        out.push_back({z.label, z.start_horizon, z.end_horizon, z.slope, z.log_intercept, z.alpha});
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& [a, b] : s.crossovers) out.push_back({"crossover", a, b, nan, nan, nan});
    return out;
}

inline Table to_table(const std::vector<ZoneRow>& rows) {
    Table t{zone_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({r.label, format_number(r.start_horizon), format_number(r.end_horizon),
                          format_number(r.slope), format_number(r.log_intercept),
                          format_number(r.alpha)});
    }
    return t;
}

inline std::vector<ZoneRow> read_zones(const Table& t, std::string_view name = "zones") {
    detail::expect_columns(t, zone_columns, name);
    std::vector<ZoneRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({t.rows[r][0], io::cell_double(t, r, 1, name),
                       io::cell_double(t, r, 2, name), io::cell_double(t, r, 3, name),
                       io::cell_double(t, r, 4, name), io::cell_double(t, r, 5, name)});
    }
    return out;
}

// Trend ------------------------------------------------------------------------

inline std::vector<TrendRow> rows_of(const TrendModel& m, double horizon_days, double day_step) {
    std::vector<TrendRow> out;
    const auto n = static_cast<std::size_t>(std::floor(horizon_days / day_step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) {
        const double d = static_cast<double>(i) * day_step;
        out.push_back({d, m.value(d), m.derivative(d)});
    }
    return out;
}

inline Table to_table(const std::vector<TrendRow>& rows) {
    Table t{trend_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({format_number(r.day), format_number(r.value), format_number(r.derivative)});
    }
    return t;
}

inline std::vector<TrendRow> read_trend(const Table& t, std::string_view name = "trend") {
    detail::expect_columns(t, trend_columns, name);
    std::vector<TrendRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({io::cell_double(t, r, 0, name), io::cell_double(t, r, 1, name),
                       io::cell_double(t, r, 2, name)});
    }
    return out;
}

// Cone and contours ------------------------------------------------------------

inline std::vector<ConeRow> cone_rows(const ForecastCone& c) {
    std::vector<ConeRow> out;
    for (std::size_t i = 0; i < c.days.size(); ++i) {
        for (std::size_t k = 0; k < c.prices.size(); ++k) {
            out.push_back({c.days[i], c.prices[k], c.exceedance[i][k]});
        }
    }
    return out;
}

inline Table to_table(const std::vector<ConeRow>& rows) {
    Table t{cone_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({format_number(r.day), format_number(r.price), format_number(r.exceedance)});
    }
    return t;
}

inline std::vector<ConeRow> read_cone(const Table& t, std::string_view name = "cone") {
    detail::expect_columns(t, cone_columns, name);
    std::vector<ConeRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({io::cell_double(t, r, 0, name), io::cell_double(t, r, 1, name),
                       io::cell_double(t, r, 2, name)});
    }
    return out;
}

inline std::vector<ContourRow> contour_rows(const ForecastCone& c) {
    std::vector<ContourRow> out;
    for (const auto& ct : c.contours) {
        for (std::size_t i = 0; i < c.days.size(); ++i) {
            out.push_back({ct.level, c.days[i], ct.lower[i], ct.upper[i]});
        }
    }
    return out;
}

inline Table to_table(const std::vector<ContourRow>& rows) {
    Table t{contour_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({format_number(r.level), format_number(r.day), format_number(r.lower),
                          format_number(r.upper)});
    }
    return t;
}

inline std::vector<ContourRow> read_contours(const Table& t, std::string_view name = "contours") {
    detail::expect_columns(t, contour_columns, name);
    std::vector<ContourRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({io::cell_double(t, r, 0, name), io::cell_double(t, r, 1, name),
                       io::cell_double(t, r, 2, name), io::cell_double(t, r, 3, name)});
    }
    return out;
}

// Paths --------------------------------------------------------------------------

inline Table to_table(const std::vector<PathSummaryRow>& rows) {
    Table t{paths_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({format_number(r.day), format_number(r.trend), format_number(r.mean),
                          format_number(r.std), format_number(r.q05), format_number(r.q50),
                          format_number(r.q95)});
    }
    return t;
}

inline std::vector<PathSummaryRow> read_paths_summary(const Table& t,
                                                      std::string_view name = "paths_summary") {
    detail::expect_columns(t, paths_columns, name);
    std::vector<PathSummaryRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        PathSummaryRow p;
        p.day = io::cell_double(t, r, 0, name);
        p.trend = io::cell_double(t, r, 1, name);
        p.mean = io::cell_double(t, r, 2, name);
        p.std = io::cell_double(t, r, 3, name);
        p.q05 = io::cell_double(t, r, 4, name);
        p.q50 = io::cell_double(t, r, 5, name);
        p.q95 = io::cell_double(t, r, 6, name);
        out.push_back(p);
    }
    return out;
}

// Accuracy -----------------------------------------------------------------------

inline AccuracyRow accuracy_row(std::string scope, const AccuracyReport& a) {
    return {std::move(scope), a.level, a.inside, a.total, a.fraction};
}

inline Table to_table(const std::vector<AccuracyRow>& rows) {
    Table t{accuracy_columns, {}, {}};
    for (const auto& r : rows) {
        t.rows.push_back({r.scope, format_number(r.level), format_number(r.inside),
                          format_number(r.total), format_number(r.fraction)});
    }
    return t;
}

inline std::vector<AccuracyRow> read_accuracy(const Table& t, std::string_view name = "accuracy") {
    detail::expect_columns(t, accuracy_columns, name);
    std::vector<AccuracyRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out.push_back({t.rows[r][0], io::cell_double(t, r, 1, name),
                       detail::cell_count(t, r, 2, name), detail::cell_count(t, r, 3, name),
                       io::cell_double(t, r, 4, name)});
    }
    return out;
}

inline Table to_table(const std::vector<AccuracyFlag>& flags) {
    Table t{flag_columns, {}, {}};
    for (const auto& f : flags) {
        t.rows.push_back({format_number(f.day), format_number(f.realized), format_number(f.trend),
                          format_number(f.exceedance), f.inside ? "1" : "0"});
    }
    return t;
}

inline std::vector<AccuracyFlag> read_flags(const Table& t, std::string_view name = "accuracy_flags") {
    detail::expect_columns(t, flag_columns, name);
    std::vector<AccuracyFlag> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        AccuracyFlag f;
        f.day = io::cell_double(t, r, 0, name);
        f.realized = io::cell_double(t, r, 1, name);
        f.trend = io::cell_double(t, r, 2, name);
        f.exceedance = io::cell_double(t, r, 3, name);
        f.inside = detail::cell_count(t, r, 4, name) != 0;
        out.push_back(f);
    }
    return out;
}

} // namespace artifacts

/// File name -> rendered content for every artifact a stage owns.
using ArtifactSet = std::map<std::string, std::string>;

inline ArtifactSet render_artifacts(const PipelineResult& r, const RunConfig& config,
                                    const std::vector<Stage>& stages) {
    using namespace artifacts;
    ArtifactSet out;
    for (Stage s : stages) {
        switch (s) {
        case Stage::ingest: break;
        case Stage::decompose:
            out["decomposition.csv"] = io::render_table(to_table(rows_of(*r.decomposition)));
            break;
        case Stage::fit:
            out["parameter_curves.csv"] = io::render_table(to_table(*r.curves));
            break;
        case Stage::zones:
            out["zones.csv"] = io::render_table(to_table(rows_of(*r.zones)));
            break;
        case Stage::trend:
            out["trend.csv"] = io::render_table(to_table(
                rows_of(*r.trend, config.forecast.horizon_days, config.forecast.day_step)));
            break;
        case Stage::forecast:
            out["cone.csv"] = io::render_table(to_table(cone_rows(*r.cone)));
            out["contours.csv"] = io::render_table(to_table(contour_rows(*r.cone)));
            out["paths_summary.csv"] = io::render_table(to_table(summarize_paths(*r.paths)));
            if (!r.realized_accuracy) {
                out["accuracy.csv"] = io::render_table(
                    to_table(std::vector{accuracy_row("ensemble", *r.ensemble_accuracy)}));
            }
            break;
        case Stage::score:
            out["accuracy.csv"] = io::render_table(
                to_table(std::vector{accuracy_row("realized", *r.realized_accuracy),
                                     accuracy_row("ensemble", *r.ensemble_accuracy)}));
            out["accuracy_flags.csv"] = io::render_table(to_table(r.realized_accuracy->flags));
            break;
        }
    }
    return out;
}

/// Writes all files or none: content goes to a staging directory inside
/// `dir` and is renamed into place only after every file is written.
inline void commit_artifacts(const std::filesystem::path& dir, const ArtifactSet& files) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::configuration, "cannot create output directory " + dir.string());
    const fs::path staging = dir / ".staging";
    fs::remove_all(staging, ec);
    fs::create_directories(staging, ec);
    if (ec) fail(ErrorKind::configuration, "cannot create " + staging.string());
    std::vector<fs::path> placed;
    try {
        for (const auto& [name, content] : files) io::write_file(staging / name, content);
        for (const auto& [name, content] : files) {
            fs::rename(staging / name, dir / name, ec);
            if (ec) fail(ErrorKind::configuration, "cannot move " + name + " into " + dir.string());
            placed.push_back(dir / name);
        }
    } catch (...) {
        for (const auto& p : placed) fs::remove(p, ec);
        fs::remove_all(staging, ec);
        throw;
    }
    fs::remove_all(staging, ec);
}

} // namespace qdiff

#pragma once

// Run configuration: JSON file values over built-in defaults.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdiff/error.hpp"
#include "qdiff/estimate.hpp"
#include "qdiff/io.hpp"
#include "qdiff/regimes.hpp"
#include "qdiff/trend_forecast.hpp"

namespace qdiff {

struct HorizonGrid {
    std::size_t min = 1;
    std::size_t max = 128;
    std::size_t per_decade = 20;
};

/// Unique integer lags, log-spaced from min to max inclusive.
inline std::vector<std::size_t> log_spaced_horizons(const HorizonGrid& g) {
    if (g.min < 1 || g.max <= g.min || g.per_decade < 1) {
        fail(ErrorKind::configuration, "horizon grid needs 1 <= min < max and per_decade >= 1");
    }
    std::vector<std::size_t> out;
    const double lo = std::log10(static_cast<double>(g.min));
    const double hi = std::log10(static_cast<double>(g.max));
    const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) * g.per_decade));
    for (std::size_t i = 0; i <= steps; ++i) {
        const double v = std::pow(10.0, lo + (hi - lo) * static_cast<double>(i) /
                                                 static_cast<double>(steps));
        const auto lag = static_cast<std::size_t>(std::llround(v));
        if (out.empty() || lag > out.back()) out.push_back(lag);
    }
    return out;
}

struct TrendConfig {
    TrendKind kind = TrendKind::hyperbola;
    std::optional<std::string> t0;
    std::optional<std::string> fit_start;
    std::optional<std::string> fit_end; // defaults to t0
    std::optional<double> slope;        // overrides the collapse fit
    double recovery_days = 60.0;
    double recovery_ratio = 0.5;
    std::optional<double> smoothing; // defaults to 2% of I0
};

struct RunConfig {
    std::string input;
    io::IngestOptions ingest;
    double steps_per_day = 0.0; // 0 = 86400 / resolution

    std::size_t trend_window = 252;
    std::optional<std::string> decompose_start;

    std::vector<std::size_t> horizons; // empty = horizon_grid
    HorizonGrid horizon_grid;
    FitMethod method = FitMethod::cdf_ls;
    DistributionOptions distributions;
    std::size_t alpha_window = 5;
    bool trim_edges = true; // estimate only where the full trend window fits

    ZoneOptions zones;
    TrendConfig trend;

    ForecastOptions forecast;
    std::size_t paths = 10000;
    double accuracy_level = 0.15;

    std::uint64_t seed = 0;
    std::string output = "out";

    [[nodiscard]] std::vector<std::size_t> horizon_list() const {
        return horizons.empty() ? log_spaced_horizons(horizon_grid) : horizons;
    }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
    if (!j.is_object()) fail(ErrorKind::configuration, where + " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) {
            fail(ErrorKind::configuration, "unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::configuration, where + "." + key + " has the wrong type");
    }
}

template <class T>
void read(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v{};
    read(j, key, v, where);
    out = v;
}

} // namespace detail

/// Validates settings that do not depend on the data.
inline void validate(const RunConfig& c) {
    if (c.ingest.timestamp_column.empty() || c.ingest.value_column.empty()) {
        fail(ErrorKind::configuration, "timestamp and value column names must be set");
    }
    if (c.ingest.resolution_seconds < 0) fail(ErrorKind::configuration, "resolution must be >= 0");
    if (c.steps_per_day < 0.0) fail(ErrorKind::configuration, "steps_per_day must be >= 0");
    if (c.trend_window < 2) fail(ErrorKind::configuration, "trend window must be >= 2 steps");
    const auto h = c.horizon_list();
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] < 1) fail(ErrorKind::configuration, "horizons must be >= 1 step");
        if (i > 0 && h[i] <= h[i - 1]) {
            fail(ErrorKind::configuration, "horizons must be sorted ascending without repeats");
        }
    }
    for (double l : c.forecast.levels) {
        if (!(l > 0.0 && l < 1.0)) fail(ErrorKind::configuration, "cone levels must be in (0, 1)");
    }
    if (!(c.accuracy_level > 0.0 && c.accuracy_level < 1.0)) {
        fail(ErrorKind::configuration, "accuracy_level must be in (0, 1)");
    }
    if (c.paths < 1) fail(ErrorKind::configuration, "paths must be >= 1");
    if (c.alpha_window < 3) fail(ErrorKind::configuration, "alpha_window must be >= 3");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    using detail::read;
    RunConfig c;
    detail::reject_unknown(j,
                           {"input", "timestamp_column", "value_column", "timestamp_format",
                            "delimiter", "resolution_seconds", "steps_per_day", "decompose",
                            "estimate", "zones", "trend", "forecast", "seed", "output"},
                           "config");
    read(j, "input", c.input, "config");
    read(j, "timestamp_column", c.ingest.timestamp_column, "config");
    read(j, "value_column", c.ingest.value_column, "config");
    std::string fmt = "auto";
    read(j, "timestamp_format", fmt, "config");
    c.ingest.timestamp_format = io::parse_timestamp_format(fmt);
    std::string delim = ",";
    read(j, "delimiter", delim, "config");
    if (delim == "\\t" || delim == "tab") delim = "\t";
    if (delim.size() != 1) fail(ErrorKind::configuration, "delimiter must be one character");
    c.ingest.delimiter = delim[0];
    read(j, "resolution_seconds", c.ingest.resolution_seconds, "config");
    read(j, "steps_per_day", c.steps_per_day, "config");
    read(j, "seed", c.seed, "config");
    read(j, "output", c.output, "config");

    if (j.contains("decompose")) {
        const auto& d = j.at("decompose");
        detail::reject_unknown(d, {"trend_window", "start"}, "decompose");
        read(d, "trend_window", c.trend_window, "decompose");
        read(d, "start", c.decompose_start, "decompose");
    }
    if (j.contains("estimate")) {
        const auto& e = j.at("estimate");
        detail::reject_unknown(e,
                               {"horizons", "horizon_grid", "method", "bins", "min_samples",
                                "alpha_window", "trim_edges"},
                               "estimate");
        read(e, "horizons", c.horizons, "estimate");
        if (e.contains("horizon_grid")) {
            const auto& g = e.at("horizon_grid");
            detail::reject_unknown(g, {"min", "max", "per_decade"}, "estimate.horizon_grid");
            read(g, "min", c.horizon_grid.min, "estimate.horizon_grid");
            read(g, "max", c.horizon_grid.max, "estimate.horizon_grid");
            read(g, "per_decade", c.horizon_grid.per_decade, "estimate.horizon_grid");
        }
        std::string m = std::string(to_string(c.method));
        read(e, "method", m, "estimate");
        c.method = parse_fit_method(m);
        read(e, "bins", c.distributions.bins, "estimate");
        read(e, "min_samples", c.distributions.min_samples, "estimate");
        read(e, "alpha_window", c.alpha_window, "estimate");
        read(e, "trim_edges", c.trim_edges, "estimate");
    }
    if (j.contains("zones")) {
        const auto& z = j.at("zones");
        detail::reject_unknown(z,
                               {"sensitivity", "jump_sensitivity", "significance", "min_points",
                                "crossover_points"},
                               "zones");
        read(z, "sensitivity", c.zones.sensitivity, "zones");
        read(z, "jump_sensitivity", c.zones.jump_sensitivity, "zones");
        read(z, "significance", c.zones.significance, "zones");
        read(z, "min_points", c.zones.min_points, "zones");
        read(z, "crossover_points", c.zones.crossover_points, "zones");
    }
    if (j.contains("trend")) {
        const auto& t = j.at("trend");
        detail::reject_unknown(t,
                               {"kind", "t0", "fit_start", "fit_end", "slope", "recovery_days",
                                "recovery_ratio", "smoothing"},
                               "trend");
        std::string kind = to_string(c.trend.kind);
        read(t, "kind", kind, "trend");
        c.trend.kind = parse_trend_kind(kind);
        read(t, "t0", c.trend.t0, "trend");
        read(t, "fit_start", c.trend.fit_start, "trend");
        read(t, "fit_end", c.trend.fit_end, "trend");
        read(t, "slope", c.trend.slope, "trend");
        read(t, "recovery_days", c.trend.recovery_days, "trend");
        read(t, "recovery_ratio", c.trend.recovery_ratio, "trend");
        read(t, "smoothing", c.trend.smoothing, "trend");
    }
    if (j.contains("forecast")) {
        const auto& f = j.at("forecast");
        detail::reject_unknown(f,
                               {"horizon_days", "day_step", "levels", "price_points",
                                "price_margin_level", "paths", "accuracy_level"},
                               "forecast");
        read(f, "horizon_days", c.forecast.horizon_days, "forecast");
        read(f, "day_step", c.forecast.day_step, "forecast");
        read(f, "levels", c.forecast.levels, "forecast");
        read(f, "price_points", c.forecast.price_points, "forecast");
        read(f, "price_margin_level", c.forecast.price_margin_level, "forecast");
        read(f, "paths", c.paths, "forecast");
        read(f, "accuracy_level", c.accuracy_level, "forecast");
    }
    validate(c);
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        fail(ErrorKind::configuration, "config file not found: " + path.string());
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::configuration, path.string() + ": " + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::configuration, e.message());
    }
    RunConfig c = config_from_json(j);
    // A relative input path is taken relative to the config file.
    if (!c.input.empty() && std::filesystem::path(c.input).is_relative() &&
        !std::filesystem::exists(c.input)) {
        const auto beside = path.parent_path() / c.input;
        if (std::filesystem::exists(beside)) c.input = beside.string();
    }
    return c;
}

/// The effective configuration, as recorded in the run manifest.
inline nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["input"] = c.input;
    j["timestamp_column"] = c.ingest.timestamp_column;
    j["value_column"] = c.ingest.value_column;
    j["timestamp_format"] = std::string(io::to_string(c.ingest.timestamp_format));
    j["delimiter"] = c.ingest.delimiter == '\t' ? std::string("\\t") : std::string(1, c.ingest.delimiter);
    j["resolution_seconds"] = c.ingest.resolution_seconds;
    j["steps_per_day"] = c.steps_per_day;
    j["decompose"] = {{"trend_window", c.trend_window}};
    if (c.decompose_start) j["decompose"]["start"] = *c.decompose_start;
    j["estimate"] = {{"horizons", c.horizon_list()},
                     {"method", std::string(to_string(c.method))},
                     {"bins", c.distributions.bins},
                     {"min_samples", c.distributions.min_samples},
                     {"alpha_window", c.alpha_window},
                     {"trim_edges", c.trim_edges}};
    j["zones"] = {{"sensitivity", c.zones.sensitivity},
                  {"jump_sensitivity", c.zones.jump_sensitivity},
                  {"significance", c.zones.significance},
                  {"min_points", c.zones.min_points},
                  {"crossover_points", c.zones.crossover_points}};
    nlohmann::json t = {{"kind", to_string(c.trend.kind)},
                        {"recovery_days", c.trend.recovery_days},
                        {"recovery_ratio", c.trend.recovery_ratio}};
    if (c.trend.t0) t["t0"] = *c.trend.t0;
    if (c.trend.fit_start) t["fit_start"] = *c.trend.fit_start;
    if (c.trend.fit_end) t["fit_end"] = *c.trend.fit_end;
    if (c.trend.slope) t["slope"] = *c.trend.slope;
    if (c.trend.smoothing) t["smoothing"] = *c.trend.smoothing;
    j["trend"] = t;
    j["forecast"] = {{"horizon_days", c.forecast.horizon_days},
                     {"day_step", c.forecast.day_step},
                     {"levels", c.forecast.levels},
                     {"price_points", c.forecast.price_points},
                     {"price_margin_level", c.forecast.price_margin_level},
                     {"paths", c.paths},
                     {"accuracy_level", c.accuracy_level}};
    j["seed"] = c.seed;
    j["output"] = c.output;
    return j;
}

} // namespace qdiff

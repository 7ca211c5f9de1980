#pragma once

// Delimited-text input and output: number formatting, timestamps, index
// ingestion and plain tables.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/series.hpp"

namespace qdiff::io {

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }
inline std::string format_number(std::size_t v) { return std::to_string(v); }

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// Timestamps

enum class TimestampFormat { automatic, iso8601, epoch };

inline TimestampFormat parse_timestamp_format(std::string_view s) {
    if (s == "auto") return TimestampFormat::automatic;
    if (s == "iso8601") return TimestampFormat::iso8601;
    if (s == "epoch") return TimestampFormat::epoch;
    fail(ErrorKind::configuration,
         "unknown timestamp format '" + std::string(s) + "' (auto | iso8601 | epoch)");
}

inline std::string_view to_string(TimestampFormat f) {
    switch (f) {
    case TimestampFormat::automatic: return "auto";
    case TimestampFormat::iso8601: return "iso8601";
    case TimestampFormat::epoch: return "epoch";
    }
    return "auto";
}

namespace detail {

inline bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        out = out * 10 + (s[i] - '0');
    }
    return true;
}

} // namespace detail

/// YYYY-MM-DD with an optional time part [T| ]HH:MM[:SS[.fff]] and an
/// optional Z or ±HH:MM offset. Fractional seconds are truncated.
inline std::optional<Timestamp> parse_iso8601(std::string_view s) {
    using namespace std::chrono;
    s = trim(s);
    int y = 0, mo = 0, d = 0;
    if (s.size() < 10 || !detail::read_digits(s, 0, 4, y) || s[4] != '-' ||
        !detail::read_digits(s, 5, 2, mo) || s[7] != '-' || !detail::read_digits(s, 8, 2, d)) {
        return std::nullopt;
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    std::int64_t secs = sys_days{ymd}.time_since_epoch().count() * std::int64_t{86400};
    std::size_t pos = 10;
    if (pos == s.size()) return secs;
    if (s[pos] != 'T' && s[pos] != ' ') return std::nullopt;
    ++pos;
    int hh = 0, mm = 0, ss = 0;
    if (!detail::read_digits(s, pos, 2, hh) || pos + 2 >= s.size() || s[pos + 2] != ':' ||
        !detail::read_digits(s, pos + 3, 2, mm)) {
        return std::nullopt;
    }
    pos += 5;
    if (pos < s.size() && s[pos] == ':') {
        if (!detail::read_digits(s, pos + 1, 2, ss)) return std::nullopt;
        pos += 3;
        if (pos < s.size() && s[pos] == '.') {
            ++pos;
            while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        }
    }
    if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
    secs += hh * 3600 + mm * 60 + ss;
    if (pos == s.size()) return secs;
    if (s[pos] == 'Z' && pos + 1 == s.size()) return secs;
    if ((s[pos] == '+' || s[pos] == '-') && s.size() == pos + 6 && s[pos + 3] == ':') {
        int oh = 0, om = 0;
        if (!detail::read_digits(s, pos + 1, 2, oh) || !detail::read_digits(s, pos + 4, 2, om)) {
            return std::nullopt;
        }
        const std::int64_t off = oh * 3600 + om * 60;
        return s[pos] == '+' ? secs - off : secs + off;
    }
    return std::nullopt;
}

inline std::optional<Timestamp> parse_timestamp(std::string_view s, TimestampFormat f) {
    s = trim(s);
    if (f == TimestampFormat::epoch) return parse_int(s);
    if (f == TimestampFormat::iso8601) return parse_iso8601(s);
    if (auto v = parse_iso8601(s)) return v;
    return parse_int(s);
}

/// Timestamp given in a config file: ISO-8601 text or epoch seconds.
inline Timestamp parse_config_timestamp(std::string_view s, std::string_view what) {
    if (auto v = parse_timestamp(s, TimestampFormat::automatic)) return *v;
    fail(ErrorKind::configuration,
         "cannot parse " + std::string(what) + " timestamp '" + std::string(s) + "'");
}

/// ISO-8601 UTC text; dates only when the time of day is midnight.
inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const std::int64_t days_since = ts >= 0 ? ts / 86400 : -((-ts + 86399) / 86400);
    const std::int64_t rem = ts - days_since * 86400;
    const year_month_day ymd{sys_days{days{days_since}}};
    char buf[40];
    const int y = static_cast<int>(ymd.year());
    const unsigned m = static_cast<unsigned>(ymd.month());
    const unsigned d = static_cast<unsigned>(ymd.day());
    if (rem == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", y, m, d);
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", y, m, d,
                      static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                      static_cast<int>(rem % 60));
    }
    return buf;
}

// ---------------------------------------------------------------------------
// Delimited text

/// Splits one record. Fields may be wrapped in double quotes, with "" as an
/// escaped quote; quoted fields cannot span lines.
inline std::vector<std::string> split_record(std::string_view line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delim) {
            out.push_back(std::string(trim(cur)));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::string(trim(cur)));
    return out;
}

inline std::string quote_field(const std::string& s, char delim) {
    if (s.find_first_of(std::string{delim, '"', '\n'}) == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + '"';
}

/// A header plus string cells, as read from or written to a file.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> lines; // 1-based source line of each row

    [[nodiscard]] std::size_t column(std::string_view name, std::string_view file = "") const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        if (it == columns.end()) {
            std::string msg = "column '" + std::string(name) + "' not found";
            if (!file.empty()) msg += " in " + std::string(file);
            fail(ErrorKind::configuration, msg);
        }
        return static_cast<std::size_t>(it - columns.begin());
    }
};

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::data, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parses delimited text with a header line. Blank lines are skipped; a
/// row with the wrong number of fields is a data error naming its line.
inline Table parse_table(std::string_view text, char delim, std::string_view name = "input") {
    Table t;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    bool header = true;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        ++line_no;
        pos = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1 && line.size() >= 3 && line.substr(0, 3) == "\xEF\xBB\xBF") {
            line.remove_prefix(3);
        }
        if (trim(line).empty()) {
            if (end == text.size()) break;
            continue;
        }
        auto fields = split_record(line, delim);
        if (header) {
            t.columns = std::move(fields);
            header = false;
        } else {
            if (fields.size() != t.columns.size()) {
                std::ostringstream os;
                os << name << " line " << line_no << ": expected " << t.columns.size()
                   << " fields, found " << fields.size();
                fail(ErrorKind::data, os.str());
            }
            t.rows.push_back(std::move(fields));
            t.lines.push_back(line_no);
        }
        if (end == text.size()) break;
    }
    if (header) fail(ErrorKind::data, std::string(name) + " has no header line");
    return t;
}

inline Table read_table(const std::filesystem::path& path, char delim = ',') {
    return parse_table(read_file(path), delim, path.string());
}

inline std::string render_table(const Table& t, char delim = ',') {
    std::string out;
    auto emit = [&](const std::vector<std::string>& r) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (i) out += delim;
            out += quote_field(r[i], delim);
        }
        out += '\n';
    };
    emit(t.columns);
    for (const auto& r : t.rows) emit(r);
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::configuration, "cannot write " + path.string());
    out << content;
    if (!out) fail(ErrorKind::configuration, "failed writing " + path.string());
}

inline void write_table(const std::filesystem::path& path, const Table& t, char delim = ',') {
    write_file(path, render_table(t, delim));
}

inline double cell_double(const Table& t, std::size_t row, std::size_t col,
                          std::string_view file = "table") {
    if (auto v = parse_double(t.rows[row][col])) return *v;
    std::ostringstream os;
    os << file << " line " << t.lines[row] << ", column '" << t.columns[col]
       << "': not a number: '" << t.rows[row][col] << "'";
    fail(ErrorKind::data, os.str());
}

// ---------------------------------------------------------------------------
// Index ingestion

struct IngestOptions {
    std::string timestamp_column = "date";
    std::string value_column = "close";
    TimestampFormat timestamp_format = TimestampFormat::automatic;
    char delimiter = ',';
    std::int64_t resolution_seconds = 0; // 0 = most common spacing
};

/// Most common spacing between consecutive timestamps.
inline std::int64_t infer_resolution(std::span<const Timestamp> ts) {
    if (ts.size() < 2) fail(ErrorKind::data, "need at least two observations to infer resolution");
    std::map<std::int64_t, std::size_t> counts;
    for (std::size_t i = 1; i < ts.size(); ++i) ++counts[ts[i] - ts[i - 1]];
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
    }
    return best->first;
}

/// Reads an index series from delimited text. Rows with an empty value are
/// gaps and are skipped; timestamps must be strictly increasing.
inline IndexSeries parse_index(std::string_view text, const IngestOptions& opt,
                               std::string_view name = "input") {
    if (text.empty()) fail(ErrorKind::data, std::string(name) + ": file is empty");
    const Table t = parse_table(text, opt.delimiter, name);
    const std::size_t tc = t.column(opt.timestamp_column, name);
    const std::size_t vc = t.column(opt.value_column, name);
    if (t.rows.empty()) fail(ErrorKind::data, std::string(name) + ": empty input (header only)");

    std::vector<Timestamp> ts;
    std::vector<double> vals;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::size_t line = t.lines[r];
        auto where = [&](std::size_t col) {
            std::ostringstream os;
            os << name << " line " << line << ", column " << col + 1 << " ('" << t.columns[col]
               << "')";
            return os.str();
        };
        const auto stamp = parse_timestamp(row[tc], opt.timestamp_format);
        if (!stamp) fail(ErrorKind::data, where(tc) + ": cannot parse timestamp '" + row[tc] + "'");
        if (!ts.empty() && *stamp == ts.back()) {
            fail(ErrorKind::data, where(tc) + ": duplicate timestamp '" + row[tc] + "'");
        }
        if (!ts.empty() && *stamp < ts.back()) {
            fail(ErrorKind::data, where(tc) + ": timestamp '" + row[tc] + "' is out of order");
        }
        if (row[vc].empty()) continue;
        const auto v = parse_double(row[vc]);
        if (!v) fail(ErrorKind::data, where(vc) + ": not a number: '" + row[vc] + "'");
        if (!std::isfinite(*v) || *v <= 0.0) {
            fail(ErrorKind::data, where(vc) + ": index value must be finite and positive");
        }
        ts.push_back(*stamp);
        vals.push_back(*v);
    }
    if (ts.empty()) fail(ErrorKind::data, std::string(name) + ": empty input (no values)");
    std::int64_t res = opt.resolution_seconds;
    if (res == 0) res = ts.size() >= 2 ? infer_resolution(ts) : 86400;
    return IndexSeries(std::move(ts), std::move(vals), res);
}

inline IndexSeries ingest(const std::filesystem::path& path, const IngestOptions& opt) {
    if (!std::filesystem::exists(path)) fail(ErrorKind::data, "input not found: " + path.string());
    return parse_index(read_file(path), opt, path.string());
}

} // namespace qdiff::io

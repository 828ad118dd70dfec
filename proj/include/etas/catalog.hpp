#pragma once

#include "etas/error.hpp"
#include "etas/io/format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace etas {

/// One catalog entry. `time` is in days since the catalog's origin epoch.
struct Event {
    double time{0.0};
    double magnitude{0.0};

    friend bool operator==(const Event&, const Event&) = default;
};

/// An ordered event sequence together with the observation window [S, T],
/// the threshold magnitude Mz and an optional history window [history_start, S).
///
/// `events` holds the history-only events first (time < window_start), then
/// the in-window events. History-only events contribute to triggering sums but
/// never to the summation term of a likelihood.
struct Catalog {
    std::vector<Event> events;
    std::size_t history_count{0};
    double window_start{0.0};
    double window_end{0.0};
    double threshold{0.0};
    double history_start{0.0};
    std::string origin_epoch;

    [[nodiscard]] std::span<const Event> history() const {
        return std::span<const Event>(events).first(history_count);
    }
    [[nodiscard]] std::span<const Event> in_window() const {
        return std::span<const Event>(events).subspan(history_count);
    }
    [[nodiscard]] std::size_t size() const { return events.size() - history_count; }
    [[nodiscard]] bool empty() const { return size() == 0; }
    [[nodiscard]] double duration() const { return window_end - window_start; }

    friend bool operator==(const Catalog&, const Catalog&) = default;
};

namespace detail {

// Stable order: time ascending, then magnitude descending, then input order.
inline void sort_events(std::vector<Event>& events) {
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.magnitude > b.magnitude;
    });
}

// Days since 1970-01-01 for a proleptic Gregorian date.
[[nodiscard]] constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2 ? 1 : 0;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// ISO-8601 "YYYY-MM-DD[(T| )HH:MM[:SS[.fff]]][Z|(+|-)HH:MM]" to days since the
// Unix epoch. Returns NaN on malformed input.
[[nodiscard]] inline double parse_iso8601_days(std::string_view text) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    text = io::trim(text);
    auto digits = [&](std::size_t pos, std::size_t count, int& out) {
        if (pos + count > text.size()) return false;
        out = 0;
        for (std::size_t i = pos; i < pos + count; ++i) {
            if (text[i] < '0' || text[i] > '9') return false;
            out = out * 10 + (text[i] - '0');
        }
        return true;
    };
    int year = 0, month = 0, day = 0;
    if (!digits(0, 4, year) || text.size() < 10 || text[4] != '-' || !digits(5, 2, month) ||
        text[7] != '-' || !digits(8, 2, day))
        return nan;
    if (month < 1 || month > 12 || day < 1 || day > 31) return nan;
    double seconds = 0.0;
    std::size_t pos = 10;
    if (pos < text.size() && (text[pos] == 'T' || text[pos] == ' ')) {
        int hour = 0, minute = 0;
        if (!digits(pos + 1, 2, hour) || pos + 3 >= text.size() || text[pos + 3] != ':' ||
            !digits(pos + 4, 2, minute))
            return nan;
        if (hour > 24 || minute > 59) return nan;
        seconds = hour * 3600.0 + minute * 60.0;
        pos += 6;
        if (pos < text.size() && text[pos] == ':') {
            std::size_t end = pos + 1;
            while (end < text.size() && ((text[end] >= '0' && text[end] <= '9') || text[end] == '.'))
                ++end;
            const auto sec = io::parse_double(text.substr(pos + 1, end - pos - 1));
            if (!sec || *sec < 0.0 || *sec >= 61.0) return nan;
            seconds += *sec;
            pos = end;
        }
    }
    if (pos < text.size()) {
        const char zone = text[pos];
        if (zone == 'Z' && pos + 1 == text.size()) {
            pos += 1;
        } else if ((zone == '+' || zone == '-') && pos + 6 == text.size() && text[pos + 3] == ':') {
            int oh = 0, om = 0;
            if (!digits(pos + 1, 2, oh) || !digits(pos + 4, 2, om)) return nan;
            const double offset = oh * 3600.0 + om * 60.0;
            seconds -= zone == '+' ? offset : -offset;
            pos = text.size();
        } else {
            return nan;
        }
    }
    if (pos != text.size()) return nan;
    return static_cast<double>(days_from_civil(year, static_cast<unsigned>(month),
                                                static_cast<unsigned>(day))) +
           seconds / 86400.0;
}

[[nodiscard]] inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(io::trim(line.substr(start, comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

[[noreturn]] inline void parse_error(std::size_t line_number, const std::string& message) {
    fail(ErrorKind::parse, "catalog line " + std::to_string(line_number) + ": " + message);
}

}  // namespace detail

/// Keeps events with magnitude >= threshold and history_start <= time <= window_end;
/// events before window_start are tagged history-only. Idempotent.
[[nodiscard]] inline Catalog filter_catalog(const Catalog& catalog, double threshold,
                                            double window_start, double window_end,
                                            double history_start) {
    require(std::isfinite(threshold), "threshold must be finite");
    require(std::isfinite(window_start) && std::isfinite(window_end) &&
                std::isfinite(history_start),
            "window bounds must be finite");
    require(history_start <= window_start && window_start <= window_end,
            "filter requires history_start <= window_start <= window_end");

    Catalog out;
    out.window_start = window_start;
    out.window_end = window_end;
    out.threshold = threshold;
    out.history_start = history_start;
    out.origin_epoch = catalog.origin_epoch;
    for (const Event& e : catalog.events) {
        if (e.magnitude < threshold || e.time < history_start || e.time > window_end) continue;
        out.events.push_back(e);
    }
    out.history_count = static_cast<std::size_t>(std::count_if(
        out.events.begin(), out.events.end(), [&](const Event& e) { return e.time < window_start; }));
    return out;
}

/// Convenience overload: history_start defaults to window_start (no history).
[[nodiscard]] inline Catalog filter_catalog(const Catalog& catalog, double threshold,
                                            double window_start, double window_end) {
    return filter_catalog(catalog, threshold, window_start, window_end, window_start);
}

/// Builds a catalog from raw events (sorted here), with the whole window and no history.
[[nodiscard]] inline Catalog make_catalog(std::vector<Event> events, double window_start,
                                          double window_end, double threshold) {
    for (const Event& e : events)
        require(std::isfinite(e.time) && std::isfinite(e.magnitude), "event fields must be finite");
    detail::sort_events(events);
    Catalog raw;
    raw.events = std::move(events);
    return filter_catalog(raw, threshold, window_start, window_end, window_start);
}

/// Parses the catalog CSV format.
///
/// Header is `time,magnitude` (days) or `datetime,magnitude` (ISO-8601).
/// Comment lines start with '#'; comments of the form `# key=value` with keys
/// window_start, window_end, threshold, history_start and origin_epoch
/// override the defaults. Unknown columns are ignored and reported through
/// `warnings`.
[[nodiscard]] inline Catalog parse_catalog(std::string_view text,
                                           std::vector<std::string>* warnings = nullptr) {
    if (io::trim(text).empty()) fail(ErrorKind::parse, "catalog input is empty");

    std::optional<double> window_start, window_end, threshold, history_start;
    std::string origin_epoch;
    bool header_seen = false;
    bool datetime_mode = false;
    std::size_t time_col = 0, mag_col = 0, column_count = 0;
    std::vector<double> raw_times;
    std::vector<double> magnitudes;
    std::vector<std::string> raw_datetimes;

    std::size_t line_number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto newline = text.find('\n', pos);
        std::string_view line = text.substr(pos, newline == std::string_view::npos ? std::string_view::npos
                                                                                   : newline - pos);
        pos = newline == std::string_view::npos ? text.size() + 1 : newline + 1;
        ++line_number;
        line = io::trim(line);
        if (line.empty()) continue;

        if (line.front() == '#') {
            const auto body = io::trim(line.substr(1));
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;
            const auto key = io::trim(body.substr(0, eq));
            const auto value = io::trim(body.substr(eq + 1));
            auto number = [&]() {
                const auto v = io::parse_double(value);
                if (!v || !std::isfinite(*v))
                    detail::parse_error(line_number, "invalid value for " + std::string(key));
                return *v;
            };
            if (key == "window_start") window_start = number();
            else if (key == "window_end") window_end = number();
            else if (key == "threshold") threshold = number();
            else if (key == "history_start") history_start = number();
            else if (key == "origin_epoch") origin_epoch = std::string(value);
            continue;
        }

        const auto fields = detail::split_fields(line);
        if (!header_seen) {
            header_seen = true;
            bool have_time = false, have_mag = false;
            column_count = fields.size();
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "time" || fields[i] == "datetime") {
                    if (have_time) detail::parse_error(line_number, "duplicate time column");
                    have_time = true;
                    time_col = i;
                    datetime_mode = fields[i] == "datetime";
                } else if (fields[i] == "magnitude") {
                    if (have_mag) detail::parse_error(line_number, "duplicate magnitude column");
                    have_mag = true;
                    mag_col = i;
                } else if (warnings) {
                    warnings->push_back("ignoring column '" + std::string(fields[i]) + "'");
                }
            }
            if (!have_time || !have_mag)
                detail::parse_error(line_number,
                                    "header must declare time (or datetime) and magnitude columns");
            continue;
        }

        if (fields.size() != column_count)
            detail::parse_error(line_number, "expected " + std::to_string(column_count) +
                                                 " fields, found " + std::to_string(fields.size()));
        double t = 0.0;
        if (datetime_mode) {
            t = detail::parse_iso8601_days(fields[time_col]);
            if (std::isnan(t)) detail::parse_error(line_number, "malformed datetime");
            raw_datetimes.emplace_back(fields[time_col]);
        } else {
            const auto v = io::parse_double(fields[time_col]);
            if (!v) detail::parse_error(line_number, "malformed time");
            t = *v;
        }
        const auto m = io::parse_double(fields[mag_col]);
        if (!m) detail::parse_error(line_number, "malformed magnitude");
        if (!std::isfinite(t) || !std::isfinite(*m))
            detail::parse_error(line_number, "non-finite field");
        raw_times.push_back(t);
        magnitudes.push_back(*m);
    }
    if (!header_seen) fail(ErrorKind::parse, "catalog has no header row");

    if (datetime_mode) {
        double origin = 0.0;
        if (!origin_epoch.empty()) {
            origin = detail::parse_iso8601_days(origin_epoch);
            if (std::isnan(origin)) fail(ErrorKind::parse, "malformed origin_epoch");
        } else if (!raw_times.empty()) {
            const auto first = std::min_element(raw_times.begin(), raw_times.end());
            origin = *first;
            origin_epoch = raw_datetimes[static_cast<std::size_t>(first - raw_times.begin())];
        }
        for (double& t : raw_times) t -= origin;
    }

    std::vector<Event> events(raw_times.size());
    for (std::size_t i = 0; i < events.size(); ++i) events[i] = {raw_times[i], magnitudes[i]};
    detail::sort_events(events);

    Catalog raw;
    raw.events = std::move(events);
    raw.origin_epoch = origin_epoch;

    const double first_time = raw.events.empty() ? 0.0 : raw.events.front().time;
    const double last_time = raw.events.empty() ? 0.0 : raw.events.back().time;
    double min_mag = 0.0;
    if (!raw.events.empty())
        min_mag = std::min_element(raw.events.begin(), raw.events.end(), [](auto& a, auto& b) {
                      return a.magnitude < b.magnitude;
                  })->magnitude;

    const double s = window_start.value_or(first_time);
    const double t = window_end.value_or(std::max(last_time, s));
    const double h = history_start.value_or(s);
    if (!(h <= s && s <= t))
        fail(ErrorKind::parse, "declared window must satisfy history_start <= window_start <= window_end");
    return filter_catalog(raw, threshold.value_or(min_mag), s, t, h);
}

/// Serializes to the CSV form read by parse_catalog, with a comment header
/// carrying the window, threshold and origin metadata. Round-trips exactly.
[[nodiscard]] inline std::string serialize_catalog(const Catalog& catalog) {
    std::ostringstream out;
    out << "# window_start=" << io::format_double(catalog.window_start) << '\n'
        << "# window_end=" << io::format_double(catalog.window_end) << '\n'
        << "# threshold=" << io::format_double(catalog.threshold) << '\n'
        << "# history_start=" << io::format_double(catalog.history_start) << '\n';
    if (!catalog.origin_epoch.empty()) out << "# origin_epoch=" << catalog.origin_epoch << '\n';
    out << "time,magnitude\n";
    for (const Event& e : catalog.events)
        out << io::format_double(e.time) << ',' << io::format_double(e.magnitude) << '\n';
    return out.str();
}

[[nodiscard]] inline Catalog read_catalog(const std::string& path,
                                          std::vector<std::string>* warnings = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open catalog '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_catalog(text, warnings);
}

inline void write_catalog(const Catalog& catalog, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write catalog '" + path + "'");
    out << serialize_catalog(catalog);
}

}  // namespace etas

#pragma once

// Minimal SVG line/scatter charts. Coordinates are printed with fixed
// precision so the same data always gives the same bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace etas::io {

enum class SeriesStyle { line, step, dashed, points };

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    SeriesStyle style{SeriesStyle::line};
    std::string color{"#1f77b4"};
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y{false};
    std::vector<Series> series;
    std::vector<double> vertical_marks;  // e.g. a change point
    int width{800};
    int height{450};
};

namespace detail {

inline std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// 1, 2 or 5 times a power of ten, about n ticks.
inline std::vector<double> nice_ticks(double lo, double hi, int n = 6) {
    std::vector<double> out;
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / n;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    const double step = (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step)
        out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    return out;
}

}  // namespace detail

[[nodiscard]] inline std::string render_svg(const Chart& chart) {
    const double left = 70, right = 20, top = 40, bottom = 50;
    const double pw = chart.width - left - right, ph = chart.height - top - bottom;

    auto ty = [&](double y) { return chart.log_y ? std::log10(y) : y; };
    auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!chart.log_y || y > 0); };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : chart.series)
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
            if (usable(s.x[i], s.y[i])) {
                x0 = std::min(x0, s.x[i]), x1 = std::max(x1, s.x[i]);
                y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
            }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
    if (!chart.log_y) {
        const double pad = 0.05 * (y1 - y0);
        y0 -= pad, y1 += pad;
    }
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << chart.width << "\" height=\"" << chart.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << detail::fixed(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(chart.title) << "</text>\n";
    o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << detail::fixed(pw) << "\" height=\""
      << detail::fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (double t : detail::nice_ticks(x0, x1)) {
        const auto x = detail::fixed(px(t));
        o << "<line x1=\"" << x << "\" y1=\"" << detail::fixed(top + ph) << "\" x2=\"" << x << "\" y2=\""
          << detail::fixed(top + ph + 5) << "\" stroke=\"black\"/>";
        o << "<text x=\"" << x << "\" y=\"" << detail::fixed(top + ph + 18) << "\" text-anchor=\"middle\">"
          << detail::tick_label(t) << "</text>\n";
    }
    std::vector<double> yt;
    if (chart.log_y) {
        for (double e = std::ceil(y0); e <= y1 + 1e-9; e += 1.0) yt.push_back(std::pow(10.0, e));
        if (yt.size() < 2)
            for (double t : detail::nice_ticks(std::pow(10.0, y0), std::pow(10.0, y1), 4))
                if (t > 0) yt.push_back(t);
    } else {
        yt = detail::nice_ticks(y0, y1);
    }
    for (double t : yt) {
        const auto y = detail::fixed(py(t));
        o << "<line x1=\"" << detail::fixed(left - 5) << "\" y1=\"" << y << "\" x2=\"" << left << "\" y2=\"" << y
          << "\" stroke=\"black\"/>";
        o << "<text x=\"" << detail::fixed(left - 8) << "\" y=\"" << y << "\" text-anchor=\"end\" dy=\"4\">"
          << detail::tick_label(t) << "</text>\n";
    }
    o << "<text x=\"" << detail::fixed(left + pw / 2) << "\" y=\"" << chart.height - 10
      << "\" text-anchor=\"middle\">" << detail::escape(chart.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << detail::fixed(top + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << detail::escape(chart.y_label) << "</text>\n";

    for (double m : chart.vertical_marks) {
        if (!(m >= x0 && m <= x1)) continue;
        const auto x = detail::fixed(px(m));
        o << "<line x1=\"" << x << "\" y1=\"" << top << "\" x2=\"" << x << "\" y2=\"" << detail::fixed(top + ph)
          << "\" stroke=\"gray\" stroke-dasharray=\"2,3\"/>\n";
    }

    int legend = 0;
    for (const auto& s : chart.series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.style == SeriesStyle::points) {
            o << "<g fill=\"" << s.color << "\">";
            for (std::size_t i = 0; i < n; ++i)
                if (usable(s.x[i], s.y[i]))
                    o << "<circle cx=\"" << detail::fixed(px(s.x[i])) << "\" cy=\"" << detail::fixed(py(s.y[i]))
                      << "\" r=\"1.5\"/>";
            o << "</g>\n";
        } else {
            std::string d;
            bool pen = false;
            double last_y = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!usable(s.x[i], s.y[i])) {
                    pen = false;
                    continue;
                }
                const double x = px(s.x[i]), y = py(s.y[i]);
                if (pen && s.style == SeriesStyle::step) d += "L" + detail::fixed(x) + "," + detail::fixed(last_y);
                d += (pen ? "L" : "M") + detail::fixed(x) + "," + detail::fixed(y);
                pen = true;
                last_y = y;
            }
            o << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\"";
            if (s.style == SeriesStyle::dashed) o << " stroke-dasharray=\"5,3\"";
            o << "/>\n";
        }
        if (!s.label.empty()) {
            const double ly = top + 14 + 16 * legend++;
            o << "<line x1=\"" << detail::fixed(left + 10) << "\" y1=\"" << detail::fixed(ly) << "\" x2=\""
              << detail::fixed(left + 30) << "\" y2=\"" << detail::fixed(ly) << "\" stroke=\"" << s.color
              << "\" stroke-width=\"2\"/>";
            o << "<text x=\"" << detail::fixed(left + 36) << "\" y=\"" << detail::fixed(ly) << "\" dy=\"4\">"
              << detail::escape(s.label) << "</text>\n";
        }
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace etas::io

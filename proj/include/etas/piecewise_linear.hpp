#pragma once

#include "etas/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace etas {

/// Broken line through (knots[i], values[i]); held constant outside the knot range.
struct PiecewiseLinear {
    std::vector<double> knots;
    std::vector<double> values;

    [[nodiscard]] static PiecewiseLinear constant(double value) { return {{0.0}, {value}}; }

    [[nodiscard]] double operator()(double t) const {
        if (knots.empty()) return 1.0;
        if (t <= knots.front()) return values.front();
        if (t >= knots.back()) return values.back();
        const auto it = std::upper_bound(knots.begin(), knots.end(), t);
        const auto hi = static_cast<std::size_t>(it - knots.begin());
        const auto lo = hi - 1;
        const double gap = knots[hi] - knots[lo];
        if (gap <= 0.0) return values[hi];
        const double w = (t - knots[lo]) / gap;
        return values[lo] + w * (values[hi] - values[lo]);
    }

    /// First knot strictly after t, or +inf.
    [[nodiscard]] double next_knot_after(double t) const {
        const auto it = std::upper_bound(knots.begin(), knots.end(), t);
        return it == knots.end() ? std::numeric_limits<double>::infinity() : *it;
    }

    void validate() const {
        require(!knots.empty() && knots.size() == values.size(),
                "piecewise-linear function needs matching, nonempty knots and values");
        for (std::size_t i = 1; i < knots.size(); ++i)
            require(knots[i] >= knots[i - 1], "piecewise-linear knots must be nondecreasing");
        for (double v : values) require(std::isfinite(v) && v >= 0.0, "anomaly factors must be finite and >= 0");
    }
};

}  // namespace etas

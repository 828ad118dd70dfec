#pragma once

#include "etas/catalog.hpp"
#include "etas/core.hpp"
#include "etas/error.hpp"
#include "etas/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace etas {

struct ChangePointOptions {
    FixMask fixed{};
    std::optional<EtasParams> init;
    // Reference model: starts every fit there and holds c, alpha, p fixed, so
    // only (mu, K0) are refit per period.
    std::optional<EtasParams> reference;
    // Drop pre-t0 events from the after-period history instead of conditioning on them.
    bool hard_reset{false};
    FitOptions fit{};
};

struct ChangePointResult {
    double t0{0.0};
    FitResult fit_whole;
    FitResult fit_before;
    FitResult fit_after;
    double q_penalty{0.0};
    double aic12{0.0};
    double delta_aic{0.0};
    bool significant{false};

    [[nodiscard]] double relative_probability() const { return etas::relative_probability(delta_aic); }
};

struct CandidateScore {
    double t0;
    double aic_sum;  // AIC1 + AIC2, without the q penalty
};

struct ChangePointSearch {
    ChangePointResult best;
    std::vector<CandidateScore> scores;
    std::vector<double> skipped;  // candidates leaving an empty period
};

/// AIC12 = AIC1 + AIC2 + 2q.
[[nodiscard]] inline double aic12_of(double aic1, double aic2, double q_penalty) {
    require(q_penalty >= 0.0, "q penalty must be nonnegative");
    return aic1 + aic2 + 2.0 * q_penalty;
}

[[nodiscard]] inline double delta_aic_of(double aic12, double aic0) { return aic12 - aic0; }

/// Events before t0 over [S, t0]; history kept as is.
[[nodiscard]] inline Catalog period_before(const Catalog& cat, double t0) {
    Catalog out = cat;
    out.events.clear();
    for (const Event& e : cat.events)
        if (e.time < t0) out.events.push_back(e);
    out.window_end = t0;
    return out;
}

/// Events at or after t0 over [t0, T]. Earlier events become history unless hard_reset.
[[nodiscard]] inline Catalog period_after(const Catalog& cat, double t0, bool hard_reset) {
    Catalog out = cat;
    out.events.clear();
    out.history_count = 0;
    for (const Event& e : cat.events) {
        if (e.time < t0) {
            if (hard_reset) continue;
            ++out.history_count;
        }
        out.events.push_back(e);
    }
    out.window_start = t0;
    if (hard_reset) out.history_start = t0;
    return out;
}

[[nodiscard]] inline std::vector<double> default_candidates(const Catalog& cat) {
    std::vector<double> out;
    for (const Event& e : cat.in_window())
        if (e.time > cat.window_start && e.time < cat.window_end &&
            (out.empty() || out.back() != e.time))
            out.push_back(e.time);
    return out;
}

namespace detail {

inline FixMask changepoint_mask(const ChangePointOptions& o) {
    if (!o.reference) return o.fixed;
    return FixMask{o.fixed[0], o.fixed[1], true, true, true};
}

inline FitResult fit_period(const Catalog& period, const ChangePointOptions& o, const char* label) {
    const auto mask = changepoint_mask(o);
    EtasParams init = o.reference ? *o.reference : (o.init ? *o.init : default_init(period));
    try {
        return fit_mle(period, init, mask, o.fit);
    } catch (const Error& e) {
        fail(e.kind(), std::string(label) + " period: " + e.what());
    }
}

inline void require_inside(const Catalog& cat, double t0) {
    require(std::isfinite(t0) && t0 > cat.window_start && t0 < cat.window_end,
            "change point " + io::format_double(t0) + " must lie strictly inside (" +
                io::format_double(cat.window_start) + ", " + io::format_double(cat.window_end) + ")");
}

inline ChangePointResult assemble(double t0, FitResult whole, FitResult before, FitResult after, double q) {
    ChangePointResult r;
    r.t0 = t0;
    r.q_penalty = q;
    r.aic12 = aic12_of(before.aic, after.aic, q);
    r.delta_aic = delta_aic_of(r.aic12, whole.aic);
    r.significant = r.delta_aic < 0.0;
    r.fit_whole = std::move(whole);
    r.fit_before = std::move(before);
    r.fit_after = std::move(after);
    return r;
}

}  // namespace detail

/// Fits the whole window and the two periods split at t0 and assembles AIC12 and
/// delta AIC = AIC12 - AIC0.
[[nodiscard]] inline ChangePointResult two_stage_fit(const Catalog& cat, double t0, double q_penalty = 0.0,
                                                     const ChangePointOptions& options = {}) {
    detail::require_inside(cat, t0);
    require(q_penalty >= 0.0, "q penalty must be nonnegative");
    auto whole = detail::fit_period(cat, options, "whole");
    auto before = detail::fit_period(period_before(cat, t0), options, "before");
    auto after = detail::fit_period(period_after(cat, t0, options.hard_reset), options, "after");
    return detail::assemble(t0, std::move(whole), std::move(before), std::move(after), q_penalty);
}

/// Picks the candidate minimizing AIC1 + AIC2; the penalty 2q enters AIC12 once.
/// Candidates that leave a period without events are skipped; ties go to the earliest.
[[nodiscard]] inline ChangePointSearch search_changepoint(const Catalog& cat, std::vector<double> candidates,
                                                          double q_penalty = 0.0,
                                                          const ChangePointOptions& options = {}) {
    require(!candidates.empty(), "change-point search needs at least one candidate");
    require(q_penalty >= 0.0, "q penalty must be nonnegative");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (double t0 : candidates) detail::require_inside(cat, t0);

    ChangePointSearch out;
    std::optional<FitResult> best_before, best_after;
    double best_t0 = 0.0, best_sum = std::numeric_limits<double>::infinity();
    for (double t0 : candidates) {
        const auto b = period_before(cat, t0);
        const auto a = period_after(cat, t0, options.hard_reset);
        if (b.empty() || a.empty()) {
            out.skipped.push_back(t0);
            continue;
        }
        auto fb = detail::fit_period(b, options, "before");
        auto fa = detail::fit_period(a, options, "after");
        const double sum = fb.aic + fa.aic;
        out.scores.push_back({t0, sum});
        if (sum < best_sum) {
            best_sum = sum;
            best_t0 = t0;
            best_before = std::move(fb);
            best_after = std::move(fa);
        }
    }
    if (!best_before)
        fail(ErrorKind::empty_period, "every change-point candidate leaves a period without events");
    out.best = detail::assemble(best_t0, detail::fit_period(cat, options, "whole"), std::move(*best_before),
                                std::move(*best_after), q_penalty);
    return out;
}

}  // namespace etas

#pragma once

#include "etas/catalog.hpp"
#include "etas/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace etas {

/// The five ETAS parameters (mu, K0, c, alpha, p). Times in days.
struct EtasParams {
    double mu{0.0};     // background rate, events/day
    double k0{0.0};     // aftershock productivity, events/day
    double c{0.01};     // Omori time offset, days
    double alpha{0.0};  // magnitude sensitivity, 1/magnitude
    double p{1.0};      // Omori decay exponent

    static constexpr std::size_t size = 5;

    [[nodiscard]] std::array<double, size> to_array() const { return {mu, k0, c, alpha, p}; }
    [[nodiscard]] static EtasParams from_array(const std::array<double, size>& v) {
        return {v[0], v[1], v[2], v[3], v[4]};
    }

    friend bool operator==(const EtasParams&, const EtasParams&) = default;
};

inline constexpr std::array<const char*, EtasParams::size> kParamNames{"mu", "k0", "c", "alpha",
                                                                        "p"};

/// Per-parameter fix mask: `true` holds the parameter at its initial value.
using FixMask = std::array<bool, EtasParams::size>;

[[nodiscard]] inline bool valid(const EtasParams& p) {
    const auto v = p.to_array();
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }) &&
           p.mu >= 0.0 && p.k0 >= 0.0 && p.c > 0.0 && p.alpha >= 0.0 && p.p > 0.0;
}

inline void validate(const EtasParams& p) {
    require(valid(p), "invalid ETAS parameters: need finite mu>=0, k0>=0, c>0, alpha>=0, p>0");
}

/// Time-rescaled event sequence: tau_i = Lambda(t_i), total = Lambda(T).
struct ResidualSequence {
    std::vector<double> taus;
    double total{0.0};
};

/// Omori-Utsu aftershock rate K / (t + c)^p.
[[nodiscard]] inline double omori_utsu(double k, double c, double p, double t) {
    require(c > 0.0 && p > 0.0 && t >= 0.0, "omori_utsu requires c > 0, p > 0, t >= 0");
    return k * std::pow(t + c, -p);
}

namespace detail {

// |p - 1| below this switches the Omori primitive to its logarithmic form.
inline constexpr double kLogPrimitiveSwitch = 1e-8;
// Triggering sums with more terms than this use sorted compensated summation.
inline constexpr std::size_t kCompensatedSumThreshold = 10000;

// Integral of (u + c)^(-p) over [0, delta] for p != 1, written through expm1 so it
// stays accurate as p approaches 1.
[[nodiscard]] inline double omori_primitive_power(double delta, double c, double p) {
    const double s = 1.0 - p;
    return std::pow(c, s) * std::expm1(s * std::log1p(delta / c)) / s;
}

// Integral of (u + c)^(-1) over [0, delta].
[[nodiscard]] inline double omori_primitive_log(double delta, double c) {
    return std::log1p(delta / c);
}

// Integral of x^(-p) over [x0, x1], 0 < x0 <= x1.
[[nodiscard]] inline double power_integral(double x0, double x1, double p) {
    if (x1 <= x0) return 0.0;
    if (std::abs(p - 1.0) < kLogPrimitiveSwitch) return omori_primitive_log(x1 - x0, x0);
    return omori_primitive_power(x1 - x0, x0, p);
}

// Integral of ln(x) x^(-p) over [x0, x1]; the p-derivative of power_integral is its negative.
[[nodiscard]] inline double log_power_integral(double x0, double x1, double p) {
    if (x1 <= x0) return 0.0;
    const double a = std::log(x0);
    const double b = std::log(x1);
    const double s = 1.0 - p;
    const double scale = std::abs(s) * std::max(std::abs(a), std::abs(b));
    if (scale < 0.5) {
        // Series in s of the integral of y e^{s y} dy over [a, b].
        double total = 0.0;
        double coeff = 1.0;  // s^k / k!
        double apow = a * a, bpow = b * b;
        for (int k = 0; k < 80; ++k) {
            total += coeff * (bpow - apow) / (k + 2);
            // Individual terms can vanish by symmetry; stop on the size bound instead.
            const double bound = std::abs(coeff) * std::max(std::abs(apow), std::abs(bpow));
            if (k > 2 && bound <= 1e-17 * std::abs(total)) break;
            coeff *= s / (k + 1);
            apow *= a;
            bpow *= b;
        }
        return total;
    }
    auto antiderivative = [s](double y) { return std::exp(s * y) * (y / s - 1.0 / (s * s)); };
    return antiderivative(b) - antiderivative(a);
}

// Neumaier summation over terms sorted by decreasing magnitude.
[[nodiscard]] inline double sum_descending_compensated(std::vector<double>& terms) {
    std::sort(terms.begin(), terms.end(), [](double x, double y) { return std::abs(x) > std::abs(y); });
    double sum = 0.0, compensation = 0.0;
    for (double v : terms) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) compensation += (sum - t) + v;
        else compensation += (v - t) + sum;
        sum = t;
    }
    return sum + compensation;
}

// Productivity multiplier exp(alpha (M - Mz)).
[[nodiscard]] inline double productivity(const EtasParams& p, double magnitude, double threshold) {
    return std::exp(p.alpha * (magnitude - threshold));
}

// Triggering part of the intensity at t, summed over events strictly before t.
[[nodiscard]] inline double triggering_rate(const EtasParams& p, const Catalog& catalog, double t) {
    const auto& ev = catalog.events;
    const auto end = std::lower_bound(ev.begin(), ev.end(), t,
                                      [](const Event& e, double x) { return e.time < x; });
    const auto n = static_cast<std::size_t>(end - ev.begin());
    if (n > kCompensatedSumThreshold) {
        std::vector<double> terms(n);
        for (std::size_t i = 0; i < n; ++i)
            terms[i] = productivity(p, ev[i].magnitude, catalog.threshold) *
                       std::pow(t - ev[i].time + p.c, -p.p);
        return p.k0 * sum_descending_compensated(terms);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += productivity(p, ev[i].magnitude, catalog.threshold) * std::pow(t - ev[i].time + p.c, -p.p);
    return p.k0 * sum;
}

// Expected number of events triggered by `parent` inside [max(S, t_parent), t].
[[nodiscard]] inline double triggered_count(const EtasParams& p, const Event& parent,
                                            double threshold, double window_start, double t) {
    const double lower = std::max(window_start, parent.time);
    if (t <= lower) return 0.0;
    return p.k0 * productivity(p, parent.magnitude, threshold) *
           power_integral(lower - parent.time + p.c, t - parent.time + p.c, p.p);
}

}  // namespace detail

/// lambda(t | H_t): background rate plus Omori terms of all events strictly
/// before t, history-only events included.
[[nodiscard]] inline double conditional_intensity(const EtasParams& params, const Catalog& catalog,
                                                  double t) {
    validate(params);
    require(std::isfinite(t), "time must be finite");
    return params.mu + detail::triggering_rate(params, catalog, t);
}

/// Lambda(t) = integral of lambda over [S, t], using closed-form Omori primitives.
[[nodiscard]] inline double cumulative_intensity(const EtasParams& params, const Catalog& catalog,
                                                 double t) {
    validate(params);
    require(t >= catalog.window_start && t <= catalog.window_end,
            "cumulative_intensity: t outside the observation window");
    double total = params.mu * (t - catalog.window_start);
    for (const Event& e : catalog.events) {
        if (e.time >= t) break;
        total += detail::triggered_count(params, e, catalog.threshold, catalog.window_start, t);
    }
    return total;
}

/// Log-likelihood and its gradient with respect to (mu, K0, c, alpha, p).
struct LikelihoodEvaluation {
    double value{-std::numeric_limits<double>::infinity()};
    std::array<double, EtasParams::size> gradient{};
    bool finite{false};
};

/// Non-throwing evaluation used by the optimizers. Returns value = -inf when any
/// in-window event sees a non-positive intensity. Parameters are not validated
/// here so finite-difference probes may step slightly outside the valid region.
[[nodiscard]] inline LikelihoodEvaluation evaluate_log_likelihood(const EtasParams& prm,
                                                                  const Catalog& catalog,
                                                                  bool with_gradient = true) {
    LikelihoodEvaluation out;
    const auto& ev = catalog.events;
    const std::size_t first = catalog.history_count;
    const double S = catalog.window_start;
    const double T = catalog.window_end;
    const std::size_t n = ev.size();

    std::vector<double> prod(n), mag(n);
    for (std::size_t i = 0; i < n; ++i) {
        mag[i] = ev[i].magnitude - catalog.threshold;
        prod[i] = std::exp(prm.alpha * mag[i]);
    }

    const bool compensated = n > detail::kCompensatedSumThreshold;
    std::vector<double> terms;
    double log_sum = 0.0;
    std::array<double, 5> g{};
    for (std::size_t j = first; j < n; ++j) {
        const double tj = ev[j].time;
        double s0 = 0.0, sc = 0.0, sa = 0.0, sp = 0.0;
        if (compensated) terms.clear();
        for (std::size_t i = 0; i < j && ev[i].time < tj; ++i) {
            const double x = tj - ev[i].time + prm.c;
            const double k = prod[i] * std::pow(x, -prm.p);
            if (compensated) terms.push_back(k);
            else s0 += k;
            if (with_gradient) {
                sc += k / x;
                sa += mag[i] * k;
                sp += k * std::log(x);
            }
        }
        if (compensated) s0 = detail::sum_descending_compensated(terms);
        const double lambda = prm.mu + prm.k0 * s0;
        if (!(lambda > 0.0) || !std::isfinite(lambda)) return out;
        log_sum += std::log(lambda);
        if (with_gradient) {
            g[0] += 1.0 / lambda;
            g[1] += s0 / lambda;
            g[2] += -prm.p * prm.k0 * sc / lambda;
            g[3] += prm.k0 * sa / lambda;
            g[4] += -prm.k0 * sp / lambda;
        }
    }

    double integral = prm.mu * (T - S);
    double i0 = 0.0, ic = 0.0, ia = 0.0, ip = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lower = std::max(S, ev[i].time);
        if (T <= lower) continue;
        const double x0 = lower - ev[i].time + prm.c;
        const double x1 = T - ev[i].time + prm.c;
        const double I = detail::power_integral(x0, x1, prm.p);
        i0 += prod[i] * I;
        if (with_gradient) {
            ic += prod[i] * (std::pow(x1, -prm.p) - std::pow(x0, -prm.p));
            ia += mag[i] * prod[i] * I;
            ip += -prod[i] * detail::log_power_integral(x0, x1, prm.p);
        }
    }
    integral += prm.k0 * i0;

    out.value = log_sum - integral;
    out.finite = std::isfinite(out.value);
    if (with_gradient) {
        out.gradient = {g[0] - (T - S), g[1] - i0, g[2] - prm.k0 * ic, g[3] - prm.k0 * ia,
                        g[4] - prm.k0 * ip};
    }
    return out;
}

/// Point-process log-likelihood: sum of log lambda(t_i) over in-window events
/// minus the integral of lambda over [S, T].
[[nodiscard]] inline double log_likelihood(const EtasParams& params, const Catalog& catalog) {
    validate(params);
    const auto eval = evaluate_log_likelihood(params, catalog, false);
    if (!eval.finite)
        fail(ErrorKind::degenerate_likelihood,
             "log-likelihood is -inf: conditional intensity vanishes at an event time");
    return eval.value;
}

/// Analytic gradient of log_likelihood with respect to (mu, K0, c, alpha, p).
[[nodiscard]] inline std::array<double, EtasParams::size> log_likelihood_gradient(
    const EtasParams& params, const Catalog& catalog) {
    validate(params);
    const auto eval = evaluate_log_likelihood(params, catalog, true);
    if (!eval.finite)
        fail(ErrorKind::degenerate_likelihood,
             "log-likelihood is -inf: conditional intensity vanishes at an event time");
    return eval.gradient;
}

/// Time transformation tau_i = Lambda(t_i) for each in-window event.
[[nodiscard]] inline ResidualSequence transform_times(const EtasParams& params,
                                                      const Catalog& catalog) {
    validate(params);
    ResidualSequence out;
    const auto& ev = catalog.events;
    out.taus.reserve(catalog.size());
    for (std::size_t j = catalog.history_count; j < ev.size(); ++j) {
        const double t = ev[j].time;
        double tau = params.mu * (t - catalog.window_start);
        for (std::size_t i = 0; i < ev.size() && ev[i].time < t; ++i)
            tau += detail::triggered_count(params, ev[i], catalog.threshold, catalog.window_start, t);
        out.taus.push_back(tau);
    }
    out.total = cumulative_intensity(params, catalog, catalog.window_end);
    return out;
}

/// Expected offspring per event over a horizon, for magnitudes following an
/// exponential law with rate beta above the threshold. Infinite when beta <= alpha.
[[nodiscard]] inline double branching_ratio(const EtasParams& p, double beta, double horizon) {
    if (beta <= p.alpha) return std::numeric_limits<double>::infinity();
    const double magnitude_factor = beta / (beta - p.alpha);
    const double time_factor = std::isfinite(horizon)
                                   ? detail::power_integral(p.c, horizon + p.c, p.p)
                                   : (p.p > 1.0 ? std::pow(p.c, 1.0 - p.p) / (p.p - 1.0)
                                                : std::numeric_limits<double>::infinity());
    return p.k0 * magnitude_factor * time_factor;
}

}  // namespace etas

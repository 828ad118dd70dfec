#pragma once

#include "etas/catalog.hpp"
#include "etas/core.hpp"
#include "etas/error.hpp"
#include "etas/piecewise_linear.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace etas {

/// Deterministic, seedable random stream. Each (seed, stream) pair seeds an
/// independent mt19937_64 through SplitMix64; uniforms are built from the top
/// 53 bits so results do not depend on the standard library's distributions.
class RandomStream {
public:
    static constexpr std::uint64_t kTiming = 0;
    static constexpr std::uint64_t kMagnitude = 1;

    RandomStream(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t state = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
        std::seed_seq seq{split(state), split(state), split(state), split(state)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Exponential with the given rate.
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

private:
    static std::uint32_t split(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return static_cast<std::uint32_t>((z ^ (z >> 31)) >> 32);
    }

    std::mt19937_64 engine_;
};

/// Gutenberg-Richter magnitude from a uniform draw: M = Mc - ln(1 - u) / beta.
[[nodiscard]] inline double gr_magnitude(double b_value, double m_c, double u) {
    return m_c - std::log1p(-u) / (b_value * std::log(10.0));
}

/// n i.i.d. magnitudes with density beta exp(-beta (M - Mc)), beta = b ln 10.
/// Draws come from the magnitude stream of `seed`, so they coincide with the
/// magnitudes the simulator assigns to its accepted events.
[[nodiscard]] inline std::vector<double> gr_magnitudes(double b_value, double m_c, std::size_t n,
                                                       std::uint64_t seed) {
    require(b_value > 0.0 && std::isfinite(m_c), "gr_magnitudes requires b > 0 and finite Mc");
    RandomStream stream(seed, RandomStream::kMagnitude);
    std::vector<double> out(n);
    for (double& m : out) m = gr_magnitude(b_value, m_c, stream.uniform());
    return out;
}

/// Reference ETAS parameters modulated by anomaly factors mu(t) = mu q_mu(t) and
/// K0(t_i) = K0 q_k(t_i), the latter taken at each parent's occurrence time.
struct NonstationaryTruth {
    EtasParams reference;
    PiecewiseLinear q_mu;
    PiecewiseLinear q_k;
};

using SimModel = std::variant<EtasParams, NonstationaryTruth>;

struct SimConfig {
    SimModel model;
    double window_start{0.0};
    double window_end{0.0};
    double b_value{1.0};
    double m_c{0.0};
    std::uint64_t seed{0};
    std::size_t max_events{100000};
    bool check_dominating_rate{false};
};

struct SimulationResult {
    Catalog catalog;
    bool truncated{false};
    std::size_t candidates{0};
    std::size_t bound_violations{0};  // only counted with check_dominating_rate
    double branching_ratio{0.0};
    std::vector<std::string> warnings;
};

inline void validate(const SimConfig& cfg) {
    require(cfg.b_value > 0.0, "b-value must be positive");
    require(std::isfinite(cfg.m_c), "completeness magnitude must be finite");
    require(std::isfinite(cfg.window_start) && std::isfinite(cfg.window_end) &&
                cfg.window_end > cfg.window_start,
            "simulation window must be nondegenerate");
    require(cfg.max_events > 0, "max_events must be positive");
    if (const auto* p = std::get_if<EtasParams>(&cfg.model)) {
        validate(*p);
    } else {
        const auto& ns = std::get<NonstationaryTruth>(cfg.model);
        validate(ns.reference);
        ns.q_mu.validate();
        ns.q_k.validate();
    }
}

/// Simulates by thinning. Between events the Omori terms only decay, so the
/// intensity just after the current time bounds the triggering part; the
/// background part is bounded by the larger endpoint of q_mu on the current
/// linear piece. Candidates beyond the current piece restart the draw there.
[[nodiscard]] inline SimulationResult simulate_thinning(const SimConfig& cfg) {
    validate(cfg);
    const NonstationaryTruth truth = std::holds_alternative<EtasParams>(cfg.model)
                                         ? NonstationaryTruth{std::get<EtasParams>(cfg.model),
                                                              PiecewiseLinear::constant(1.0),
                                                              PiecewiseLinear::constant(1.0)}
                                         : std::get<NonstationaryTruth>(cfg.model);
    const EtasParams& prm = truth.reference;
    const double S = cfg.window_start, T = cfg.window_end;

    SimulationResult out;
    const double beta = cfg.b_value * std::log(10.0);
    double max_qk = 0.0;
    for (double v : truth.q_k.values) max_qk = std::max(max_qk, v);
    EtasParams scaled = prm;
    scaled.k0 *= max_qk;
    out.branching_ratio = branching_ratio(scaled, beta, T - S);
    if (out.branching_ratio >= 1.0)
        out.warnings.push_back("supercritical: estimated branching ratio " +
                               io::format_double(out.branching_ratio) + " >= 1");

    RandomStream timing(cfg.seed, RandomStream::kTiming);
    RandomStream magnitudes(cfg.seed, RandomStream::kMagnitude);

    std::vector<Event> events;
    std::vector<double> weight;  // K0 q_k(t_i) exp(alpha (M_i - Mc))

    // Triggering rate at s from events with time < s (or <= s when inclusive).
    auto trig = [&](double s, bool inclusive) {
        double sum = 0.0;
        for (std::size_t i = 0; i < events.size(); ++i) {
            const double dt = s - events[i].time;
            if (dt < 0.0 || (dt == 0.0 && !inclusive)) continue;
            sum += weight[i] * std::pow(dt + prm.c, -prm.p);
        }
        return sum;
    };

    double t = S;
    while (t < T) {
        const double horizon = std::min(T, truth.q_mu.next_knot_after(t));
        const double mu_bound = prm.mu * std::max(truth.q_mu(t), truth.q_mu(horizon));
        const double bound = mu_bound + trig(t, true);
        if (!(bound > 0.0)) {
            t = horizon;
            continue;
        }
        const double s = t + timing.exponential(bound);
        if (s >= horizon) {
            t = horizon;
            continue;
        }
        ++out.candidates;
        const double rate = prm.mu * truth.q_mu(s) + trig(s, false);
        if (cfg.check_dominating_rate && rate > bound * (1.0 + 1e-12)) ++out.bound_violations;
        if (timing.uniform() * bound <= rate) {
            if (events.size() >= cfg.max_events) {
                out.truncated = true;
                out.warnings.push_back("max_events reached; catalog truncated");
                break;
            }
            const double m = gr_magnitude(cfg.b_value, cfg.m_c, magnitudes.uniform());
            events.push_back({s, m});
            weight.push_back(prm.k0 * truth.q_k(s) * std::exp(prm.alpha * (m - cfg.m_c)));
        }
        t = s;
    }

    out.catalog.events = std::move(events);
    out.catalog.window_start = S;
    out.catalog.window_end = T;
    out.catalog.history_start = S;
    out.catalog.threshold = cfg.m_c;
    return out;
}

}  // namespace etas

#pragma once

#include "etas/empirical_bayes.hpp"
#include "etas/simulator.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace etas {

enum class ChangePointAnchor { ordinal, temporal };

struct RoundtripProtocol {
    Restriction restriction{Restriction::free};
    SmoothingDomain domain{SmoothingDomain::ordinary};
    ChangePointAnchor anchor{ChangePointAnchor::ordinal};
    // Ordinal: change point between event k and k + 1 (1-based) of the simulated catalog.
    std::optional<std::size_t> changepoint_event;
    // Temporal: change point at this time.
    std::optional<double> changepoint_time;
    Hyperparams init{};
    BayesOptions bayes{};
    double band{2.0};  // half-width of the band in standard errors
};

struct RoundtripReport {
    bool empty{true};
    Catalog catalog;
    bool truncated{false};
    std::optional<double> changepoint;
    std::optional<BayesFit> fit;
    std::vector<double> times;  // event knots
    std::vector<double> truth_mu, truth_k, est_mu, est_k, eps_mu, eps_k;
    std::vector<bool> inside_mu, inside_k;
    double coverage_mu{0.0};
    double coverage_k{0.0};
    std::vector<std::string> diagnostics;
};

/// Change point midway between the k-th and (k+1)-th in-window events.
[[nodiscard]] inline double ordinal_changepoint(const Catalog& catalog, std::size_t k) {
    const auto ev = catalog.in_window();
    require(k >= 1 && k < ev.size(),
            "change point after event " + std::to_string(k) + " needs at least " + std::to_string(k + 1) +
                " events, catalog has " + std::to_string(ev.size()));
    return 0.5 * (ev[k - 1].time + ev[k].time);
}

/// Simulates from a nonstationary truth, refits with the protocol and reports
/// how often the true factors lie within band * eps of the estimate at the event knots.
[[nodiscard]] inline RoundtripReport roundtrip_recover(const SimConfig& config, const RoundtripProtocol& protocol) {
    RoundtripReport out;
    if (!(config.window_end > config.window_start)) {
        out.diagnostics.push_back("zero-length window: nothing to simulate");
        return out;
    }
    const auto* truth = std::get_if<NonstationaryTruth>(&config.model);
    require(truth != nullptr, "roundtrip needs a nonstationary truth model");
    auto sim = simulate_thinning(config);
    out.catalog = std::move(sim.catalog);
    out.truncated = sim.truncated;
    out.diagnostics = sim.warnings;
    if (out.catalog.size() < 2) {
        out.diagnostics.push_back("fewer than two simulated events: nothing to fit");
        return out;
    }
    if (protocol.anchor == ChangePointAnchor::ordinal && protocol.changepoint_event)
        out.changepoint = ordinal_changepoint(out.catalog, *protocol.changepoint_event);
    else if (protocol.anchor == ChangePointAnchor::temporal && protocol.changepoint_time)
        out.changepoint = *protocol.changepoint_time;

    const NsProblem problem(out.catalog, protocol.restriction, protocol.domain, truth->reference, out.changepoint);
    out.fit = optimize_hyperparams(problem, protocol.init, protocol.bayes);
    const auto& fit = *out.fit;
    for (const Event& e : out.catalog.in_window()) out.times.push_back(e.time);
    // Evaluate on the (possibly perturbed) knots so each factor is read at its own coefficient.
    std::vector<double> knots(fit.basis.knots.begin() + 1, fit.basis.knots.end() - 1);
    const auto eps = error_bounds(fit, knots);
    std::size_t in_mu = 0, in_k = 0;
    for (std::size_t i = 0; i < knots.size(); ++i) {
        const double t = out.times[i];
        out.truth_mu.push_back(truth->q_mu(t));
        out.truth_k.push_back(truth->q_k(t));
        out.est_mu.push_back(fit.map.q_mu[i + 1]);
        out.est_k.push_back(fit.map.q_k[i + 1]);
        out.eps_mu.push_back(eps.eps_mu[i]);
        out.eps_k.push_back(eps.eps_k[i]);
        out.inside_mu.push_back(std::abs(out.truth_mu.back() - out.est_mu.back()) <= protocol.band * eps.eps_mu[i]);
        out.inside_k.push_back(std::abs(out.truth_k.back() - out.est_k.back()) <= protocol.band * eps.eps_k[i]);
        in_mu += out.inside_mu.back() ? 1 : 0;
        in_k += out.inside_k.back() ? 1 : 0;
    }
    out.coverage_mu = static_cast<double>(in_mu) / static_cast<double>(knots.size());
    out.coverage_k = static_cast<double>(in_k) / static_cast<double>(knots.size());
    out.empty = false;
    return out;
}

}  // namespace etas

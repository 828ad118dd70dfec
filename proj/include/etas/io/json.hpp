#pragma once

// JSON forms of the library's results. Key order is sorted (nlohmann default),
// which keeps files byte-stable across runs.

#include "etas/changepoint.hpp"
#include "etas/empirical_bayes.hpp"
#include "etas/mle.hpp"
#include "etas/nonstationary.hpp"
#include "etas/residual.hpp"
#include "etas/scoreboard.hpp"
#include "etas/simulator.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <string>

namespace etas::io {

using json = nlohmann::json;

// NaN / inf become null.
[[nodiscard]] inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
[[nodiscard]] inline json optional_number(const std::optional<T>& v) {
    return v ? number(static_cast<double>(*v)) : json(nullptr);
}

[[nodiscard]] inline json to_json(const EtasParams& p) {
    return {{"mu", p.mu}, {"k0", p.k0}, {"c", p.c}, {"alpha", p.alpha}, {"p", p.p}};
}

[[nodiscard]] inline double get_number(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key) || !j.at(key).is_number())
        fail(ErrorKind::parse, std::string("expected numeric field '") + key + "'");
    return j.at(key).get<double>();
}

/// Accepts a bare {mu,k0,c,alpha,p} object, or any object carrying one under
/// "params" (fit results) or "reference" (anomaly models).
[[nodiscard]] inline EtasParams params_from_json(const json& j) {
    if (j.is_object() && !j.contains("mu")) {
        if (j.contains("params")) return params_from_json(j.at("params"));
        if (j.contains("reference")) return params_from_json(j.at("reference"));
    }
    EtasParams p{get_number(j, "mu"), get_number(j, "k0"), get_number(j, "c"), get_number(j, "alpha"),
                 get_number(j, "p")};
    if (!valid(p)) fail(ErrorKind::parse, "ETAS parameters out of range");
    return p;
}

[[nodiscard]] inline json to_json(const FitResult& f) {
    json fixed = json::array();
    json se = json::object();
    for (std::size_t i = 0; i < EtasParams::size; ++i) {
        if (f.fixed[i]) fixed.push_back(kParamNames[i]);
        se[kParamNames[i]] = optional_number(f.std_errors.values[i]);
    }
    json j{{"params", to_json(f.params)},
           {"fixed", fixed},
           {"loglik", number(f.loglik)},
           {"aic", number(f.aic)},
           {"k", f.k},
           {"se", se},
           {"converged", f.converged},
           {"iterations", f.iterations},
           {"gradient_norm", number(f.gradient_norm)},
           {"warnings", f.warnings}};
    if (!f.std_errors.diagnostic.empty()) j["se_diagnostic"] = f.std_errors.diagnostic;
    return j;
}

[[nodiscard]] inline json to_json(const ChangePointResult& r) {
    return {{"t0", r.t0},
            {"aic0", number(r.fit_whole.aic)},
            {"aic1", number(r.fit_before.aic)},
            {"aic2", number(r.fit_after.aic)},
            {"q", r.q_penalty},
            {"aic12", number(r.aic12)},
            {"delta_aic", number(r.delta_aic)},
            {"significant", r.significant},
            {"relative_probability", number(r.relative_probability())},
            {"fits", {{"whole", to_json(r.fit_whole)}, {"before", to_json(r.fit_before)}, {"after", to_json(r.fit_after)}}}};
}

[[nodiscard]] inline json to_json(const ChangePointSearch& s) {
    json j = to_json(s.best);
    json scores = json::array();
    for (const auto& c : s.scores) scores.push_back({{"t0", c.t0}, {"aic_sum", number(c.aic_sum)}});
    j["search"] = {{"scores", scores}, {"skipped", s.skipped}};
    return j;
}

[[nodiscard]] inline json to_json(const AnomalyModel& m, const SplineBasis& basis) {
    json j{{"knots", basis.knots},
           {"q_mu", m.q_mu},
           {"q_k", m.q_k},
           {"restriction", to_string(m.restriction)},
           {"domain", to_string(m.domain)},
           {"changepoint", optional_number(m.changepoint)},
           {"reference", to_json(m.reference)}};
    if (basis.domain == SmoothingDomain::transformed) j["tau_knots"] = basis.tau_knots;
    return j;
}

struct StoredModel {
    AnomalyModel model;
    SplineBasis basis;
};

[[nodiscard]] inline std::vector<double> get_vector(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_array()) fail(ErrorKind::parse, std::string("expected array '") + key + "'");
    std::vector<double> out;
    for (const auto& v : j.at(key)) {
        if (!v.is_number()) fail(ErrorKind::parse, std::string("non-numeric entry in '") + key + "'");
        out.push_back(v.get<double>());
    }
    return out;
}

/// Reads an anomaly-model file; also accepts a BayesFit report with the model under "map".
[[nodiscard]] inline StoredModel anomaly_from_json(const json& j) {
    if (j.is_object() && j.contains("map") && j.at("map").is_object()) return anomaly_from_json(j.at("map"));
    if (!j.is_object()) fail(ErrorKind::parse, "anomaly model must be a JSON object");
    StoredModel s;
    s.basis.knots = get_vector(j, "knots");
    s.model.q_mu = get_vector(j, "q_mu");
    s.model.q_k = get_vector(j, "q_k");
    if (!j.contains("restriction") || !j.at("restriction").is_string() || !j.contains("domain") ||
        !j.at("domain").is_string())
        fail(ErrorKind::parse, "anomaly model needs 'restriction' and 'domain' strings");
    s.model.restriction = parse_restriction(j.at("restriction").get<std::string>());
    s.model.domain = parse_domain(j.at("domain").get<std::string>());
    s.basis.domain = s.model.domain;
    if (s.basis.domain == SmoothingDomain::transformed) s.basis.tau_knots = get_vector(j, "tau_knots");
    if (j.contains("changepoint") && !j.at("changepoint").is_null()) s.model.changepoint = j.at("changepoint").get<double>();
    if (!j.contains("reference")) fail(ErrorKind::parse, "anomaly model needs 'reference' parameters");
    s.model.reference = params_from_json(j.at("reference"));
    const auto k = s.basis.knots.size();
    if (k < 2 || s.model.q_mu.size() != k || s.model.q_k.size() != k ||
        (s.basis.domain == SmoothingDomain::transformed && s.basis.tau_knots.size() != k))
        fail(ErrorKind::parse, "anomaly model arrays must all have one entry per knot (at least two)");
    for (std::size_t i = 1; i < k; ++i)
        if (!(s.basis.knots[i] > s.basis.knots[i - 1])) fail(ErrorKind::parse, "anomaly model knots must increase");
    return s;
}

[[nodiscard]] inline json to_json(const Hyperparams& h) {
    return {{"weights", {{"w_mu", number(h.w_mu)}, {"w_k", number(h.w_k)}}},
            {"boundary", {{"q_mu", number(h.q_mu_boundary)}, {"q_k", number(h.q_k_boundary)}}}};
}

/// Per-model report; file references are relative names set by the caller.
[[nodiscard]] inline json bayes_report(const ModelSpec& spec, const BayesFit& fit, const std::string& map_ref,
                                       const std::string& error_trace) {
    json j = to_json(fit.hyper);
    j["model"] = model_name(spec);
    j["restriction"] = to_string(fit.map.restriction);
    j["domain"] = to_string(fit.map.domain);
    j["changepoint"] = optional_number(fit.map.changepoint);
    j["abic"] = number(fit.abic);
    j["abic0"] = optional_number(fit.abic0);
    j["delta_abic"] = optional_number(fit.delta_abic);
    j["log_marginal"] = number(fit.log_marginal);
    j["hyper_count"] = fit.hyper_count;
    j["loglik"] = number(fit.loglik);
    j["penalized_loglik"] = number(fit.penalized);
    j["log_det_h"] = number(fit.log_det_h);
    j["converged"] = fit.converged;
    j["evaluations"] = fit.evaluations;
    j["diagnostics"] = fit.diagnostics;
    j["map_ref"] = map_ref;
    j["error_trace"] = error_trace;
    return j;
}

[[nodiscard]] inline json to_json(const Scoreboard& s) {
    json rows = json::array();
    for (const auto& r : s.rows)
        rows.push_back({{"model", r.name},
                        {"abic", number(r.abic)},
                        {"delta_abic", number(r.delta_abic)},
                        {"relative_probability", number(r.relative_probability)},
                        {"winner", r.winner}});
    return {{"rows", rows}, {"winner", s.winner.empty() ? json(nullptr) : json(s.winner)}};
}

[[nodiscard]] inline json to_json(const PiecewiseLinear& f) { return {{"knots", f.knots}, {"values", f.values}}; }

[[nodiscard]] inline json to_json(const SimConfig& c) {
    json model;
    if (const auto* p = std::get_if<EtasParams>(&c.model)) {
        model = {{"type", "stationary"}, {"params", to_json(*p)}};
    } else {
        const auto& ns = std::get<NonstationaryTruth>(c.model);
        model = {{"type", "nonstationary"},
                 {"reference", to_json(ns.reference)},
                 {"q_mu", to_json(ns.q_mu)},
                 {"q_k", to_json(ns.q_k)}};
    }
    return {{"model", model},
            {"window_start", c.window_start},
            {"window_end", c.window_end},
            {"b_value", c.b_value},
            {"m_c", c.m_c},
            {"seed", c.seed},
            {"max_events", c.max_events}};
}

[[nodiscard]] inline json sidecar(const SimConfig& c, const SimulationResult& r) {
    return {{"config", to_json(c)},
            {"events", r.catalog.size()},
            {"truncated", r.truncated},
            {"candidates", r.candidates},
            {"branching_ratio", number(r.branching_ratio)},
            {"warnings", r.warnings}};
}

[[nodiscard]] inline json to_json(const ResidualReport& r) {
    return {{"n", r.sequence.taus.size()},
            {"total", number(r.sequence.total)},
            {"ks", {{"statistic", number(r.ks.statistic)}, {"p_value", number(r.ks.p_value)}, {"n", r.ks.n}}}};
}

[[nodiscard]] inline json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, path + ": " + e.what());
    }
}

/// Two-space indent plus trailing newline.
inline void write_json(const json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write '" + path + "'");
    out << j.dump(2) << '\n';
}

}  // namespace etas::io

// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.
// Usage: etas_acceptance [criterion numbers...]   (default: all)

#include "etas/etas.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#ifndef ETAS_CLI
#define ETAS_CLI "etas"
#endif
#ifndef ETAS_WORK_DIR
#define ETAS_WORK_DIR "acceptance-work"
#endif

using namespace etas;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass{false};
    std::string detail;
};

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

Catalog simulate(const SimModel& model, double T, std::uint64_t seed, double b = 1.273, double mc = 2.5) {
    SimConfig cfg;
    cfg.model = model;
    cfg.window_end = T;
    cfg.b_value = b;
    cfg.m_c = mc;
    cfg.seed = seed;
    return simulate_thinning(cfg).catalog;
}

// Sum of log lambda at events minus adaptive quadrature of lambda.
double quadrature_loglik(const std::function<double(double)>& lambda, const Catalog& cat, double c) {
    double sum = 0.0;
    for (const Event& e : cat.in_window()) sum += std::log(lambda(e.time));
    return sum - testing::integrate_piecewise(lambda, cat.window_start, cat.window_end, testing::event_times(cat), c);
}

// ---------------------------------------------------------------- 1
Outcome likelihood_quadrature() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.4, 1.8);
    double worst7 = 0, worst14 = 0;
    for (int k = 0; k < 100; ++k) {
        const auto p = testing::random_params(rng);
        const auto cat = testing::random_catalog(rng, 5 + k % 25, 0.0, 20.0);
        auto lam = [&](double t) { return testing::naive_intensity(p, cat, t); };
        worst7 = std::max(worst7, rel_err(log_likelihood(p, cat), quadrature_loglik(lam, cat, p.c)));

        // nonstationary form with random anomaly factors
        const auto basis = build_basis(cat, SmoothingDomain::ordinary, p);
        auto m = flat_model(basis, Restriction::free, p);
        for (double& q : m.q_mu) q = u(rng);
        for (double& q : m.q_k) q = u(rng);
        auto lam_ns = [&](double t) { return ns_intensity(m, basis, cat, t); };
        auto breaks = testing::event_times(cat);
        breaks.insert(breaks.end(), basis.knots.begin(), basis.knots.end());
        double sum = 0.0;
        for (const Event& e : cat.in_window()) sum += std::log(lam_ns(e.time));
        const double oracle = sum - testing::integrate_piecewise(lam_ns, cat.window_start, cat.window_end, breaks, p.c);
        worst14 = std::max(worst14, rel_err(ns_log_likelihood(m, basis, cat), oracle));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst7 <= 1e-8 && worst14 <= 1e-8 && secs < 10,
            fmt("max rel err stationary %.2e, nonstationary %.2e (tol 1e-8); %.1f s (limit 10)", worst7, worst14, secs)};
}

// ---------------------------------------------------------------- 2
Outcome gradients() {
    std::mt19937_64 rng(202);
    double worst7 = 0, worst16 = 0;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1e-3, std::max(std::abs(a), std::abs(b))); };
    for (int k = 0; k < 50; ++k) {
        const auto p = testing::random_params(rng);
        const auto cat = testing::random_catalog(rng, 20, 0.0, 30.0);
        const auto g = log_likelihood_gradient(p, cat);
        auto v = p.to_array();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double h = 1e-5 * std::max(1e-3, std::abs(v[i]));
            auto up = v, dn = v;
            up[i] += h, dn[i] -= h;
            const double fd = (log_likelihood(EtasParams::from_array(up), cat) -
                               log_likelihood(EtasParams::from_array(dn), cat)) / (2 * h);
            worst7 = std::max(worst7, rel(g[i], fd));
        }
    }
    std::uniform_real_distribution<double> u(0.5, 1.5), lw(-1.0, 2.0);
    for (int k = 0; k < 50; ++k) {
        const auto p = testing::random_params(rng);
        const auto cat = testing::random_catalog(rng, 15, 0.0, 30.0);
        const auto r = k % 3 == 0 ? Restriction::fix_qk : k % 3 == 1 ? Restriction::tied : Restriction::free;
        const auto domain = k % 2 ? SmoothingDomain::transformed : SmoothingDomain::ordinary;
        const std::optional<double> cp = k % 4 == 0 ? std::optional<double>(15.0) : std::nullopt;
        const NsProblem problem(cat, r, domain, p, cp);
        const PenaltyConfig pen{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng)), 1e-5};
        const double bm = u(rng), bk = r == Restriction::tied ? bm : u(rng);
        const auto lik = problem.likelihood(bm, bk);
        const auto blocks = problem.prior_blocks(pen, bm, bk);
        Eigen::VectorXd x(lik.dimension());
        for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = u(rng);
        auto q = [&](const Eigen::VectorXd& y) {
            return penalized_loglik(problem.model_from(y, bm, bk), problem.basis, cat, pen);
        };
        Eigen::VectorXd g;
        (void)lik.evaluate(x, &g, nullptr);
        for (const auto& b : blocks) b.subtract_gradient(x, g);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const double h = 1e-6;
            Eigen::VectorXd up = x, dn = x;
            up[i] += h, dn[i] -= h;
            worst16 = std::max(worst16, rel(g[i], (q(up) - q(dn)) / (2 * h)));
        }
    }
    return {worst7 <= 1e-5 && worst16 <= 1e-5,
            fmt("max rel err log-likelihood %.2e, penalized %.2e (tol 1e-5), 50 points each", worst7, worst16)};
}

// ---------------------------------------------------------------- 3
Outcome concavity() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.05, 3.0), lw(-2.0, 3.0);
    int violations = 0, checked = 0;
    double worst = 0;
    for (int set = 0; set < 10; ++set) {
        const auto p = testing::random_params(rng);
        const auto cat = testing::random_catalog(rng, 25, 0.0, 40.0);
        const auto domain = set % 2 ? SmoothingDomain::transformed : SmoothingDomain::ordinary;
        const auto basis = build_basis(cat, domain, p);
        const PenaltyConfig pen{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng)), 1e-5};
        auto model = [&]() {
            auto m = flat_model(basis, Restriction::free, p, set % 3 == 0 ? std::optional<double>(20.0) : std::nullopt);
            for (double& v : m.q_mu) v = u(rng);
            for (double& v : m.q_k) v = u(rng);
            return m;
        };
        for (int k = 0; k < 100; ++k) {
            const auto a = model(), b = model();
            auto mid = a;
            for (std::size_t i = 0; i < mid.q_mu.size(); ++i) {
                mid.q_mu[i] = 0.5 * (a.q_mu[i] + b.q_mu[i]);
                mid.q_k[i] = 0.5 * (a.q_k[i] + b.q_k[i]);
            }
            const double qa = penalized_loglik(a, basis, cat, pen), qb = penalized_loglik(b, basis, cat, pen);
            const double qm = penalized_loglik(mid, basis, cat, pen);
            const double gap = 0.5 * (qa + qb) - qm;  // <= 0 when concave
            worst = std::max(worst, gap);
            violations += gap > 1e-9 * std::max(1.0, std::abs(qm)) ? 1 : 0;
            ++checked;
        }
    }
    return {violations == 0 && checked == 1000,
            fmt("%.0f violations in %.0f pairs (largest excess %.2e)", violations, checked, worst)};
}

// ---------------------------------------------------------------- 4
Outcome residual_rescaling() {
    const auto t0 = std::chrono::steady_clock::now();
    const EtasParams truth{0.5, 0.025, 0.01, 1.1, 1.12};
    int passed = 0;
    for (int s = 0; s < 100; ++s) {
        const auto cat = simulate(truth, 400.0, 4000 + static_cast<std::uint64_t>(s), 1.0, 3.0);
        passed += residual_analysis(truth, cat).ks.p_value >= 0.01 ? 1 : 0;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {passed >= 95 && secs < 60, fmt("%.0f/100 seeds pass KS at 0.01 (need 95); %.1f s (limit 60)", passed, secs)};
}

// ---------------------------------------------------------------- 5
Outcome mle_recovery() {
    const auto t0 = std::chrono::steady_clock::now();
    const EtasParams truth{0.8, 0.025, 0.01, 1.1, 1.15};
    std::array<int, EtasParams::size> inside{};
    int runs = 0;
    double events = 0;
    for (int s = 0; s < 50; ++s) {
        const auto cat = simulate(truth, 700.0, 5000 + static_cast<std::uint64_t>(s), 1.0, 3.0);
        events += static_cast<double>(cat.size());
        const auto fit = fit_mle(cat);
        const auto v = fit.params.to_array(), t = truth.to_array();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const auto& se = fit.std_errors.values[i];
            inside[i] += se && std::abs(v[i] - t[i]) <= 3.0 * *se ? 1 : 0;
        }
        ++runs;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const int worst = *std::min_element(inside.begin(), inside.end());
    std::string per;
    for (std::size_t i = 0; i < inside.size(); ++i)
        per += std::string(i ? " " : "") + kParamNames[i] + "=" + std::to_string(inside[i]);
    return {worst >= 48 && secs < 300,
            fmt("mean N %.0f; within 3 SE out of 50: ", events / runs) + per + fmt(" (need 48 each); %.0f s (limit 300)", secs)};
}

// ---------------------------------------------------------------- 6
Outcome changepoint_power_level() {
    // Under no change the statistic is roughly chi-square with 5 df, so about
    // 92.5% of seeds keep dAIC > 0; catalogs are large to stay near that regime.
    const EtasParams truth{0.5, 0.04, 0.01, 1.0, 1.2};
    const double T = 600.0, t_change = 300.0;
    int detected = 0, quiet = 0;
    for (int s = 0; s < 30; ++s) {
        const NonstationaryTruth jump{truth, {{0, t_change, t_change, T}, {1, 1, 2.5, 2.5}}, PiecewiseLinear::constant(1)};
        const auto cat = simulate(jump, T, 6000 + static_cast<std::uint64_t>(s));
        detected += two_stage_fit(cat, t_change, 0.0).delta_aic < 0 ? 1 : 0;
    }
    for (int s = 0; s < 50; ++s) {
        const auto cat = simulate(truth, T, 6500 + static_cast<std::uint64_t>(s));
        quiet += two_stage_fit(cat, t_change, 0.0).delta_aic > 0 ? 1 : 0;
    }
    return {detected >= 27 && quiet >= 45,
            fmt("jump detected %.0f/30 (need 27); no-change kept %.0f/50 (need 45)", detected, quiet)};
}

// ---------------------------------------------------------------- 7
Outcome demo_roundtrip(const fs::path& demo) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto cat = read_catalog(demo.string());
    const double cp = 49.8;
    const auto ref = fit_mle(cat).params;
    const NsProblem problem(cat, Restriction::free, SmoothingDomain::ordinary, ref, cp);
    const auto omap = optimize_hyperparams(problem);
    std::size_t before = 0;
    for (const Event& e : cat.in_window()) before += e.time < cp ? 1 : 0;

    const NonstationaryTruth truth{ref, {omap.basis.knots, omap.map.q_mu}, {omap.basis.knots, omap.map.q_k}};
    std::size_t in_mu = 0, in_k = 0, knots = 0;
    std::string runs;
    for (std::uint64_t s = 0; s < 3; ++s) {
        SimConfig cfg;
        cfg.model = truth;
        cfg.window_start = cat.window_start;
        cfg.window_end = cat.window_end;
        cfg.b_value = 1.273;
        cfg.m_c = cat.threshold;
        cfg.seed = 7000 + s;
        RoundtripProtocol protocol;
        protocol.changepoint_event = before;
        const auto r = roundtrip_recover(cfg, protocol);
        if (r.empty) return {false, "roundtrip produced no fit"};
        in_mu += static_cast<std::size_t>(std::count(r.inside_mu.begin(), r.inside_mu.end(), true));
        in_k += static_cast<std::size_t>(std::count(r.inside_k.begin(), r.inside_k.end(), true));
        knots += r.times.size();
        runs += fmt(" [N=%.0f mu %.2f K0 %.2f]", static_cast<double>(r.catalog.size()), r.coverage_mu, r.coverage_k);
    }
    const double cov_mu = static_cast<double>(in_mu) / static_cast<double>(knots);
    const double cov_k = static_cast<double>(in_k) / static_cast<double>(knots);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {cov_mu >= 0.8 && cov_k >= 0.8 && secs < 900,
            fmt("truth = OMAP 3(a') of demo (N=%.0f, dABIC %.2f); change point after event %.0f; ",
                static_cast<double>(cat.size()), omap.delta_abic.value_or(NAN), static_cast<double>(before)) +
                fmt("inside 2 eps: mu %.3f, K0 %.3f (need 0.8) over 3 resimulations;", cov_mu, cov_k) + runs +
                fmt(" %.0f s (limit 900)", secs)};
}

// ---------------------------------------------------------------- 8
Outcome model_selection() {
    const auto t0 = std::chrono::steady_clock::now();
    const EtasParams ref{0.6, 0.02, 0.01, 1.0, 1.2};
    const double T = 300.0;
    int flat_ok = 0, planted_wins = 0;
    for (int s = 0; s < 20; ++s) {
        const auto cat = simulate(ref, T, 8000 + static_cast<std::uint64_t>(s));
        const NsProblem problem(cat, Restriction::free, SmoothingDomain::ordinary, ref);
        flat_ok += std::abs(*optimize_hyperparams(problem).delta_abic) <= 2.0 ? 1 : 0;
    }
    for (int s = 0; s < 20; ++s) {
        // smooth background swell and slowly rising productivity
        PiecewiseLinear qm, qk;
        for (int i = 0; i <= 30; ++i) {
            const double t = T * i / 30.0;
            qm.knots.push_back(t);
            qm.values.push_back(1.0 + 0.7 * std::sin(2 * std::numbers::pi * t / T));
            qk.knots.push_back(t);
            qk.values.push_back(0.6 + 0.8 * t / T);
        }
        const auto cat = simulate(NonstationaryTruth{ref, qm, qk}, T, 8500 + static_cast<std::uint64_t>(s));
        const NsProblem problem(cat, Restriction::free, SmoothingDomain::ordinary, ref);
        planted_wins += *optimize_hyperparams(problem).delta_abic < -2.0 ? 1 : 0;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {flat_ok >= 16 && planted_wins >= 18,
            fmt("model 3a: flat truth |dABIC|<=2 in %.0f/20 (need 16); planted variation dABIC<-2 in %.0f/20 (need 18); %.0f s",
                flat_ok, planted_wins, secs)};
}

// ---------------------------------------------------------------- 9
std::map<std::string, std::string> read_dir(const fs::path& dir) {
    std::map<std::string, std::string> out;
    if (!fs::exists(dir)) return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::ifstream in(e.path(), std::ios::binary);
        out[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    return out;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = std::string("\"") + ETAS_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
    const fs::path work = fs::path(ETAS_WORK_DIR) / "determinism";
    fs::remove_all(work);
    fs::create_directories(work);
    const fs::path cat = work / "run1-simulate" / "catalog.csv";
    const fs::path params = work / "run1-fit" / "fit.json";
    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "simulate --seed 31 --mu 0.6 --k0 0.02 --c 0.01 --alpha 1.0 --p 1.2 --q-mu 0:1.5,80:0.7 --end 80 "
                     "--b 1.273 --mc 2.5"},
        {"fit", "fit --catalog \"" + cat.string() + "\" --fix p=1.1"},
        {"changepoint", "changepoint --catalog \"" + cat.string() + "\" --t0 40 --q-penalty 0"},
        {"search", "changepoint --catalog \"" + cat.string() + "\" --search --candidates 20,30,40,50,60"},
        {"nsfit", "nsfit --catalog \"" + cat.string() + "\" --models 1a,3b_cp --changepoint 40 --grid 200"},
        {"residual", "residual --catalog \"" + cat.string() + "\" --params \"" + params.string() + "\""},
        {"simulate-ns", "simulate --seed 32 --from-bayesfit \"" + (work / "run1-nsfit" / "model-1a.json").string() + "\" "
                        "--b 1.273 --mc 2.5"},
    };
    int identical = 0;
    std::string bad;
    for (const auto& [name, args] : commands) {
        int codes[2];
        for (int run = 0; run < 2; ++run) {
            const fs::path out = work / ("run" + std::to_string(run + 1) + "-" + name);
            codes[run] = run_cli(args + " --out \"" + out.string() + "\"", work / (name + ".log"));
        }
        const auto a = read_dir(work / ("run1-" + name)), b = read_dir(work / ("run2-" + name));
        if (codes[0] == 0 && codes[1] == 0 && !a.empty() && a == b) ++identical;
        else bad += " " + name + "(exit " + std::to_string(codes[0]) + "/" + std::to_string(codes[1]) + ")";
    }
    return {identical == static_cast<int>(commands.size()),
            fmt("%.0f/%.0f commands byte-identical on rerun", identical, static_cast<double>(commands.size())) +
                (bad.empty() ? "" : "; differing:" + bad)};
}

// ---------------------------------------------------------------- 10
Outcome aic_arithmetic() {
    const double a = delta_aic_of(aic12_of(-118.3, 422.9, 0.0), 442.8);
    const double b = delta_aic_of(aic12_of(-95.4, 434.7, 0.0), 465.5);
    return {std::abs(a + 138.2) < 1e-9 && std::abs(b + 126.2) < 1e-9,
            fmt("(422.9 - 118.3) - 442.8 = %.10g; (434.7 - 95.4) - 465.5 = %.10g", a, b)};
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    const fs::path demo = fs::path(ETAS_SOURCE_DIR) / "data" / "demo_catalog.csv";
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"likelihood matches quadrature", likelihood_quadrature},
        {"analytic gradients", gradients},
        {"penalized log-likelihood concave", concavity},
        {"residual rescaling KS", residual_rescaling},
        {"MLE recovery", mle_recovery},
        {"change-point power and level", changepoint_power_level},
        {"demo roundtrip", [&] { return demo_roundtrip(demo); }},
        {"model selection sanity", model_selection},
        {"CLI determinism", determinism},
        {"delta AIC arithmetic", aic_arithmetic},
    };
    bool all = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && !only.count(id)) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
    }
    return all ? 0 : 1;
}

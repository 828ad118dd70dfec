// etas: command-line front end.
//
//   etas fit        --catalog FILE [--fix p=1.0]
//   etas changepoint --catalog FILE (--t0 T | --search) [--q-penalty Q] [--reference FILE]
//   etas nsfit      --catalog FILE [--models all|1a,3a'] [--changepoint T] [--reference FILE]
//   etas residual   --catalog FILE [--params FILE | --model FILE]
//   etas simulate   --seed N --end T (--params FILE | --mu .. --k0 ..) [--q-mu t:v,..] [--from-bayesfit FILE]
//
// Exit codes: 0 ok, 1 computation failed, 2 usage error.

#include "etas/etas.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using etas::io::json;
using etas::io::format_double;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- options

struct CatalogOptions {
    std::string catalog;
    std::optional<double> mz, start, end, history_start;

    void add(CLI::App* app, bool required = true) {
        auto* c = app->add_option("--catalog", catalog, "catalog CSV (time|datetime,magnitude)");
        if (required) c->required();
        app->add_option("--mz", mz, "threshold magnitude (default: catalog header or smallest magnitude)");
        app->add_option("--start", start, "window start S in days");
        app->add_option("--end", end, "window end T in days");
        app->add_option("--history-start", history_start, "earliest history event kept for triggering");
    }
};

struct Run {
    std::string out;
    std::string config;
    std::optional<std::uint64_t> seed;
};

struct FitArgs {
    CatalogOptions cat;
    std::vector<std::string> fix;
    std::vector<std::string> init;
};

struct ChangePointArgs {
    CatalogOptions cat;
    std::optional<double> t0;
    bool search{false};
    std::string candidates;
    double q_penalty{0.0};
    std::string reference;
    bool hard_reset{false};
    std::vector<std::string> fix;
};

struct NsFitArgs {
    CatalogOptions cat;
    std::string models{"all"};
    std::optional<double> changepoint;
    std::string reference;
    bool full_counts{false};
    double w_mu{1e-2}, w_k{1e-2};
    double changepoint_weight{1e-5};
    unsigned threads{0};
    int grid{1000};
};

struct ResidualArgs {
    CatalogOptions cat;
    std::string params;
    std::string model;
};

struct SimulateArgs {
    std::string params;
    std::string from_bayesfit;
    std::optional<double> mu, k0, c, alpha, p;
    std::string q_mu, q_k;
    double start{0.0};
    std::optional<double> end;
    double b{1.0};
    double mc{0.0};
    std::size_t max_events{100000};
};

// ---------------------------------------------------------------- helpers

std::string resolve_input(const std::string& path, const char* what) {
    if (path.empty()) return path;
    std::error_code ec;
    const fs::path p = fs::absolute(path, ec);
    if (ec || !fs::is_regular_file(p)) throw UsageError(std::string(what) + " '" + path + "' does not exist");
    return p.lexically_normal().string();
}

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

// --out is used as given; otherwise a timestamped directory under
// $ETAS_OUTPUT_DIR (default ./etas-out).
fs::path run_directory(const std::string& command, const std::string& out) {
    if (!out.empty()) return fs::absolute(out).lexically_normal();
    const char* env = std::getenv("ETAS_OUTPUT_DIR");
    const fs::path base = fs::absolute(env && *env ? env : "etas-out");
    const std::string stem = command + "-" + timestamp();
    fs::path dir = base / stem;
    for (int i = 1; fs::exists(dir); ++i) dir = base / (stem + "-" + std::to_string(i));
    return dir;
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) h = (h ^ c) * 1099511628211ULL;
    return h;
}

class Output {
public:
    explicit Output(fs::path dir) : dir_(std::move(dir)) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw UsageError("cannot create output directory '" + dir_.string() + "': " + ec.message());
    }

    void text(const std::string& name, const std::string& content) {
        std::ofstream f(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!f) etas::fail(etas::ErrorKind::io, "cannot write '" + (dir_ / name).string() + "'");
        f << content;
        char hash[17];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(content)));
        files_.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a64", hash}});
    }
    void write(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

    void manifest(const std::string& command, const json& settings, int status) {
        json m{{"command", command}, {"version", kVersion}, {"settings", settings}, {"files", files_}, {"status", status}};
        std::ofstream f(dir_ / "manifest.json", std::ios::binary | std::ios::trunc);
        f << m.dump(2) << '\n';
    }

    [[nodiscard]] const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    json files_ = json::array();
};

std::string fmt(double v) { return std::isfinite(v) ? format_double(v) : std::string("nan"); }

// key=value lines; keys are long option names of the subcommand.
std::vector<std::string> config_arguments(const std::string& path, CLI::App* sub) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot read config '" + path + "'");
    std::vector<std::string> out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto body = etas::io::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw UsageError(path + ":" + std::to_string(number) + ": expected key=value");
        const std::string key(etas::io::trim(body.substr(0, eq)));
        const std::string value(etas::io::trim(body.substr(eq + 1)));
        if (key == "config" || key == "help") throw UsageError(path + ": key '" + key + "' not allowed in a config");
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (!opt) throw UsageError(path + ":" + std::to_string(number) + ": unknown key '" + key + "'");
        if (opt->get_expected_max() == 0) {
            if (value == "true" || value == "1") out.push_back("--" + key);
            else if (value != "false" && value != "0")
                throw UsageError(path + ": flag '" + key + "' takes true or false");
        } else {
            out.push_back("--" + key);
            out.push_back(value);
        }
    }
    return out;
}

// Effective settings as given on the command line (and config), minus output location.
json settings_of(const CLI::App* sub) {
    json s = json::object();
    for (const CLI::Option* opt : sub->get_options()) {
        const std::string name = opt->get_single_name();
        if (opt->count() == 0 || name == "help" || name == "out" || name == "config") continue;
        const auto& r = opt->results();
        s[name] = r.size() == 1 ? json(r.front()) : json(r);
    }
    return s;
}

etas::Catalog load_catalog(const CatalogOptions& o) {
    std::vector<std::string> warnings;
    auto cat = etas::read_catalog(o.catalog, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
    if (o.mz || o.start || o.end || o.history_start) {
        const double s = o.start.value_or(cat.window_start);
        cat = etas::filter_catalog(cat, o.mz.value_or(cat.threshold), s, o.end.value_or(cat.window_end),
                                   o.history_start.value_or(std::min(s, cat.history_start)));
    }
    return cat;
}

std::size_t param_index(const std::string& name) {
    for (std::size_t i = 0; i < etas::EtasParams::size; ++i)
        if (name == etas::kParamNames[i]) return i;
    throw UsageError("unknown parameter '" + name + "' (mu, k0, c, alpha, p)");
}

// "p=1.0" fixes p at 1.0; a bare "p" fixes it at the starting value.
void apply_fixes(const std::vector<std::string>& specs, etas::EtasParams& init, etas::FixMask& mask) {
    auto v = init.to_array();
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        const auto i = param_index(s.substr(0, eq));
        mask[i] = true;
        if (eq != std::string::npos) {
            const auto x = etas::io::parse_double(s.substr(eq + 1));
            if (!x) throw UsageError("bad value in '" + s + "'");
            v[i] = *x;
        }
    }
    init = etas::EtasParams::from_array(v);
}

void apply_inits(const std::vector<std::string>& specs, etas::EtasParams& init) {
    auto v = init.to_array();
    for (const auto& s : specs) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--init expects name=value, got '" + s + "'");
        const auto x = etas::io::parse_double(s.substr(eq + 1));
        if (!x) throw UsageError("bad value in '" + s + "'");
        v[param_index(s.substr(0, eq))] = *x;
    }
    init = etas::EtasParams::from_array(v);
}

// "t:v,t:v,..." -> broken line
etas::PiecewiseLinear parse_factor(const std::string& text, const char* flag) {
    etas::PiecewiseLinear f;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.find(':');
        const auto t = colon == std::string::npos ? std::nullopt : etas::io::parse_double(item.substr(0, colon));
        const auto v = colon == std::string::npos ? std::nullopt : etas::io::parse_double(item.substr(colon + 1));
        if (!t || !v) throw UsageError(std::string(flag) + ": expected t:v pairs, got '" + item + "'");
        f.knots.push_back(*t);
        f.values.push_back(*v);
    }
    try {
        f.validate();
    } catch (const etas::Error& e) {
        throw UsageError(std::string(flag) + ": " + e.what());
    }
    return f;
}

std::vector<double> parse_list(const std::string& text, const char* flag) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = etas::io::parse_double(item);
        if (!v) throw UsageError(std::string(flag) + ": bad number '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

std::string cumulative_svg(const std::string& title, const std::vector<etas::io::Series>& series,
                           std::vector<double> marks = {}) {
    etas::io::Chart c;
    c.title = title;
    c.x_label = "time (days)";
    c.y_label = "cumulative number";
    c.series = series;
    c.vertical_marks = std::move(marks);
    return etas::io::render_svg(c);
}

std::vector<double> observed_counts(const std::vector<etas::Event>& events) {
    std::vector<double> n(events.size());
    for (std::size_t i = 0; i < n.size(); ++i) n[i] = static_cast<double>(i + 1);
    return n;
}

// ---------------------------------------------------------------- commands

json run_fit(const FitArgs& a, Output& out) {
    const auto cat = load_catalog(a.cat);
    auto init = etas::default_init(cat);
    etas::FixMask mask{};
    apply_inits(a.init, init);
    apply_fixes(a.fix, init, mask);
    const auto fit = etas::fit_mle(cat, init, mask);
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';

    json j = etas::io::to_json(fit);
    j["catalog"] = {{"events", cat.size()}, {"window_start", cat.window_start}, {"window_end", cat.window_end},
                    {"threshold", cat.threshold}};
    out.write("fit.json", j);

    const auto events = cat.in_window();
    std::vector<double> t, obs = observed_counts({events.begin(), events.end()}), model;
    std::string csv = "time,observed,expected\n";
    for (std::size_t i = 0; i < events.size(); ++i) {
        t.push_back(events[i].time);
        model.push_back(etas::cumulative_intensity(fit.params, cat, events[i].time));
        csv += fmt(t[i]) + "," + std::to_string(i + 1) + "," + fmt(model[i]) + "\n";
    }
    out.text("cumulative.csv", csv);
    out.text("cumulative.svg", cumulative_svg("observed vs ETAS cumulative curve",
                                              {{"observed", t, obs, etas::io::SeriesStyle::step, "#000000"},
                                               {"ETAS", t, model, etas::io::SeriesStyle::line, "#d62728"}}));
    std::cout << "loglik " << fmt(fit.loglik) << "  aic " << fmt(fit.aic) << "  converged "
              << (fit.converged ? "yes" : "no") << '\n';
    return j;
}

json run_changepoint(const ChangePointArgs& a, Output& out) {
    if (a.search == a.t0.has_value()) throw UsageError("give exactly one of --t0 or --search");
    const auto cat = load_catalog(a.cat);
    etas::ChangePointOptions o;
    o.hard_reset = a.hard_reset;
    if (!a.reference.empty()) o.reference = etas::io::params_from_json(etas::io::read_json(a.reference));
    if (!a.fix.empty()) {
        auto init = o.reference.value_or(etas::default_init(cat));
        apply_fixes(a.fix, init, o.fixed);
        o.init = init;
    }

    etas::ChangePointResult r;
    json j;
    if (a.search) {
        const auto candidates = a.candidates.empty() ? etas::default_candidates(cat) : parse_list(a.candidates, "--candidates");
        const auto s = etas::search_changepoint(cat, candidates, a.q_penalty, o);
        r = s.best;
        j = etas::io::to_json(s);
        std::string csv = "t0,aic_sum\n";
        for (const auto& c : s.scores) csv += fmt(c.t0) + "," + fmt(c.aic_sum) + "\n";
        out.text("scores.csv", csv);
    } else {
        r = etas::two_stage_fit(cat, *a.t0, a.q_penalty, o);
        j = etas::io::to_json(r);
    }
    out.write("changepoint.json", j);

    // Before-period model extrapolated forward; after-period model anchored at N(t0).
    const auto events = cat.in_window();
    double n_t0 = 0;
    for (const auto& e : events) n_t0 += e.time < r.t0 ? 1 : 0;
    const double after_t0 = etas::cumulative_intensity(r.fit_after.params, cat, r.t0);
    std::vector<double> t, obs = observed_counts({events.begin(), events.end()}), whole, before, after_t, after;
    std::string csv = "time,observed,whole,before,after\n";
    for (std::size_t i = 0; i < events.size(); ++i) {
        const double ti = events[i].time;
        t.push_back(ti);
        whole.push_back(etas::cumulative_intensity(r.fit_whole.params, cat, ti));
        before.push_back(etas::cumulative_intensity(r.fit_before.params, cat, ti));
        std::string a_col;
        if (ti >= r.t0) {
            after_t.push_back(ti);
            after.push_back(n_t0 + etas::cumulative_intensity(r.fit_after.params, cat, ti) - after_t0);
            a_col = fmt(after.back());
        }
        csv += fmt(ti) + "," + std::to_string(i + 1) + "," + fmt(whole.back()) + "," + fmt(before.back()) + "," +
               a_col + "\n";
    }
    out.text("curves.csv", csv);
    out.text("curves.svg",
             cumulative_svg("two-stage fit, t0 = " + fmt(r.t0),
                            {{"observed", t, obs, etas::io::SeriesStyle::step, "#000000"},
                             {"whole period", t, whole, etas::io::SeriesStyle::line, "#7f7f7f"},
                             {"before model", t, before, etas::io::SeriesStyle::dashed, "#1f77b4"},
                             {"after model", after_t, after, etas::io::SeriesStyle::line, "#d62728"}},
                            {r.t0}));
    std::cout << "t0 " << fmt(r.t0) << "  aic0 " << fmt(r.fit_whole.aic) << "  aic12 " << fmt(r.aic12)
              << "  delta_aic " << fmt(r.delta_aic) << '\n';
    return j;
}

struct NsOutcome {
    std::optional<etas::BayesFit> fit;
    std::string error;
};

int run_nsfit(const NsFitArgs& a, Output& out) {
    const auto models = etas::parse_model_list(a.models);
    const bool primed = std::any_of(models.begin(), models.end(), [](const auto& m) { return m.changepoint; });
    if (primed && !a.changepoint) throw UsageError("primed models need --changepoint");
    const auto cat = load_catalog(a.cat);

    etas::EtasParams ref;
    if (!a.reference.empty()) {
        ref = etas::io::params_from_json(etas::io::read_json(a.reference));
    } else {
        const auto fit = etas::fit_mle(cat);
        ref = fit.params;
        out.write("reference.json", etas::io::to_json(fit));
    }

    etas::BayesOptions opt;
    opt.full_counts = a.full_counts;
    opt.changepoint_weight = a.changepoint_weight;
    etas::Hyperparams init;
    init.w_mu = a.w_mu;
    init.w_k = a.w_k;

    std::vector<NsOutcome> results(models.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i; (i = next++) < models.size();) {
            const auto& m = models[i];
            try {
                const etas::NsProblem problem(cat, m.restriction, m.domain, ref,
                                              m.changepoint ? a.changepoint : std::nullopt);
                results[i].fit = etas::optimize_hyperparams(problem, init, opt);
            } catch (const etas::Error& e) {
                results[i].error = e.what();
            }
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n = std::min<unsigned>(a.threads ? a.threads : hw, static_cast<unsigned>(models.size()));
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < n; ++k) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<etas::ScoreRow> rows;
    bool failed = false;
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto name = etas::model_name(models[i]);
        const auto stem = etas::model_stem(models[i]);
        if (!results[i].fit) {
            failed = true;
            std::cerr << "model " << name << ": " << results[i].error << '\n';
            out.write("model-" + stem + ".json", {{"model", name}, {"error", results[i].error}});
            rows.push_back({name, std::nan(""), std::nan("")});
            continue;
        }
        const auto& fit = *results[i].fit;
        out.write("model-" + stem + ".json",
                  etas::io::bayes_report(models[i], fit, "anomaly-" + stem + ".json", "trace-" + stem + ".csv"));
        out.write("anomaly-" + stem + ".json", etas::io::to_json(fit.map, fit.basis));

        const auto eb = etas::error_bounds(fit);
        std::vector<double> mu, mu_lo, mu_hi, k0, k0_lo, k0_hi;
        std::string trace = "time,q_mu,q_k,mu,k0,eps_mu,eps_k\n";
        for (std::size_t l = 0; l < fit.basis.size(); ++l) {
            const double qm = fit.map.q_mu[l], qk = fit.map.q_k[l];
            trace += fmt(fit.basis.knots[l]) + "," + fmt(qm) + "," + fmt(qk) + "," + fmt(ref.mu * qm) + "," +
                     fmt(ref.k0 * qk) + "," + fmt(eb.eps_mu[l]) + "," + fmt(eb.eps_k[l]) + "\n";
            mu.push_back(ref.mu * qm);
            mu_lo.push_back(ref.mu * (qm - 2 * eb.eps_mu[l]));
            mu_hi.push_back(ref.mu * (qm + 2 * eb.eps_mu[l]));
            k0.push_back(ref.k0 * qk);
            k0_lo.push_back(ref.k0 * (qk - 2 * eb.eps_k[l]));
            k0_hi.push_back(ref.k0 * (qk + 2 * eb.eps_k[l]));
        }
        out.text("trace-" + stem + ".csv", trace);

        std::string lam = "time,lambda\n";
        std::vector<double> gt, gl;
        for (int g = 0; g <= a.grid; ++g) {
            const double t = cat.window_start + (cat.window_end - cat.window_start) * g / a.grid;
            gt.push_back(t);
            gl.push_back(etas::ns_intensity(fit.map, fit.basis, cat, t));
            lam += fmt(t) + "," + fmt(gl.back()) + "\n";
        }
        out.text("intensity-" + stem + ".csv", lam);

        etas::io::Chart c;
        c.title = "model " + name + ": mu(t), K0(t) with 2 eps bands";
        c.x_label = "time (days)";
        c.y_label = "rate";
        c.log_y = true;
        const auto& x = fit.basis.knots;
        c.series = {{"mu(t)", x, mu, etas::io::SeriesStyle::line, "#1f77b4"},
                    {"", x, mu_lo, etas::io::SeriesStyle::dashed, "#1f77b4"},
                    {"", x, mu_hi, etas::io::SeriesStyle::dashed, "#1f77b4"},
                    {"K0(t)", x, k0, etas::io::SeriesStyle::line, "#d62728"},
                    {"", x, k0_lo, etas::io::SeriesStyle::dashed, "#d62728"},
                    {"", x, k0_hi, etas::io::SeriesStyle::dashed, "#d62728"}};
        if (fit.map.changepoint) c.vertical_marks.push_back(*fit.map.changepoint);
        out.text("plot-" + stem + ".svg", etas::io::render_svg(c));
        etas::io::Chart li;
        li.title = "model " + name + ": intensity";
        li.x_label = "time (days)";
        li.y_label = "lambda(t)";
        li.log_y = true;
        li.series = {{"lambda(t)", gt, gl, etas::io::SeriesStyle::line, "#000000"}};
        out.text("intensity-" + stem + ".svg", etas::io::render_svg(li));

        rows.push_back({name, fit.abic, fit.delta_abic.value_or(std::nan(""))});
    }

    const auto board = etas::make_scoreboard(rows);
    out.write("scoreboard.json", etas::io::to_json(board));
    std::string csv = "model,abic,delta_abic,relative_probability,winner\n";
    std::cout << "model   ABIC        dABIC     rel.prob\n";
    for (const auto& r : board.rows) {
        csv += r.name + "," + fmt(r.abic) + "," + fmt(r.delta_abic) + "," + fmt(r.relative_probability) + "," +
               (r.winner ? "1" : "0") + "\n";
        char line[128];
        std::snprintf(line, sizeof line, "%-6s %10.2f %9.2f %10.3g%s\n", r.name.c_str(), r.abic, r.delta_abic,
                      r.relative_probability, r.winner ? "  *" : "");
        std::cout << line;
    }
    out.text("scoreboard.csv", csv);
    return failed ? 1 : 0;
}

json run_residual(const ResidualArgs& a, Output& out) {
    if (!a.params.empty() && !a.model.empty()) throw UsageError("give at most one of --params and --model");
    const auto cat = load_catalog(a.cat);
    etas::ResidualSequence seq;
    json source;
    if (!a.model.empty()) {
        auto doc = etas::io::read_json(a.model);
        // A model report points at its anomaly file.
        if (doc.contains("map_ref") && doc.at("map_ref").is_string())
            doc = etas::io::read_json((fs::path(a.model).parent_path() / doc.at("map_ref").get<std::string>()).string());
        const auto stored = etas::io::anomaly_from_json(doc);
        if (cat.in_window().size() + 2 != stored.basis.size())
            etas::fail(etas::ErrorKind::mismatched_models,
                       "model has " + std::to_string(stored.basis.size()) + " knots but the catalog has " +
                           std::to_string(cat.in_window().size()) + " events (expected knots = events + 2)");
        seq = etas::ns_transform_times(stored.model, stored.basis, cat);
        source = {{"type", "nonstationary"}, {"file", fs::path(a.model).filename().string()}};
    } else {
        etas::EtasParams p;
        if (!a.params.empty()) {
            p = etas::io::params_from_json(etas::io::read_json(a.params));
            source = {{"type", "stationary"}, {"file", fs::path(a.params).filename().string()}};
        } else {
            const auto fit = etas::fit_mle(cat);
            p = fit.params;
            source = {{"type", "stationary"}, {"fitted", true}};
        }
        source["params"] = etas::io::to_json(p);
        seq = etas::transform_times(p, cat);
    }
    etas::ResidualReport report{seq, etas::ks_test_exp1(etas::transformed_gaps(seq))};
    json j = etas::io::to_json(report);
    j["model"] = source;
    out.write("residual.json", j);

    const auto events = cat.in_window();
    std::string csv = "t_i,tau_i,i\n";
    std::vector<double> idx, diag_x{0.0, seq.total};
    for (std::size_t i = 0; i < seq.taus.size(); ++i) {
        csv += fmt(events[i].time) + "," + fmt(seq.taus[i]) + "," + std::to_string(i + 1) + "\n";
        idx.push_back(static_cast<double>(i + 1));
    }
    out.text("residual.csv", csv);
    etas::io::Chart c;
    c.title = "cumulative number vs transformed time";
    c.x_label = "transformed time";
    c.y_label = "cumulative number";
    c.series = {{"observed", seq.taus, idx, etas::io::SeriesStyle::step, "#000000"},
                {"unit rate", diag_x, diag_x, etas::io::SeriesStyle::dashed, "#d62728"}};
    out.text("residual.svg", etas::io::render_svg(c));
    std::cout << "KS D " << fmt(report.ks.statistic) << "  p " << fmt(report.ks.p_value) << "  n " << report.ks.n
              << '\n';
    return j;
}

json run_simulate(const SimulateArgs& a, std::uint64_t seed, Output& out) {
    const bool inline_params = a.mu || a.k0 || a.c || a.alpha || a.p;
    const int sources = (a.params.empty() ? 0 : 1) + (a.from_bayesfit.empty() ? 0 : 1) + (inline_params ? 1 : 0);
    if (sources != 1) throw UsageError("give exactly one of --params, --from-bayesfit, or --mu/--k0/--c/--alpha/--p");
    if (!a.from_bayesfit.empty() && (!a.q_mu.empty() || !a.q_k.empty()))
        throw UsageError("--q-mu/--q-k cannot be combined with --from-bayesfit");

    etas::SimConfig cfg;
    cfg.window_start = a.start;
    cfg.b_value = a.b;
    cfg.m_c = a.mc;
    cfg.seed = seed;
    cfg.max_events = a.max_events;
    if (!a.from_bayesfit.empty()) {
        auto doc = etas::io::read_json(a.from_bayesfit);
        if (doc.contains("map_ref") && doc.at("map_ref").is_string())
            doc = etas::io::read_json(
                (fs::path(a.from_bayesfit).parent_path() / doc.at("map_ref").get<std::string>()).string());
        const auto s = etas::io::anomaly_from_json(doc);
        cfg.model = etas::NonstationaryTruth{s.model.reference, {s.basis.knots, s.model.q_mu}, {s.basis.knots, s.model.q_k}};
        cfg.window_start = s.basis.knots.front();
        cfg.window_end = a.end.value_or(s.basis.knots.back());
    } else {
        if (!a.end) throw UsageError("--end is required");
        cfg.window_end = *a.end;
        etas::EtasParams p;
        if (!a.params.empty()) {
            p = etas::io::params_from_json(etas::io::read_json(a.params));
        } else {
            if (!(a.mu && a.k0 && a.c && a.alpha && a.p)) throw UsageError("inline parameters need all of --mu --k0 --c --alpha --p");
            p = {*a.mu, *a.k0, *a.c, *a.alpha, *a.p};
        }
        if (a.q_mu.empty() && a.q_k.empty()) {
            cfg.model = p;
        } else {
            cfg.model = etas::NonstationaryTruth{
                p, a.q_mu.empty() ? etas::PiecewiseLinear::constant(1.0) : parse_factor(a.q_mu, "--q-mu"),
                a.q_k.empty() ? etas::PiecewiseLinear::constant(1.0) : parse_factor(a.q_k, "--q-k")};
        }
    }
    const auto r = etas::simulate_thinning(cfg);
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    out.text("catalog.csv", etas::serialize_catalog(r.catalog));
    const auto j = etas::io::sidecar(cfg, r);
    out.write("catalog.json", j);
    std::cout << r.catalog.size() << " events" << (r.truncated ? " (truncated)" : "") << '\n';
    return j;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ETAS point-process fitting, change-point analysis, nonstationary inversion and simulation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Run run;
    auto common = [&](CLI::App* sub) {
        sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
        sub->add_option("--out", run.out, "output directory (default: timestamped under $ETAS_OUTPUT_DIR or ./etas-out)");
        sub->add_option("--config", run.config, "key=value file; keys are long option names");
        sub->add_option("--seed", run.seed, "random seed");
    };

    FitArgs fit;
    auto* fit_cmd = app.add_subcommand("fit", "maximum-likelihood ETAS fit");
    common(fit_cmd);
    fit.cat.add(fit_cmd);
    fit_cmd->add_option("--fix", fit.fix, "hold a parameter: name=value or name (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
    fit_cmd->add_option("--init", fit.init, "starting value name=value (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    ChangePointArgs cp;
    auto* cp_cmd = app.add_subcommand("changepoint", "two-stage fit and AIC change-point test");
    common(cp_cmd);
    cp.cat.add(cp_cmd);
    cp_cmd->add_option("--t0", cp.t0, "change point");
    cp_cmd->add_flag("--search", cp.search, "search over candidate change points");
    cp_cmd->add_option("--candidates", cp.candidates, "comma-separated candidates (default: event times)");
    cp_cmd->add_option("--q-penalty", cp.q_penalty, "extra AIC penalty q for a searched change point");
    cp_cmd->add_option("--reference", cp.reference, "reference parameters (JSON); fixes c, alpha, p");
    cp_cmd->add_flag("--hard-reset", cp.hard_reset, "drop pre-t0 events from the after-period history");
    cp_cmd->add_option("--fix", cp.fix, "hold a parameter: name=value or name (repeatable)")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

    NsFitArgs ns;
    auto* ns_cmd = app.add_subcommand("nsfit", "nonstationary ETAS with ABIC model selection");
    common(ns_cmd);
    ns.cat.add(ns_cmd);
    ns_cmd->add_option("--models", ns.models, "all, or comma list such as 1a,2b',3a_cp");
    ns_cmd->add_option("--changepoint", ns.changepoint, "change point for primed models");
    ns_cmd->add_option("--reference", ns.reference, "reference parameters (JSON); default: MLE of the catalog");
    ns_cmd->add_flag("--full-hyper-counts", ns.full_counts, "count 4/4/8 hyperparameters in ABIC");
    ns_cmd->add_option("--w-mu", ns.w_mu, "initial weight for q_mu");
    ns_cmd->add_option("--w-k", ns.w_k, "initial weight for q_K");
    ns_cmd->add_option("--changepoint-weight", ns.changepoint_weight, "weight on the change-point interval");
    ns_cmd->add_option("--threads", ns.threads, "worker threads (default: hardware)");
    ns_cmd->add_option("--grid", ns.grid, "intensity grid points")->check(CLI::PositiveNumber);

    ResidualArgs res;
    auto* res_cmd = app.add_subcommand("residual", "time-rescaling residuals and KS test");
    common(res_cmd);
    res.cat.add(res_cmd);
    res_cmd->add_option("--params", res.params, "ETAS parameters (JSON); default: MLE of the catalog");
    res_cmd->add_option("--model", res.model, "nonstationary model (anomaly JSON or nsfit model report)");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "simulate a catalog by thinning");
    common(sim_cmd);
    sim_cmd->add_option("--params", sim.params, "ETAS parameters (JSON)");
    sim_cmd->add_option("--reference", sim.params, "alias of --params");
    sim_cmd->add_option("--from-bayesfit", sim.from_bayesfit, "replay a fitted nonstationary model");
    sim_cmd->add_option("--mu", sim.mu);
    sim_cmd->add_option("--k0", sim.k0);
    sim_cmd->add_option("--c", sim.c);
    sim_cmd->add_option("--alpha", sim.alpha);
    sim_cmd->add_option("--p", sim.p);
    sim_cmd->add_option("--q-mu", sim.q_mu, "background factor as t:v,t:v,...");
    sim_cmd->add_option("--q-k", sim.q_k, "productivity factor as t:v,t:v,...");
    sim_cmd->add_option("--start", sim.start, "window start");
    sim_cmd->add_option("--end", sim.end, "window end");
    sim_cmd->add_option("--b", sim.b, "Gutenberg-Richter b-value");
    sim_cmd->add_option("--mc", sim.mc, "completeness magnitude");
    sim_cmd->add_option("--max-events", sim.max_events, "stop after this many events");

    // Config values go in front of the real arguments so the command line wins.
    std::vector<std::string> args;
    for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);  // CLI11 takes them reversed
    try {
        std::string cmd_name;
        std::string config;
        for (int i = 1; i < argc; ++i) {
            const std::string s = argv[i];
            if (cmd_name.empty() && app.get_subcommand_no_throw(s)) cmd_name = s;
            if (s == "--config" && i + 1 < argc) config = argv[i + 1];
            else if (s.rfind("--config=", 0) == 0) config = s.substr(9);
        }
        if (!config.empty() && !cmd_name.empty()) {
            const auto extra = config_arguments(config, app.get_subcommand(cmd_name));
            // reversed order: the last element is parsed first
            std::vector<std::string> merged(args.begin(), args.end());
            const auto pos = std::find(merged.begin(), merged.end(), cmd_name);
            merged.insert(pos, extra.rbegin(), extra.rend());
            args = std::move(merged);
        }
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();
    int status = 0;
    try {
        // Resolve every path before any computation.
        for (auto* c : {&fit.cat, &cp.cat, &ns.cat, &res.cat}) c->catalog = resolve_input(c->catalog, "catalog");
        cp.reference = resolve_input(cp.reference, "reference");
        ns.reference = resolve_input(ns.reference, "reference");
        res.params = resolve_input(res.params, "params");
        res.model = resolve_input(res.model, "model");
        sim.params = resolve_input(sim.params, "params");
        sim.from_bayesfit = resolve_input(sim.from_bayesfit, "model");
        if (command == "simulate" && !run.seed) throw UsageError("simulate needs --seed");
        if (command == "changepoint" && cp.search == cp.t0.has_value())
            throw UsageError("give exactly one of --t0 or --search");
        if (command == "nsfit") (void)etas::parse_model_list(ns.models);

        Output out(run_directory(command, run.out));
        const json settings = settings_of(sub);
        try {
            if (command == "fit") run_fit(fit, out);
            else if (command == "changepoint") run_changepoint(cp, out);
            else if (command == "nsfit") status = run_nsfit(ns, out);
            else if (command == "residual") run_residual(res, out);
            else if (command == "simulate") run_simulate(sim, *run.seed, out);
        } catch (const etas::Error& e) {
            std::cerr << "error (" << etas::to_string(e.kind()) << "): " << e.what() << '\n';
            status = 1;
        }
        out.manifest(command, settings, status);
        std::cerr << "output: " << out.dir().string() << '\n';
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const etas::Error& e) {
        // e.g. an unparseable model list
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    }
    return status;
}

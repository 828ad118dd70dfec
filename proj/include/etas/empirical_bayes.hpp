#pragma once

#include "etas/error.hpp"
#include "etas/mle.hpp"
#include "etas/nonstationary.hpp"
#include "etas/optim/nelder_mead.hpp"
#include "etas/optim/penalized_newton.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace etas {

struct Hyperparams {
    double w_mu{1e-2};
    double w_k{1e-2};
    double q_mu_boundary{1.0};
    double q_k_boundary{1.0};

    void validate() const {
        require(std::isfinite(w_mu) && w_mu > 0.0 && std::isfinite(w_k) && w_k > 0.0,
                "hyperparameter weights must be finite and positive");
        require(std::isfinite(q_mu_boundary) && q_mu_boundary >= 0.0 && std::isfinite(q_k_boundary) &&
                    q_k_boundary >= 0.0,
                "boundary coefficients must be finite and nonnegative");
    }
    [[nodiscard]] PenaltyConfig penalty(double changepoint_weight = 1e-5) const {
        return {w_mu, w_k, changepoint_weight};
    }
};

/// Hyperparameter count entering ABIC. Active-only by default (w_mu and the
/// mu boundary, plus w_K and the K boundary when q_K is free); full_counts
/// gives 4 for models 1 and 2 and 8 for model 3.
[[nodiscard]] inline int hyperparameter_count(Restriction r, bool full_counts = false) {
    if (full_counts) return r == Restriction::free ? 8 : 4;
    return r == Restriction::free ? 4 : 2;
}

struct LaplaceTerms {
    double log_marginal{std::numeric_limits<double>::quiet_NaN()};
    double log_det_h{std::numeric_limits<double>::quiet_NaN()};
    std::vector<double> log_det_prior;  // log det(2 M_cc) per block
    bool ok{false};
    std::string message;
};

/// Laplace approximation of log of the integral of L(x) pi(x | prior) over x,
/// with pi the normalized Gaussian prior exp(-q'Mq) of each block:
///   Q(x*) + sum_b 0.5 log det(2 M_cc) - 0.5 log det H,
/// H = information at the maximizer. The 2 pi factors cancel.
[[nodiscard]] inline LaplaceTerms laplace_log_marginal(const optim::PenalizedResult& map,
                                                       std::span<const optim::PriorBlock> blocks) {
    LaplaceTerms out;
    if (!std::isfinite(map.value)) {
        out.message = "penalized log-likelihood is not finite at the MAP";
        return out;
    }
    double prior = 0.0;
    for (const auto& b : blocks) {
        const double ld = b.log_det_precision();
        out.log_det_prior.push_back(ld);
        if (!std::isfinite(ld)) {
            out.message = "prior precision is not positive definite";
            return out;
        }
        prior += 0.5 * ld;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(map.information);
    if (llt.info() != Eigen::Success) {
        out.message = "Hessian is not positive definite at the MAP";
        return out;
    }
    out.log_det_h = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.log_marginal = map.value + prior - 0.5 * out.log_det_h;
    out.ok = true;
    return out;
}

struct BayesFit {
    AnomalyModel map;
    SplineBasis basis;
    Hyperparams hyper;
    double log_marginal{std::numeric_limits<double>::quiet_NaN()};
    double abic{std::numeric_limits<double>::quiet_NaN()};
    std::optional<double> delta_abic;
    std::optional<double> abic0;
    int hyper_count{0};
    double loglik{std::numeric_limits<double>::quiet_NaN()};
    double penalized{std::numeric_limits<double>::quiet_NaN()};
    double log_det_h{std::numeric_limits<double>::quiet_NaN()};
    double hessian_log_det_mu{std::numeric_limits<double>::quiet_NaN()};
    double hessian_log_det_k{std::numeric_limits<double>::quiet_NaN()};
    std::vector<double> log_det_prior;
    Eigen::MatrixXd covariance;  // coefficient covariance, see boundary_variance
    bool converged{false};
    int evaluations{0};
    std::vector<std::string> diagnostics;
};

[[nodiscard]] inline double abic_of(const BayesFit& fit) { return fit.abic; }

/// ABIC - ABIC0 against a heavy-weight baseline of the same configuration.
[[nodiscard]] inline double delta_abic(const BayesFit& fit, const BayesFit& baseline) {
    if (fit.map.restriction != baseline.map.restriction || fit.map.domain != baseline.map.domain)
        fail(ErrorKind::mismatched_models, std::string("delta ABIC needs the same restriction and domain, got ") +
                                               to_string(fit.map.restriction) + "/" + to_string(fit.map.domain) +
                                               " vs " + to_string(baseline.map.restriction) + "/" +
                                               to_string(baseline.map.domain));
    if (fit.hyper_count != baseline.hyper_count || fit.basis.knots != baseline.basis.knots ||
        fit.map.changepoint != baseline.map.changepoint)
        fail(ErrorKind::mismatched_models, "delta ABIC baseline differs in catalog, change point or count");
    return fit.abic - baseline.abic;
}

namespace detail {

inline double block_log_det(const Eigen::MatrixXd& h, Eigen::Index offset, Eigen::Index n) {
    const Eigen::LLT<Eigen::MatrixXd> llt(h.block(offset, offset, n, n));
    if (llt.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace detail

struct BayesOptions {
    bool full_counts{false};
    double changepoint_weight{1e-5};
    double baseline_weight{1e6};
    optim::PenalizedOptions map{};
    optim::NelderMeadOptions simplex{};
    // Search box in log10(w).
    double log10_w_min{-6.0};
    double log10_w_max{12.0};
    // Initial simplex: +6 decades on each weight, +0.5 on each boundary.
    double log10_w_step{6.0};
    double boundary_step{0.5};
    // Permutation of the initial simplex vertices (testing seam).
    std::vector<std::size_t> vertex_order;
    // Error covariance over all coefficients, boundary included (flat prior on
    // the boundary level). Off: boundary coefficients carry no variance.
    bool boundary_variance{true};
};

/// Information (minus the Hessian of the penalized log-likelihood) over all
/// coefficients of each free factor, boundary knots included:
/// size K for fix_qk and tied, 2K for free.
[[nodiscard]] inline Eigen::MatrixXd full_information(const NsProblem& problem, const AnomalyModel& model,
                                                      const PenaltyConfig& pen) {
    NsDesign::Derivatives d;
    const double v = problem.design.loglik(detail::to_eigen(model.q_mu), detail::to_eigen(model.q_k), &d, true);
    require(std::isfinite(v), "information requested where the likelihood is not finite");
    const auto K = static_cast<Eigen::Index>(problem.basis.size());
    const auto blocks = problem.prior_blocks(pen, model.q_mu.back(), model.q_k.back());
    Eigen::MatrixXd h;
    switch (problem.restriction) {
        case Restriction::fix_qk:
            h = Eigen::MatrixXd((-d.h_mumu).asDiagonal());
            break;
        case Restriction::tied:
            h = -(d.h_kk + d.h_muk + d.h_muk.transpose());
            h.diagonal() -= d.h_mumu;
            break;
        case Restriction::free:
            h = Eigen::MatrixXd::Zero(2 * K, 2 * K);
            h.topLeftCorner(K, K).diagonal() = -d.h_mumu;
            h.topRightCorner(K, K) = -d.h_muk;
            h.bottomLeftCorner(K, K) = -d.h_muk.transpose();
            h.bottomRightCorner(K, K) = -d.h_kk;
            break;
    }
    for (std::size_t b = 0; b < blocks.size(); ++b)
        h.block(static_cast<Eigen::Index>(b) * K, static_cast<Eigen::Index>(b) * K, K, K) += 2.0 * blocks[b].matrix();
    return h;
}

/// Laplace log marginal likelihood at fixed hyperparameters. Throws a
/// laplace_failure error when H is not positive definite at the MAP.
[[nodiscard]] inline BayesFit log_marginal(const NsProblem& problem, const Hyperparams& hyper,
                                           const BayesOptions& options = {}, bool with_covariance = true,
                                           Eigen::VectorXd* warm = nullptr) {
    hyper.validate();
    const auto pen = hyper.penalty(options.changepoint_weight);
    const double bk = problem.restriction == Restriction::tied ? hyper.q_mu_boundary : hyper.q_k_boundary;
    const auto est = map_estimate(problem, pen, hyper.q_mu_boundary, bk, options.map, warm);
    if (warm && est.raw.converged) *warm = est.raw.x;
    const auto blocks = problem.prior_blocks(pen, hyper.q_mu_boundary, bk);
    const auto terms = laplace_log_marginal(est.raw, std::span<const optim::PriorBlock>(blocks));
    if (!terms.ok) fail(ErrorKind::laplace_failure, terms.message);

    BayesFit fit;
    fit.map = est.model;
    fit.basis = problem.basis;
    fit.hyper = hyper;
    if (problem.restriction != Restriction::free) fit.hyper.q_k_boundary = bk;
    if (problem.restriction == Restriction::tied) fit.hyper.w_k = hyper.w_mu;
    fit.log_marginal = terms.log_marginal;
    fit.hyper_count = hyperparameter_count(problem.restriction, options.full_counts);
    fit.abic = -2.0 * fit.log_marginal + 2.0 * fit.hyper_count;
    fit.loglik = est.loglik;
    fit.penalized = est.penalized;
    fit.log_det_h = terms.log_det_h;
    fit.log_det_prior = terms.log_det_prior;
    const Eigen::Index m = static_cast<Eigen::Index>(problem.basis.size()) - 1;
    fit.hessian_log_det_mu = detail::block_log_det(est.raw.information, 0, m);
    if (problem.restriction == Restriction::free)
        fit.hessian_log_det_k = detail::block_log_det(est.raw.information, m, m);
    if (with_covariance) {
        auto invert = [](const Eigen::MatrixXd& h) -> std::optional<Eigen::MatrixXd> {
            const Eigen::LLT<Eigen::MatrixXd> llt(h);
            if (llt.info() != Eigen::Success) return std::nullopt;
            return llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
        };
        std::optional<Eigen::MatrixXd> cov;
        if (options.boundary_variance) {
            cov = invert(full_information(problem, est.model, pen));
            if (!cov) fit.diagnostics.push_back("full information not positive definite; boundary coefficients get no variance");
        }
        if (!cov) cov = invert(est.raw.information);
        fit.covariance = std::move(*cov);
    }
    fit.converged = est.raw.converged;
    fit.evaluations = 1;
    fit.diagnostics = est.diagnostics;
    return fit;
}

/// Convenience overload building the problem internally.
[[nodiscard]] inline BayesFit log_marginal(const Catalog& catalog, Restriction restriction, SmoothingDomain domain,
                                           const Hyperparams& hyper, const EtasParams& reference,
                                           std::optional<double> changepoint = std::nullopt,
                                           const BayesOptions& options = {}) {
    const NsProblem problem(catalog, restriction, domain, reference, changepoint);
    return log_marginal(problem, hyper, options);
}

namespace detail {

struct HyperCoordinates {
    Restriction restriction;

    [[nodiscard]] Eigen::Index size() const { return restriction == Restriction::free ? 4 : 2; }

    [[nodiscard]] Eigen::VectorXd encode(const Hyperparams& h) const {
        Eigen::VectorXd y(size());
        if (restriction == Restriction::free)
            y << std::log10(h.w_mu), std::log10(h.w_k), h.q_mu_boundary, h.q_k_boundary;
        else
            y << std::log10(h.w_mu), h.q_mu_boundary;
        return y;
    }

    [[nodiscard]] Hyperparams decode(const Eigen::VectorXd& y, const Hyperparams& base) const {
        Hyperparams h = base;
        h.w_mu = std::pow(10.0, y[0]);
        if (restriction == Restriction::free) {
            h.w_k = std::pow(10.0, y[1]);
            h.q_mu_boundary = y[2];
            h.q_k_boundary = y[3];
        } else {
            h.q_mu_boundary = y[1];
        }
        return h;
    }

    [[nodiscard]] bool inside(const Eigen::VectorXd& y, const BayesOptions& o) const {
        const int weights = restriction == Restriction::free ? 2 : 1;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            if (!std::isfinite(y[i])) return false;
            if (i < weights ? (y[i] < o.log10_w_min || y[i] > o.log10_w_max) : y[i] < 0.0) return false;
        }
        return true;
    }
};

// `warm` carries the last converged MAP between calls of one search.
inline double safe_log_marginal(const NsProblem& problem, const Hyperparams& h, const BayesOptions& o,
                                Eigen::VectorXd* warm) {
    try {
        return log_marginal(problem, h, o, false, warm).log_marginal;
    } catch (const Error&) {
        return -std::numeric_limits<double>::infinity();
    }
}

}  // namespace detail

/// ABIC0 baseline: weights fixed at options.baseline_weight, boundary
/// coefficients optimized by simplex.
[[nodiscard]] inline BayesFit heavy_baseline(const NsProblem& problem, const BayesOptions& options = {}) {
    const bool two = problem.restriction == Restriction::free;
    Hyperparams base{options.baseline_weight, options.baseline_weight, 1.0, 1.0};
    auto decode = [&](const Eigen::VectorXd& y) {
        Hyperparams h = base;
        h.q_mu_boundary = y[0];
        if (two) h.q_k_boundary = y[1];
        return h;
    };
    Eigen::VectorXd warm;
    auto f = [&](const Eigen::VectorXd& y) {
        if ((y.array() < 0.0).any()) return -std::numeric_limits<double>::infinity();
        return detail::safe_log_marginal(problem, decode(y), options, &warm);
    };
    const Eigen::Index n = two ? 2 : 1;
    std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n + 1), Eigen::VectorXd::Ones(n));
    for (Eigen::Index i = 0; i < n; ++i) simplex[static_cast<std::size_t>(i + 1)][i] += options.boundary_step;
    const auto r = optim::maximize_nelder_mead(f, simplex, options.simplex);
    if (!std::isfinite(r.value)) fail(ErrorKind::laplace_failure, "baseline marginal likelihood is not finite");
    auto fit = log_marginal(problem, decode(r.x), options);
    fit.evaluations = r.evaluations;
    fit.converged = fit.converged && r.converged;
    if (!r.converged) fit.diagnostics.push_back("baseline simplex: " + r.message);
    fit.abic0 = fit.abic;
    fit.delta_abic = 0.0;
    return fit;
}

/// Type-II maximum likelihood over (w, boundary coefficients) by the simplex
/// method in log10(w), followed by scoring against the heavy-weight baseline.
/// `init` supplies the starting vertex; the other vertices add
/// options.log10_w_step decades to one weight or options.boundary_step to one
/// boundary coefficient.
[[nodiscard]] inline BayesFit optimize_hyperparams(const NsProblem& problem, const Hyperparams& init = {},
                                                   const BayesOptions& options = {}) {
    init.validate();
    const detail::HyperCoordinates coords{problem.restriction};
    const Eigen::Index n = coords.size();
    const int weights = problem.restriction == Restriction::free ? 2 : 1;
    std::vector<Eigen::VectorXd> simplex;
    simplex.push_back(coords.encode(init));
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::VectorXd v = simplex.front();
        v[i] += i < weights ? options.log10_w_step : options.boundary_step;
        simplex.push_back(v);
    }
    if (!options.vertex_order.empty()) {
        require(options.vertex_order.size() == simplex.size(), "vertex order must permute the simplex");
        std::vector<Eigen::VectorXd> permuted;
        for (std::size_t k : options.vertex_order) permuted.push_back(simplex.at(k));
        simplex = std::move(permuted);
    }
    Eigen::VectorXd warm;
    auto f = [&](const Eigen::VectorXd& y) {
        if (!coords.inside(y, options)) return -std::numeric_limits<double>::infinity();
        return detail::safe_log_marginal(problem, coords.decode(y, init), options, &warm);
    };
    auto search = optim::maximize_nelder_mead(f, simplex, options.simplex);
    int evaluations = search.evaluations;

    const auto baseline = heavy_baseline(problem, options);
    evaluations += baseline.evaluations;
    const Eigen::VectorXd base_y = coords.encode(baseline.hyper);
    std::vector<std::string> notes;
    if (!(search.value >= baseline.log_marginal)) {
        notes.push_back("simplex finished below the baseline; restarted from the baseline point");
        std::vector<Eigen::VectorXd> restart{base_y};
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::VectorXd v = base_y;
            v[i] -= i < weights ? options.log10_w_step / 2 : options.boundary_step;
            if (i >= weights && v[i] < 0.0) v[i] = base_y[i] + options.boundary_step;
            restart.push_back(v);
        }
        const auto again = optim::maximize_nelder_mead(f, restart, options.simplex);
        evaluations += again.evaluations;
        if (again.value > search.value) search = again;
    }
    Eigen::VectorXd best = search.x;
    if (!(search.value >= baseline.log_marginal)) {
        notes.push_back("optimum is the baseline point");
        best = base_y;
    }
    auto fit = log_marginal(problem, coords.decode(best, init), options);
    fit.evaluations = evaluations;
    fit.converged = fit.converged && search.converged;
    if (!search.converged) fit.diagnostics.push_back("hyperparameter simplex: " + search.message);
    fit.diagnostics.insert(fit.diagnostics.end(), notes.begin(), notes.end());
    fit.abic0 = baseline.abic;
    fit.delta_abic = delta_abic(fit, baseline);
    return fit;
}

[[nodiscard]] inline BayesFit optimize_hyperparams(const Catalog& catalog, Restriction restriction,
                                                   SmoothingDomain domain, const Hyperparams& init,
                                                   const EtasParams& reference,
                                                   std::optional<double> changepoint = std::nullopt,
                                                   const BayesOptions& options = {}) {
    const NsProblem problem(catalog, restriction, domain, reference, changepoint);
    return optimize_hyperparams(problem, init, options);
}

struct ErrorTrace {
    std::vector<double> times;
    std::vector<double> eps_mu;
    std::vector<double> eps_k;
};

/// Pointwise standard errors from a coefficient covariance C:
/// eps^2(t) = F_l^2 C_ll + 2 F_l F_{l+1} C_{l,l+1} + F_{l+1}^2 C_{l+1,l+1}.
/// C covers K - 1 coefficients per factor (boundary fixed, no variance) or all
/// K. Under fix_qk eps_K = 0 and under tied eps_K = eps_mu.
[[nodiscard]] inline ErrorTrace error_bounds(const SplineBasis& basis, const Eigen::MatrixXd& covariance,
                                             Restriction restriction, const std::vector<double>& times) {
    const Eigen::Index factors = restriction == Restriction::free ? 2 : 1;
    const auto K = static_cast<Eigen::Index>(basis.size());
    if (covariance.rows() != covariance.cols() ||
        (covariance.rows() != factors * K && covariance.rows() != factors * (K - 1)))
        fail(ErrorKind::not_positive_definite, "covariance is missing or has the wrong size (singular H?)");
    const Eigen::Index m = covariance.rows() / factors;
    auto eps = [&](Eigen::Index offset, double t) {
        const auto l = static_cast<Eigen::Index>(basis.interval(t));
        const double w = (t - basis.knots[static_cast<std::size_t>(l)]) /
                         (basis.knots[static_cast<std::size_t>(l + 1)] - basis.knots[static_cast<std::size_t>(l)]);
        const double f[2] = {1.0 - w, w};
        double v = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b) {
                const Eigen::Index i = l + a, j = l + b;
                if (i < m && j < m) v += f[a] * f[b] * covariance(offset + i, offset + j);
            }
        return std::sqrt(std::max(0.0, v));
    };
    ErrorTrace out;
    out.times = times;
    for (double t : times) {
        out.eps_mu.push_back(eps(0, t));
        switch (restriction) {
            case Restriction::fix_qk: out.eps_k.push_back(0.0); break;
            case Restriction::tied: out.eps_k.push_back(out.eps_mu.back()); break;
            case Restriction::free: out.eps_k.push_back(eps(m, t)); break;
        }
    }
    return out;
}

[[nodiscard]] inline ErrorTrace error_bounds(const BayesFit& fit, const std::vector<double>& times) {
    return error_bounds(fit.basis, fit.covariance, fit.map.restriction, times);
}

/// Knots as evaluation times.
[[nodiscard]] inline ErrorTrace error_bounds(const BayesFit& fit) { return error_bounds(fit, fit.basis.knots); }

}  // namespace etas

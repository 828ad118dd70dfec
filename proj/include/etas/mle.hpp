#pragma once

#include "etas/catalog.hpp"
#include "etas/core.hpp"
#include "etas/error.hpp"
#include "etas/optim/quasi_newton.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace etas {

struct FitOptions {
    double gradient_tolerance{1e-6};
    int max_iterations{500};
    int newton_polish_iterations{30};
};

/// Standard errors of the free parameters (nullopt for fixed ones, or when the
/// observed information is not positive definite).
struct StandardErrors {
    std::array<std::optional<double>, EtasParams::size> values{};
    bool available{false};
    std::string diagnostic;
};

struct FitResult {
    EtasParams params;
    FixMask fixed{};
    double loglik{0.0};
    double aic{0.0};
    StandardErrors std_errors;
    int k{0};
    bool converged{false};
    int iterations{0};
    double gradient_norm{0.0};  // max-norm in optimizer coordinates
    std::vector<std::string> warnings;
};

[[nodiscard]] inline double aic_of(double loglik, int k) {
    require(k >= 0, "parameter count must be nonnegative");
    return -2.0 * loglik + 2.0 * k;
}

/// exp(-delta/2): relative probability of the worse model against the better one.
[[nodiscard]] inline double relative_probability(double delta) { return std::exp(-0.5 * delta); }

[[nodiscard]] inline int free_count(const FixMask& fixed) {
    int k = 0;
    for (bool f : fixed) k += f ? 0 : 1;
    return k;
}

/// Default starting point: mu = N / (2 (T - S)), K0 = 0.05, c = 0.01, alpha = 1, p = 1.1.
[[nodiscard]] inline EtasParams default_init(const Catalog& catalog) {
    const double span = catalog.duration() > 0.0 ? catalog.duration() : 1.0;
    return {static_cast<double>(std::max<std::size_t>(catalog.size(), 1)) / (2.0 * span), 0.05, 0.01,
            1.0, 1.1};
}

namespace detail {

// Optimizer coordinates: log for (mu, K0, c), raw for (alpha, p).
inline constexpr std::array<bool, EtasParams::size> kLogScaled{true, true, true, false, false};

struct FreeCoordinates {
    std::vector<std::size_t> index;  // parameter index of each free coordinate

    explicit FreeCoordinates(const FixMask& fixed) {
        for (std::size_t i = 0; i < EtasParams::size; ++i)
            if (!fixed[i]) index.push_back(i);
    }
    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(index.size()); }

    [[nodiscard]] Eigen::VectorXd to_z(const EtasParams& p) const {
        const auto v = p.to_array();
        Eigen::VectorXd z(size());
        for (Eigen::Index j = 0; j < size(); ++j) {
            const auto i = index[static_cast<std::size_t>(j)];
            z[j] = kLogScaled[i] ? std::log(v[i]) : v[i];
        }
        return z;
    }
    [[nodiscard]] EtasParams from_z(const Eigen::VectorXd& z, const EtasParams& base) const {
        auto v = base.to_array();
        for (Eigen::Index j = 0; j < size(); ++j) {
            const auto i = index[static_cast<std::size_t>(j)];
            v[i] = kLogScaled[i] ? std::exp(z[j]) : z[j];
        }
        return EtasParams::from_array(v);
    }
    // Chain rule from raw-parameter gradient to z-gradient.
    [[nodiscard]] Eigen::VectorXd z_gradient(const std::array<double, EtasParams::size>& g,
                                             const EtasParams& p) const {
        const auto v = p.to_array();
        Eigen::VectorXd out(size());
        for (Eigen::Index j = 0; j < size(); ++j) {
            const auto i = index[static_cast<std::size_t>(j)];
            out[j] = kLogScaled[i] ? g[i] * v[i] : g[i];
        }
        return out;
    }
    [[nodiscard]] Eigen::VectorXd lower() const {
        Eigen::VectorXd lo(size());
        for (Eigen::Index j = 0; j < size(); ++j) {
            const auto i = index[static_cast<std::size_t>(j)];
            lo[j] = kLogScaled[i] ? -std::numeric_limits<double>::infinity() : (i == 3 ? 0.0 : 1e-6);
        }
        return lo;
    }
    [[nodiscard]] Eigen::VectorXd upper() const {
        return Eigen::VectorXd::Constant(size(), std::numeric_limits<double>::infinity());
    }
};

// Central finite differences of an analytic gradient; returns the symmetrized Jacobian.
template <class Gradient>
Eigen::MatrixXd finite_difference_hessian(Gradient&& grad, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& steps) {
    const Eigen::Index n = x.size();
    Eigen::MatrixXd H(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += steps[j];
        xm[j] -= steps[j];
        H.col(j) = (grad(xp) - grad(xm)) / (2.0 * steps[j]);
    }
    return 0.5 * (H + H.transpose());
}

}  // namespace detail

/// Square roots of the diagonal of the inverse observed information, restricted
/// to the free parameters. The Hessian is the central-difference Jacobian of the
/// analytic gradient in the raw parameters.
[[nodiscard]] inline StandardErrors standard_errors(const Catalog& catalog, const EtasParams& params,
                                                    const FixMask& fixed) {
    StandardErrors out;
    const detail::FreeCoordinates free(fixed);
    if (free.size() == 0) {
        out.available = true;
        return out;
    }
    const auto base = params.to_array();
    Eigen::VectorXd x(free.size()), steps(free.size());
    for (Eigen::Index j = 0; j < free.size(); ++j) {
        const auto i = free.index[static_cast<std::size_t>(j)];
        x[j] = base[i];
        steps[j] = 1e-5 * std::max(std::abs(base[i]), i == 3 ? 1e-2 : 1e-12);
    }
    bool finite = true;
    auto grad = [&](const Eigen::VectorXd& xv) {
        auto v = base;
        for (Eigen::Index j = 0; j < free.size(); ++j) v[free.index[static_cast<std::size_t>(j)]] = xv[j];
        const auto eval = evaluate_log_likelihood(EtasParams::from_array(v), catalog, true);
        finite = finite && eval.finite;
        Eigen::VectorXd g(free.size());
        for (Eigen::Index j = 0; j < free.size(); ++j) g[j] = eval.gradient[free.index[static_cast<std::size_t>(j)]];
        return g;
    };
    const Eigen::MatrixXd H = detail::finite_difference_hessian(grad, x, steps);
    if (!finite || !H.allFinite()) {
        out.diagnostic = "log-likelihood not finite around the estimate; standard errors unavailable";
        return out;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(-H);
    if (llt.info() != Eigen::Success) {
        out.diagnostic = "observed information is not positive definite; standard errors unavailable";
        return out;
    }
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(free.size(), free.size()));
    for (Eigen::Index j = 0; j < free.size(); ++j) {
        if (!(cov(j, j) >= 0.0)) {
            out.diagnostic = "negative variance from inverse information; standard errors unavailable";
            out.values = {};
            return out;
        }
        out.values[free.index[static_cast<std::size_t>(j)]] = std::sqrt(cov(j, j));
    }
    out.available = true;
    return out;
}

/// Maximum-likelihood fit of the ETAS parameters. Fixed parameters are held at
/// `init`. Quasi-Newton ascent in (log mu, log K0, log c, alpha, p), followed
/// by Newton polishing with a finite-difference Hessian of the analytic gradient.
[[nodiscard]] inline FitResult fit_mle(const Catalog& catalog, const EtasParams& init,
                                       const FixMask& fixed, const FitOptions& options = {}) {
    if (catalog.empty())
        fail(ErrorKind::empty_period, "cannot fit ETAS: no events in the window [" +
                                          io::format_double(catalog.window_start) + ", " +
                                          io::format_double(catalog.window_end) + "]");
    require(catalog.duration() > 0.0, "cannot fit ETAS on a zero-length window");
    validate(init);
    const detail::FreeCoordinates free(fixed);
    for (std::size_t i : free.index)
        if (detail::kLogScaled[i])
            require(init.to_array()[i] > 0.0,
                    std::string("free parameter ") + kParamNames[i] + " must start positive");

    FitResult result;
    result.fixed = fixed;
    result.k = static_cast<int>(free.size());

    if (free.size() == 0) {
        result.params = init;
        result.loglik = log_likelihood(init, catalog);
        result.aic = aic_of(result.loglik, 0);
        result.converged = true;
        result.std_errors.available = true;
        return result;
    }

    const double init_loglik = evaluate_log_likelihood(init, catalog, false).value;
    auto objective = [&](const Eigen::VectorXd& z, Eigen::VectorXd& g) {
        const EtasParams p = free.from_z(z, init);
        if (!std::isfinite(p.mu) || !std::isfinite(p.k0) || !(p.c > 0.0) || !std::isfinite(p.c))
            return -std::numeric_limits<double>::infinity();
        const auto eval = evaluate_log_likelihood(p, catalog, true);
        if (!eval.finite) return -std::numeric_limits<double>::infinity();
        g = free.z_gradient(eval.gradient, p);
        if (!g.allFinite()) return -std::numeric_limits<double>::infinity();
        return eval.value;
    };

    optim::QuasiNewtonOptions qn;
    qn.gradient_tolerance = options.gradient_tolerance;
    qn.max_iterations = options.max_iterations;
    const Eigen::VectorXd lower = free.lower(), upper = free.upper();
    auto qr = optim::maximize_bfgs(objective, free.to_z(init), lower, upper, qn);
    if (!std::isfinite(qr.value))
        fail(ErrorKind::degenerate_likelihood,
             "log-likelihood is -inf at the initial parameters; choose a different start");

    Eigen::VectorXd z = qr.x;
    Eigen::VectorXd g = qr.gradient;
    double value = qr.value;
    int iterations = qr.iterations;

    // Newton polish: quasi-Newton often stalls just above the gradient tolerance
    // on flat likelihood ridges.
    for (int it = 0; it < options.newton_polish_iterations &&
                     optim::projected_gradient_norm(z, g, lower, upper) >= options.gradient_tolerance;
         ++it) {
        Eigen::VectorXd steps = (1e-5 * z.cwiseAbs()).cwiseMax(1e-6);
        auto zgrad = [&](const Eigen::VectorXd& zz) {
            Eigen::VectorXd gg = Eigen::VectorXd::Zero(z.size());
            objective(zz, gg);
            return gg;
        };
        Eigen::MatrixXd H = detail::finite_difference_hessian(zgrad, z, steps);
        // Freeze coordinates held at a bound.
        std::vector<Eigen::Index> act;
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if ((z[i] <= lower[i] && g[i] < 0.0) || (z[i] >= upper[i] && g[i] > 0.0)) act.push_back(i);
        Eigen::MatrixXd A = -H;
        Eigen::VectorXd rhs = g;
        for (auto i : act) {
            A.row(i).setZero();
            A.col(i).setZero();
            A(i, i) = 1.0;
            rhs[i] = 0.0;
        }
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() != Eigen::Success || !A.allFinite()) break;
        const Eigen::VectorXd d = llt.solve(rhs);
        bool accepted = false;
        for (double t = 1.0; t > 1e-8; t *= 0.5) {
            Eigen::VectorXd zn = (z + t * d).cwiseMax(lower).cwiseMin(upper);
            Eigen::VectorXd gn(z.size());
            const double vn = objective(zn, gn);
            if (std::isfinite(vn) && vn >= value - 1e-12 * std::abs(value)) {
                accepted = vn >= value || optim::projected_gradient_norm(zn, gn, lower, upper) <
                                              optim::projected_gradient_norm(z, g, lower, upper);
                if (accepted) {
                    z = zn;
                    g = gn;
                    value = std::max(value, vn);
                    break;
                }
            }
        }
        ++iterations;
        if (!accepted) break;
    }

    result.params = free.from_z(z, init);
    const auto final_eval = evaluate_log_likelihood(result.params, catalog, true);
    result.loglik = final_eval.value;
    result.aic = aic_of(result.loglik, result.k);
    result.gradient_norm = optim::projected_gradient_norm(
        z, free.z_gradient(final_eval.gradient, result.params), lower, upper);
    result.converged = result.gradient_norm < options.gradient_tolerance;
    result.iterations = iterations;
    // The ascent property must hold even when the search misbehaves.
    if (std::isfinite(init_loglik) && result.loglik < init_loglik) {
        result.params = init;
        result.loglik = init_loglik;
        result.aic = aic_of(init_loglik, result.k);
        result.converged = false;
        result.warnings.push_back("optimizer failed to improve on the initial parameters");
    }
    if (!result.converged)
        result.warnings.push_back("not converged: " + qr.message + " (gradient max-norm " +
                                  io::format_double(result.gradient_norm) + ")");

    result.std_errors = standard_errors(catalog, result.params, fixed);
    const auto& p = result.params;
    if (!fixed[0] && p.mu < 1e-10) result.warnings.push_back("boundary: mu collapsed to zero");
    if (!fixed[1] && p.k0 < 1e-10) result.warnings.push_back("boundary: k0 collapsed to zero");
    if (!fixed[3] && p.alpha <= 0.0) result.warnings.push_back("boundary: alpha at its lower bound 0");
    if ((!fixed[1] && p.k0 > 1e4) || (!fixed[2] && p.c > catalog.duration()) || (!fixed[4] && p.p > 5.0))
        result.warnings.push_back("divergence: runaway estimates (reported verbatim)");
    if (!fixed[3] && result.std_errors.values[3] && *result.std_errors.values[3] > p.alpha)
        result.warnings.push_back(
            "alpha_tradeoff: standard error of alpha exceeds the estimate; K0 and alpha are poorly "
            "separated (narrow magnitude range?)");
    return result;
}

/// Fit with the default starting point.
[[nodiscard]] inline FitResult fit_mle(const Catalog& catalog, const FixMask& fixed = {},
                                       const FitOptions& options = {}) {
    return fit_mle(catalog, default_init(catalog), fixed, options);
}

}  // namespace etas

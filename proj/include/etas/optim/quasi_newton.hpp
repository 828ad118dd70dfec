#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace etas::optim {

struct QuasiNewtonOptions {
    double gradient_tolerance{1e-6};
    int max_iterations{500};
    double sufficient_increase{1e-4};
    int max_line_search_steps{60};
    double max_step{2.0};  // cap on the largest coordinate change of a trial step
};

struct QuasiNewtonResult {
    Eigen::VectorXd x;
    Eigen::VectorXd gradient;
    double value{-std::numeric_limits<double>::infinity()};
    int iterations{0};
    int evaluations{0};
    bool converged{false};
    std::string message;
};

/// Largest entry of the gradient after zeroing components that push against an
/// active bound.
[[nodiscard]] inline double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                                    const Eigen::VectorXd& lower,
                                                    const Eigen::VectorXd& upper) {
    double norm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if ((x[i] <= lower[i] && g[i] < 0.0) || (x[i] >= upper[i] && g[i] > 0.0)) continue;
        norm = std::max(norm, std::abs(g[i]));
    }
    return norm;
}

/// Maximizes f over the box [lower, upper] with a projected BFGS iteration.
///
/// `f(x, grad)` returns the objective and writes the gradient; it may return
/// -inf (or NaN) to mark an infeasible point, which the backtracking line
/// search then treats as a barrier.
template <class Objective>
QuasiNewtonResult maximize_bfgs(Objective&& f, Eigen::VectorXd x, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, const QuasiNewtonOptions& opt = {}) {
    const Eigen::Index n = x.size();
    QuasiNewtonResult r;
    x = x.cwiseMax(lower).cwiseMin(upper);
    Eigen::VectorXd g(n);
    double fx = f(x, g);
    r.evaluations = 1;
    if (!std::isfinite(fx)) {
        r.x = x;
        r.message = "objective is not finite at the starting point";
        return r;
    }

    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);  // inverse Hessian of -f
    bool fresh = true;
    Eigen::VectorXd g_new(n), x_new(n), d(n);

    for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
        if (projected_gradient_norm(x, g, lower, upper) < opt.gradient_tolerance) {
            r.converged = true;
            r.message = "gradient tolerance reached";
            break;
        }
        // Active set: coordinates pinned at a bound by the gradient.
        Eigen::VectorXd free_mask = Eigen::VectorXd::Ones(n);
        for (Eigen::Index i = 0; i < n; ++i)
            if ((x[i] <= lower[i] && g[i] < 0.0) || (x[i] >= upper[i] && g[i] > 0.0)) free_mask[i] = 0.0;

        d = free_mask.asDiagonal() * (H * free_mask.cwiseProduct(g));
        if (g.dot(d) <= 0.0) {
            H.setIdentity();
            fresh = true;
            d = free_mask.cwiseProduct(g);
        }
        const double largest = d.cwiseAbs().maxCoeff();
        double t = largest > opt.max_step ? opt.max_step / largest : 1.0;

        bool accepted = false;
        double f_new = fx;
        for (int ls = 0; ls < opt.max_line_search_steps; ++ls, t *= 0.5) {
            x_new = (x + t * d).cwiseMax(lower).cwiseMin(upper);
            f_new = f(x_new, g_new);
            ++r.evaluations;
            if (std::isfinite(f_new) && f_new >= fx + opt.sufficient_increase * g.dot(x_new - x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!fresh) {
                H.setIdentity();
                fresh = true;
                continue;
            }
            r.message = "line search failed to find an increase";
            break;
        }

        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd y = g - g_new;  // gradient change of -f
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh) {
                H *= sy / y.squaredNorm();
                fresh = false;
            }
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = H * y;
            H += (rho * rho * y.dot(Hy) + rho) * (s * s.transpose()) -
                 rho * (Hy * s.transpose() + s * Hy.transpose());
        }
        const bool stalled = std::abs(f_new - fx) <= 1e-15 * std::max(1.0, std::abs(fx)) &&
                             s.cwiseAbs().maxCoeff() <= 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff());
        x = x_new;
        g = g_new;
        fx = f_new;
        if (stalled) {
            r.message = "no further progress possible at machine precision";
            break;
        }
    }
    if (!r.converged && projected_gradient_norm(x, g, lower, upper) < opt.gradient_tolerance) {
        r.converged = true;
        r.message = "gradient tolerance reached";
    }
    if (!r.converged && r.message.empty()) r.message = "iteration limit reached";
    r.x = x;
    r.gradient = g;
    r.value = fx;
    return r;
}

}  // namespace etas::optim

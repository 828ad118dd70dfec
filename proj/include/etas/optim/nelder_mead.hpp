#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace etas::optim {

struct NelderMeadOptions {
    double function_tolerance{1e-4};  // spread of vertex values at convergence
    double step_tolerance{1e-3};      // simplex diameter at convergence
    int max_evaluations{600};
    bool restart_on_convergence{true};  // one restart from a fresh simplex around the optimum
    double restart_scale{0.25};
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value{-std::numeric_limits<double>::infinity()};
    int evaluations{0};
    int restarts{0};
    bool converged{false};
    std::string message;
};

namespace detail {

// Total order on vertices: larger value first, ties broken lexicographically on
// coordinates. Makes the search independent of the order vertices were supplied.
inline bool vertex_before(double fa, const Eigen::VectorXd& a, double fb, const Eigen::VectorXd& b) {
    const bool fa_ok = std::isfinite(fa), fb_ok = std::isfinite(fb);
    if (fa_ok != fb_ok) return fa_ok;
    if (fa_ok && fa != fb) return fa > fb;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) return a[i] < b[i];
    return false;
}

}  // namespace detail

/// Derivative-free maximization by the Nelder-Mead simplex method, starting
/// from an explicit simplex of n + 1 vertices. Non-finite values are treated
/// as infeasible.
template <class Objective>
NelderMeadResult maximize_nelder_mead(Objective&& f, std::vector<Eigen::VectorXd> simplex,
                                      const NelderMeadOptions& opt = {}) {
    NelderMeadResult r;
    const std::size_t m = simplex.size();
    const Eigen::Index n = simplex.front().size();
    std::vector<double> values(m);
    auto eval = [&](const Eigen::VectorXd& x) {
        ++r.evaluations;
        const double v = f(x);
        return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    };
    for (std::size_t i = 0; i < m; ++i) values[i] = eval(simplex[i]);

    auto sort_simplex = [&]() {
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return detail::vertex_before(values[a], simplex[a], values[b], simplex[b]);
        });
        std::vector<Eigen::VectorXd> s2(m);
        std::vector<double> v2(m);
        for (std::size_t i = 0; i < m; ++i) {
            s2[i] = simplex[order[i]];
            v2[i] = values[order[i]];
        }
        simplex.swap(s2);
        values.swap(v2);
    };

    auto converged = [&]() {
        if (!std::isfinite(values.front()) || !std::isfinite(values.back())) return false;
        double diameter = 0.0;
        for (std::size_t i = 1; i < m; ++i)
            diameter = std::max(diameter, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
        return values.front() - values.back() <= opt.function_tolerance &&
               diameter <= opt.step_tolerance;
    };

    constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;
    while (true) {
        sort_simplex();
        if (converged()) {
            if (opt.restart_on_convergence && r.restarts == 0 && r.evaluations < opt.max_evaluations) {
                // Restart once around the best vertex to guard against premature collapse.
                ++r.restarts;
                const Eigen::VectorXd best = simplex.front();
                const double best_value = values.front();
                for (std::size_t i = 1; i < m; ++i) {
                    simplex[i] = best;
                    simplex[i][static_cast<Eigen::Index>(i - 1)] += opt.restart_scale;
                    values[i] = eval(simplex[i]);
                }
                simplex[0] = best;
                values[0] = best_value;
                continue;
            }
            r.converged = true;
            r.message = "simplex converged";
            break;
        }
        if (r.evaluations >= opt.max_evaluations) {
            r.message = "evaluation limit reached; search stagnated";
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (std::size_t i = 0; i + 1 < m; ++i) centroid += simplex[i];
        centroid /= static_cast<double>(m - 1);
        const Eigen::VectorXd& worst = simplex.back();
        const double f_worst = values.back();
        const double f_second = values[m - 2];
        const double f_best = values.front();

        const Eigen::VectorXd xr = centroid + reflect * (centroid - worst);
        const double fr = eval(xr);
        if (fr > f_best) {
            const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
            const double fe = eval(xe);
            if (fe > fr) {
                simplex.back() = xe;
                values.back() = fe;
            } else {
                simplex.back() = xr;
                values.back() = fr;
            }
            continue;
        }
        if (fr > f_second) {
            simplex.back() = xr;
            values.back() = fr;
            continue;
        }
        const bool outside = fr > f_worst;
        const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                                           : Eigen::VectorXd(centroid + contract * (worst - centroid));
        const double fc = eval(xc);
        if (fc > (outside ? fr : f_worst) || (!std::isfinite(f_worst) && std::isfinite(fc))) {
            simplex.back() = xc;
            values.back() = fc;
            continue;
        }
        for (std::size_t i = 1; i < m; ++i) {
            simplex[i] = simplex[0] + shrink * (simplex[i] - simplex[0]);
            values[i] = eval(simplex[i]);
        }
    }
    r.x = simplex.front();
    r.value = values.front();
    return r;
}

}  // namespace etas::optim

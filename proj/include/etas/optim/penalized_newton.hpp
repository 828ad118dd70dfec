#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace etas::optim {

/// A log-likelihood over a coefficient vector. evaluate() returns the value
/// (-inf when infeasible) and, when the pointers are non-null, fills the
/// gradient and the Hessian.
template <class L>
concept CoefficientLikelihood =
    requires(const L& l, const Eigen::VectorXd& x, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
        { l.dimension() } -> std::convertible_to<Eigen::Index>;
        { l.evaluate(x, g, h) } -> std::convertible_to<double>;
    };

/// Quadratic penalty q'Mq = sum_l c_l (q_{l+1} - q_l)^2 on one block
/// q = (x[offset], ..., x[offset + n - 1], boundary). Kept in difference form so
/// heavy couplings do not cancel. The last coefficient is held at `boundary`;
/// it is a hyperparameter, not a free coordinate.
struct PriorBlock {
    Eigen::Index offset{0};
    Eigen::VectorXd coupling;  // n, all >= 0
    double boundary{1.0};

    [[nodiscard]] Eigen::Index free_size() const { return coupling.size(); }

    [[nodiscard]] double value(const Eigen::VectorXd& x) const {
        const Eigen::Index n = free_size();
        auto q = [&](Eigen::Index l) { return l < n ? x[offset + l] : boundary; };
        double v = 0.0;
        for (Eigen::Index l = 0; l < n; ++l) v += coupling[l] * (q(l + 1) - q(l)) * (q(l + 1) - q(l));
        return v;
    }

    // Subtracts the gradient of q'Mq with respect to the free coordinates.
    void subtract_gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const {
        const Eigen::Index n = free_size();
        auto q = [&](Eigen::Index l) { return l < n ? x[offset + l] : boundary; };
        for (Eigen::Index l = 0; l < n; ++l) {
            double mq = coupling[l] * (q(l) - q(l + 1));
            if (l > 0) mq += coupling[l - 1] * (q(l) - q(l - 1));
            g[offset + l] -= 2.0 * mq;
        }
    }

    void subtract_hessian(Eigen::MatrixXd& h) const {
        const Eigen::Index n = free_size();
        for (Eigen::Index l = 0; l < n; ++l) {
            h(offset + l, offset + l) -= 2.0 * (coupling[l] + (l > 0 ? coupling[l - 1] : 0.0));
            if (l + 1 < n) {
                h(offset + l, offset + l + 1) += 2.0 * coupling[l];
                h(offset + l + 1, offset + l) += 2.0 * coupling[l];
            }
        }
    }

    /// Dense M over all n + 1 coefficients.
    [[nodiscard]] Eigen::MatrixXd matrix() const {
        const Eigen::Index n = free_size();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n + 1, n + 1);
        for (Eigen::Index l = 0; l < n; ++l) {
            m(l, l) += coupling[l];
            m(l + 1, l + 1) += coupling[l];
            m(l, l + 1) -= coupling[l];
            m(l + 1, l) -= coupling[l];
        }
        return m;
    }

    /// log det(2 M_cc), M_cc the free-by-free part; NaN unless positive definite.
    /// M_cc is a path Laplacian grounded at the boundary, so its determinant is
    /// the product of the couplings (one spanning tree).
    [[nodiscard]] double log_det_precision() const {
        double logdet = static_cast<double>(free_size()) * std::log(2.0);
        for (Eigen::Index l = 0; l < free_size(); ++l) {
            if (!(coupling[l] > 0.0) || !std::isfinite(coupling[l])) return std::numeric_limits<double>::quiet_NaN();
            logdet += std::log(coupling[l]);
        }
        return logdet;
    }
};

struct PenalizedOptions {
    double gradient_tolerance{1e-6};
    // Fallback stop: predicted ascent of the Newton step below this. Needed when
    // heavy weights put the gradient's rounding floor above gradient_tolerance.
    double decrement_tolerance{1e-12};
    int max_iterations{1000};
    bool nonnegative{true};
};

struct PenalizedResult {
    Eigen::VectorXd x;
    double value{-std::numeric_limits<double>::infinity()};  // penalized objective
    double loglik{-std::numeric_limits<double>::infinity()};
    Eigen::VectorXd gradient;     // of the penalized objective
    Eigen::MatrixXd information;  // minus its Hessian
    int iterations{0};
    bool converged{false};
    std::vector<Eigen::Index> active;  // coordinates clamped at zero
    std::string message;
};

namespace detail {

template <CoefficientLikelihood L>
double penalized_value(const L& lik, std::span<const PriorBlock> blocks, const Eigen::VectorXd& x,
                       double* loglik, Eigen::VectorXd* g, Eigen::MatrixXd* h) {
    const double ll = lik.evaluate(x, g, h);
    if (loglik) *loglik = ll;
    if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
    double v = ll;
    for (const auto& b : blocks) {
        v -= b.value(x);
        if (g) b.subtract_gradient(x, *g);
        if (h) b.subtract_hessian(*h);
    }
    return v;
}

inline double projected_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& g, bool nonnegative) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (nonnegative && x[i] <= 0.0 && g[i] < 0.0) continue;
        m = std::max(m, std::abs(g[i]));
    }
    return m;
}

}  // namespace detail

/// Maximizes log L(x) - sum_b q_b' M_b q_b by projected Newton with an active
/// set at zero. Intended for concave objectives.
template <CoefficientLikelihood L>
PenalizedResult maximize_penalized(const L& lik, std::span<const PriorBlock> blocks, Eigen::VectorXd x0,
                                   const PenalizedOptions& opt = {}) {
    const Eigen::Index n = lik.dimension();
    PenalizedResult r;
    if (opt.nonnegative) x0 = x0.cwiseMax(0.0);
    r.x = std::move(x0);
    r.gradient = Eigen::VectorXd::Zero(n);
    r.information = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd hess(n, n);

    auto full_eval = [&](const Eigen::VectorXd& x, double& ll, Eigen::VectorXd& g, Eigen::MatrixXd& h) {
        g.setZero(n);
        h.setZero(n, n);
        return detail::penalized_value(lik, blocks, x, &ll, &g, &h);
    };

    r.value = full_eval(r.x, r.loglik, r.gradient, hess);
    if (!std::isfinite(r.value)) {
        r.message = "penalized log-likelihood is -inf at the starting point";
        return r;
    }

    Eigen::VectorXd gn(n);
    Eigen::MatrixXd hn(n, n);
    for (; r.iterations < opt.max_iterations; ++r.iterations) {
        if (detail::projected_norm(r.x, r.gradient, opt.nonnegative) < opt.gradient_tolerance) {
            r.converged = true;
            r.message = "gradient tolerance reached";
            break;
        }
        std::vector<Eigen::Index> free;
        free.reserve(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i)
            if (!(opt.nonnegative && r.x[i] <= 0.0 && r.gradient[i] <= 0.0)) free.push_back(i);
        const auto m = static_cast<Eigen::Index>(free.size());
        Eigen::MatrixXd a(m, m);
        Eigen::VectorXd gf(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            gf[i] = r.gradient[free[i]];
            for (Eigen::Index j = 0; j < m; ++j) a(i, j) = -hess(free[i], free[j]);
        }
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        double shift = 0.0;
        while (llt.info() != Eigen::Success) {
            shift = shift == 0.0 ? 1e-10 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff()) : 10.0 * shift;
            if (!std::isfinite(shift)) break;
            llt.compute(a + shift * Eigen::MatrixXd::Identity(m, m));
        }
        if (llt.info() != Eigen::Success) {
            r.message = "Newton system could not be factorized";
            break;
        }
        const Eigen::VectorXd df = llt.solve(gf);
        const double decrement = gf.dot(df);
        if (decrement < opt.decrement_tolerance) {
            r.converged = true;
            r.message = "Newton decrement below tolerance";
            break;
        }
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < m; ++i) d[free[i]] = df[i];

        bool accepted = false;
        for (double t = 1.0; t > 1e-12; t *= 0.5) {
            Eigen::VectorXd xn = r.x + t * d;
            if (opt.nonnegative) xn = xn.cwiseMax(0.0);
            const double vn = detail::penalized_value(lik, blocks, xn, nullptr, nullptr, nullptr);
            if (std::isfinite(vn) && vn >= r.value + 1e-4 * r.gradient.dot(xn - r.x)) {
                double ll = 0.0;
                const double v = full_eval(xn, ll, gn, hn);
                r.x = std::move(xn);
                r.value = v;
                r.loglik = ll;
                r.gradient = gn;
                hess = hn;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            r.message = "line search made no progress";
            break;
        }
    }
    if (r.iterations >= opt.max_iterations) r.message = "iteration cap reached";
    r.information = -hess;
    r.active.clear();
    if (opt.nonnegative)
        for (Eigen::Index i = 0; i < n; ++i)
            if (r.x[i] <= 0.0) r.active.push_back(i);
    return r;
}

}  // namespace etas::optim

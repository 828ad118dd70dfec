#pragma once

#include "etas/catalog.hpp"
#include "etas/core.hpp"
#include "etas/error.hpp"
#include "etas/io/format.hpp"
#include "etas/optim/penalized_newton.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace etas {

/// Which anomaly factors vary: model 1 keeps q_K = 1, model 2 ties q_K to q_mu,
/// model 3 leaves both free.
enum class Restriction { fix_qk, tied, free };
enum class SmoothingDomain { ordinary, transformed };
enum class Factor { mu, k };

[[nodiscard]] inline const char* to_string(Restriction r) {
    switch (r) {
        case Restriction::fix_qk: return "fix_qk";
        case Restriction::tied: return "tied";
        case Restriction::free: return "free";
    }
    return "?";
}
[[nodiscard]] inline const char* to_string(SmoothingDomain d) {
    return d == SmoothingDomain::ordinary ? "ordinary" : "transformed";
}
[[nodiscard]] inline Restriction parse_restriction(std::string_view s) {
    if (s == "fix_qk") return Restriction::fix_qk;
    if (s == "tied") return Restriction::tied;
    if (s == "free") return Restriction::free;
    fail(ErrorKind::parse, "unknown restriction '" + std::string(s) + "'");
}
[[nodiscard]] inline SmoothingDomain parse_domain(std::string_view s) {
    if (s == "ordinary") return SmoothingDomain::ordinary;
    if (s == "transformed") return SmoothingDomain::transformed;
    fail(ErrorKind::parse, "unknown smoothing domain '" + std::string(s) + "'");
}

/// Knots {S, event times, T} of the broken-line anomaly factors.
struct SplineBasis {
    std::vector<double> knots;
    SmoothingDomain domain{SmoothingDomain::ordinary};
    std::vector<double> tau_knots;  // transformed-time images, transformed domain only

    [[nodiscard]] std::size_t size() const { return knots.size(); }

    [[nodiscard]] const std::vector<double>& smoothing_knots() const {
        return domain == SmoothingDomain::transformed ? tau_knots : knots;
    }

    [[nodiscard]] std::vector<double> smoothing_gaps() const {
        const auto& k = smoothing_knots();
        std::vector<double> d(k.size() - 1);
        for (std::size_t l = 0; l + 1 < k.size(); ++l) d[l] = k[l + 1] - k[l];
        return d;
    }

    /// Interval index l with knots[l] <= t < knots[l + 1]; t = T maps to the last interval.
    [[nodiscard]] std::size_t interval(double t) const {
        require(!knots.empty() && t >= knots.front() && t <= knots.back(),
                "time " + io::format_double(t) + " outside the knot range");
        const auto it = std::upper_bound(knots.begin(), knots.end(), t);
        const auto hi = static_cast<std::size_t>(it - knots.begin());
        return std::min(hi, knots.size() - 1) - 1;
    }

    /// Tent function F_i(t).
    [[nodiscard]] double tent(std::size_t i, double t) const {
        if (i > 0 && t > knots[i - 1] && t <= knots[i]) return (t - knots[i - 1]) / (knots[i] - knots[i - 1]);
        if (i + 1 < knots.size() && t >= knots[i] && t < knots[i + 1])
            return (knots[i + 1] - t) / (knots[i + 1] - knots[i]);
        if (t == knots[i]) return 1.0;
        return 0.0;
    }

    [[nodiscard]] double interpolate(const std::vector<double>& coeffs, double t) const {
        require(coeffs.size() == knots.size(), "coefficient count must equal knot count");
        const std::size_t l = interval(t);
        const double w = (t - knots[l]) / (knots[l + 1] - knots[l]);
        return coeffs[l] + w * (coeffs[l + 1] - coeffs[l]);
    }
};

/// Knots at S, each in-window event time and T. Coincident knots (tied events,
/// events at S or T) are separated by 1e-9 (T - S) so every gap is positive.
[[nodiscard]] inline SplineBasis build_basis(const Catalog& catalog, SmoothingDomain domain,
                                             const EtasParams& reference) {
    if (catalog.empty())
        fail(ErrorKind::empty_period, "cannot build a spline basis on a catalog without in-window events");
    const double S = catalog.window_start, T = catalog.window_end;
    require(T > S, "spline basis needs a nondegenerate window");
    SplineBasis b;
    b.domain = domain;
    b.knots.reserve(catalog.size() + 2);
    b.knots.push_back(S);
    for (const Event& e : catalog.in_window()) b.knots.push_back(e.time);
    b.knots.push_back(T);
    const double delta = 1e-9 * (T - S);
    const std::size_t K = b.knots.size();
    for (std::size_t k = 1; k < K; ++k) b.knots[k] = std::max(b.knots[k], b.knots[k - 1] + delta);
    b.knots[K - 1] = T;
    for (std::size_t k = K - 1; k-- > 0;) b.knots[k] = std::min(b.knots[k], b.knots[k + 1] - delta);
    require(b.knots.front() >= S, "too many coincident event times to separate knots");
    if (domain == SmoothingDomain::transformed) {
        validate(reference);
        require(reference.mu > 0.0, "transformed-time smoothing needs a reference with mu > 0");
        b.tau_knots.reserve(K);
        for (double t : b.knots) b.tau_knots.push_back(cumulative_intensity(reference, catalog, t));
        for (std::size_t k = 1; k < K; ++k)
            b.tau_knots[k] = std::max(b.tau_knots[k], b.tau_knots[k - 1] + delta * reference.mu);
    }
    return b;
}

struct AnomalyModel {
    std::vector<double> q_mu;
    std::vector<double> q_k;
    Restriction restriction{Restriction::free};
    SmoothingDomain domain{SmoothingDomain::ordinary};
    std::optional<double> changepoint;
    EtasParams reference;
};

[[nodiscard]] inline AnomalyModel flat_model(const SplineBasis& basis, Restriction restriction,
                                             const EtasParams& reference,
                                             std::optional<double> changepoint = std::nullopt) {
    return {std::vector<double>(basis.size(), 1.0), std::vector<double>(basis.size(), 1.0), restriction,
            basis.domain, changepoint, reference};
}

[[nodiscard]] inline double anomaly_value(const AnomalyModel& model, const SplineBasis& basis, Factor which,
                                          double t) {
    return basis.interpolate(which == Factor::mu ? model.q_mu : model.q_k, t);
}

struct PenaltyConfig {
    double w_mu{1.0};
    double w_k{1.0};
    double changepoint_weight{1e-5};

    void validate() const {
        for (double w : {w_mu, w_k, changepoint_weight})
            require(std::isfinite(w) && w > 0.0, "penalty weights must be finite and positive");
    }
};

/// Roughness sum_l (q_{l+1} - q_l)^2 / d_l with gaps in the smoothing domain.
[[nodiscard]] inline double roughness(const std::vector<double>& q, const SplineBasis& basis) {
    require(q.size() == basis.size(), "coefficient count must equal knot count");
    const auto d = basis.smoothing_gaps();
    double phi = 0.0;
    for (std::size_t l = 0; l < d.size(); ++l) phi += (q[l + 1] - q[l]) * (q[l + 1] - q[l]) / d[l];
    return phi;
}

/// Per-interval weights: `weight` everywhere except the interval holding the
/// change point (located in ordinary time), which gets `changepoint_weight`.
[[nodiscard]] inline std::vector<double> interval_weights(const SplineBasis& basis, double weight,
                                                          std::optional<double> changepoint,
                                                          double changepoint_weight) {
    std::vector<double> w(basis.size() - 1, weight);
    if (changepoint) w[basis.interval(*changepoint)] = changepoint_weight;
    return w;
}

[[nodiscard]] inline double weighted_roughness(const std::vector<double>& q, const SplineBasis& basis,
                                               const std::vector<double>& weights) {
    const auto d = basis.smoothing_gaps();
    double phi = 0.0;
    for (std::size_t l = 0; l < d.size(); ++l) phi += weights[l] * (q[l + 1] - q[l]) * (q[l + 1] - q[l]) / d[l];
    return phi;
}

/// Quadratic-form matrix of the roughness: q' Sigma q = roughness(q).
[[nodiscard]] inline Eigen::MatrixXd prior_penalty_matrix(const SplineBasis& basis) {
    const auto d = basis.smoothing_gaps();
    const auto K = static_cast<Eigen::Index>(basis.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index l = 0; l + 1 < K; ++l) {
        const double v = 1.0 / d[static_cast<std::size_t>(l)];
        s(l, l) += v;
        s(l + 1, l + 1) += v;
        s(l, l + 1) -= v;
        s(l + 1, l) -= v;
    }
    return s;
}

/// Prior block for sum_l W_l (q_{l+1} - q_l)^2 / d_l.
[[nodiscard]] inline optim::PriorBlock make_prior_block(const SplineBasis& basis, const std::vector<double>& weights,
                                                        Eigen::Index offset, double boundary) {
    const auto d = basis.smoothing_gaps();
    optim::PriorBlock b;
    b.offset = offset;
    b.boundary = boundary;
    b.coupling.resize(static_cast<Eigen::Index>(d.size()));
    for (std::size_t l = 0; l < d.size(); ++l) b.coupling[static_cast<Eigen::Index>(l)] = weights[l] / d[l];
    return b;
}

/// Precomputed pieces of the nonstationary log-likelihood for a fixed catalog
/// and reference model. The log-likelihood is linear in the coefficients inside
/// each log:
///   lambda_j = mu q_mu[j+1] + h_j + sum_{i<j} A(j,i) q_k[i+1]
///   log L = sum_j log lambda_j - mu sum_k omega_k q_mu[k] - sum_i b_i q_k[i+1] - h_int
/// where event j sits on knot j + 1, h_j is the triggering from history events
/// (which keep q_K = 1) and omega are trapezoid weights.
class NsDesign {
public:
    NsDesign(const Catalog& catalog, const EtasParams& reference, const SplineBasis& basis)
        : mu_(reference.mu) {
        validate(reference);
        require(basis.size() == catalog.size() + 2, "basis does not match catalog");
        const auto history = catalog.history();
        const auto events = catalog.in_window();
        const auto n = static_cast<Eigen::Index>(events.size());
        const double S = catalog.window_start, T = catalog.window_end;
        h_ = Eigen::VectorXd::Zero(n);
        a_ = Eigen::MatrixXd::Zero(n, n);
        b_ = Eigen::VectorXd::Zero(n);
        h_int_ = 0.0;
        for (const Event& e : history) {
            const double prod = reference.k0 * std::exp(reference.alpha * (e.magnitude - catalog.threshold));
            h_int_ += prod * detail::power_integral(S - e.time + reference.c, T - e.time + reference.c, reference.p);
            for (Eigen::Index j = 0; j < n; ++j) {
                const double tj = events[static_cast<std::size_t>(j)].time;
                if (e.time < tj) h_[j] += prod * std::pow(tj - e.time + reference.c, -reference.p);
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const Event& e = events[static_cast<std::size_t>(i)];
            const double prod = reference.k0 * std::exp(reference.alpha * (e.magnitude - catalog.threshold));
            b_[i] = prod * detail::power_integral(reference.c, T - e.time + reference.c, reference.p);
            for (Eigen::Index j = i + 1; j < n; ++j) {
                const double tj = events[static_cast<std::size_t>(j)].time;
                if (e.time < tj) a_(j, i) = prod * std::pow(tj - e.time + reference.c, -reference.p);
            }
        }
        const auto K = static_cast<Eigen::Index>(basis.size());
        omega_ = Eigen::VectorXd::Zero(K);
        for (Eigen::Index l = 0; l + 1 < K; ++l) {
            const double d = basis.knots[static_cast<std::size_t>(l + 1)] - basis.knots[static_cast<std::size_t>(l)];
            omega_[l] += 0.5 * d;
            omega_[l + 1] += 0.5 * d;
        }
    }

    [[nodiscard]] Eigen::Index events() const { return h_.size(); }
    [[nodiscard]] Eigen::Index knots() const { return omega_.size(); }
    [[nodiscard]] double mu() const { return mu_; }

    struct Derivatives {
        Eigen::VectorXd g_mu, g_k;      // size K
        Eigen::VectorXd h_mumu;         // diagonal of d2/dq_mu2, size K
        Eigen::MatrixXd h_muk;          // K x K, rows q_mu, cols q_k
        Eigen::MatrixXd h_kk;           // K x K
    };

    /// Log-likelihood of full coefficient vectors (size K each); -inf when an
    /// event sees a non-positive intensity.
    [[nodiscard]] double loglik(const Eigen::VectorXd& q_mu, const Eigen::VectorXd& q_k, Derivatives* d = nullptr,
                                bool hessian = false) const {
        const Eigen::Index n = events(), K = knots();
        const Eigen::VectorXd qk_events = q_k.segment(1, n);
        const Eigen::VectorXd lambda = mu_ * q_mu.segment(1, n) + h_ + a_.triangularView<Eigen::StrictlyLower>() * qk_events;
        double value = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!(lambda[j] > 0.0) || !std::isfinite(lambda[j])) return -std::numeric_limits<double>::infinity();
            value += std::log(lambda[j]);
        }
        value -= mu_ * omega_.dot(q_mu) + b_.dot(qk_events) + h_int_;
        if (!d) return value;

        const Eigen::VectorXd inv = lambda.cwiseInverse();
        d->g_mu = -mu_ * omega_;
        d->g_mu.segment(1, n) += mu_ * inv;
        d->g_k = Eigen::VectorXd::Zero(K);
        d->g_k.segment(1, n) = a_.triangularView<Eigen::StrictlyLower>().transpose() * inv - b_;
        if (!hessian) return value;

        const Eigen::VectorXd inv2 = inv.cwiseAbs2();
        d->h_mumu = Eigen::VectorXd::Zero(K);
        d->h_mumu.segment(1, n) = -mu_ * mu_ * inv2;
        const Eigen::MatrixXd scaled = inv.asDiagonal() * a_;  // B = D^{1/2} A
        d->h_muk = Eigen::MatrixXd::Zero(K, K);
        d->h_muk.block(1, 1, n, n) = -mu_ * (inv.asDiagonal() * scaled);
        d->h_kk = Eigen::MatrixXd::Zero(K, K);
        Eigen::MatrixXd btb = Eigen::MatrixXd::Zero(n, n);
        btb.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
        d->h_kk.block(1, 1, n, n) = -btb.selfadjointView<Eigen::Lower>().toDenseMatrix();
        return value;
    }

private:
    double mu_;
    Eigen::VectorXd h_;
    Eigen::MatrixXd a_;
    Eigen::VectorXd b_;
    Eigen::VectorXd omega_;
    double h_int_{0.0};
};

/// Coefficient likelihood for one restriction, with the boundary coefficients
/// (last knot) held fixed. Free vector:
///   fix_qk: q_mu[0..K-2];  tied: q[0..K-2] shared;  free: (q_mu[0..K-2], q_k[0..K-2]).
class NsCoefficientLikelihood {
public:
    NsCoefficientLikelihood(const NsDesign& design, Restriction restriction, double boundary_mu, double boundary_k)
        : design_(&design), restriction_(restriction), boundary_mu_(boundary_mu), boundary_k_(boundary_k) {}

    [[nodiscard]] Eigen::Index block_size() const { return design_->knots() - 1; }
    [[nodiscard]] Eigen::Index dimension() const {
        return restriction_ == Restriction::free ? 2 * block_size() : block_size();
    }
    [[nodiscard]] Restriction restriction() const { return restriction_; }

    void expand(const Eigen::VectorXd& x, Eigen::VectorXd& q_mu, Eigen::VectorXd& q_k) const {
        const Eigen::Index m = block_size();
        q_mu.resize(m + 1);
        q_k.resize(m + 1);
        q_mu.head(m) = x.head(m);
        q_mu[m] = boundary_mu_;
        switch (restriction_) {
            case Restriction::fix_qk: q_k.setOnes(); break;
            case Restriction::tied: q_k = q_mu; break;
            case Restriction::free:
                q_k.head(m) = x.segment(m, m);
                q_k[m] = boundary_k_;
                break;
        }
    }

    double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* g, Eigen::MatrixXd* h) const {
        Eigen::VectorXd q_mu, q_k;
        expand(x, q_mu, q_k);
        if (!g && !h) return design_->loglik(q_mu, q_k);
        NsDesign::Derivatives d;
        const double v = design_->loglik(q_mu, q_k, &d, h != nullptr);
        if (!std::isfinite(v)) return v;
        const Eigen::Index m = block_size();
        if (g) {
            g->resize(dimension());
            switch (restriction_) {
                case Restriction::fix_qk: *g = d.g_mu.head(m); break;
                case Restriction::tied: *g = d.g_mu.head(m) + d.g_k.head(m); break;
                case Restriction::free: *g << d.g_mu.head(m), d.g_k.head(m); break;
            }
        }
        if (h) {
            h->setZero(dimension(), dimension());
            switch (restriction_) {
                case Restriction::fix_qk: h->diagonal() = d.h_mumu.head(m); break;
                case Restriction::tied:
                    *h = d.h_kk.topLeftCorner(m, m) + d.h_muk.topLeftCorner(m, m) +
                         d.h_muk.topLeftCorner(m, m).transpose();
                    h->diagonal() += d.h_mumu.head(m);
                    break;
                case Restriction::free:
                    h->topLeftCorner(m, m).diagonal() = d.h_mumu.head(m);
                    h->topRightCorner(m, m) = d.h_muk.topLeftCorner(m, m);
                    h->bottomLeftCorner(m, m) = d.h_muk.topLeftCorner(m, m).transpose();
                    h->bottomRightCorner(m, m) = d.h_kk.topLeftCorner(m, m);
                    break;
            }
        }
        return v;
    }

private:
    const NsDesign* design_;
    Restriction restriction_;
    double boundary_mu_;
    double boundary_k_;
};

static_assert(optim::CoefficientLikelihood<NsCoefficientLikelihood>);

namespace detail {

inline void check_model(const AnomalyModel& model, const SplineBasis& basis) {
    require(model.q_mu.size() == basis.size() && model.q_k.size() == basis.size(),
            "anomaly coefficients must match the knot count");
    require(model.domain == basis.domain, "model and basis smoothing domains differ");
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace detail

/// Log-likelihood of the nonstationary model mu q_mu(t) + sum K0 q_K(t_i) ...
[[nodiscard]] inline double ns_log_likelihood(const AnomalyModel& model, const SplineBasis& basis,
                                              const Catalog& catalog) {
    detail::check_model(model, basis);
    const NsDesign design(catalog, model.reference, basis);
    const double v = design.loglik(detail::to_eigen(model.q_mu), detail::to_eigen(model.q_k));
    if (!std::isfinite(v))
        fail(ErrorKind::degenerate_likelihood, "nonstationary intensity vanishes at an event time");
    return v;
}

/// Penalized log-likelihood Q = log L - w_mu Phi_mu - w_K Phi_K. Under the tied
/// restriction a single penalty with weight w_mu applies; under fix_qk Phi_K = 0.
[[nodiscard]] inline double penalized_loglik(const AnomalyModel& model, const SplineBasis& basis,
                                             const Catalog& catalog, const PenaltyConfig& penalty) {
    penalty.validate();
    const double ll = ns_log_likelihood(model, basis, catalog);
    const auto wm = interval_weights(basis, penalty.w_mu, model.changepoint, penalty.changepoint_weight);
    double q = ll - weighted_roughness(model.q_mu, basis, wm);
    if (model.restriction == Restriction::free) {
        const auto wk = interval_weights(basis, penalty.w_k, model.changepoint, penalty.changepoint_weight);
        q -= weighted_roughness(model.q_k, basis, wk);
    }
    return q;
}

/// Everything needed to evaluate one (restriction, domain, change point)
/// configuration repeatedly at different hyperparameters.
struct NsProblem {
    const Catalog* catalog;
    SplineBasis basis;
    NsDesign design;
    Restriction restriction;
    std::optional<double> changepoint;
    EtasParams reference;

    NsProblem(const Catalog& cat, Restriction r, SmoothingDomain domain, const EtasParams& ref,
              std::optional<double> cp = std::nullopt)
        : catalog(&cat), basis(build_basis(cat, domain, ref)), design(cat, ref, basis), restriction(r),
          changepoint(cp), reference(ref) {
        if (cp)
            require(*cp > cat.window_start && *cp < cat.window_end,
                    "change point must lie strictly inside the window");
    }

    [[nodiscard]] std::vector<optim::PriorBlock> prior_blocks(const PenaltyConfig& p, double boundary_mu,
                                                              double boundary_k) const {
        std::vector<optim::PriorBlock> blocks;
        blocks.push_back(make_prior_block(basis, interval_weights(basis, p.w_mu, changepoint, p.changepoint_weight),
                                          0, boundary_mu));
        if (restriction == Restriction::free)
            blocks.push_back(make_prior_block(basis,
                                              interval_weights(basis, p.w_k, changepoint, p.changepoint_weight),
                                              static_cast<Eigen::Index>(basis.size()) - 1, boundary_k));
        return blocks;
    }

    [[nodiscard]] NsCoefficientLikelihood likelihood(double boundary_mu, double boundary_k) const {
        return NsCoefficientLikelihood(design, restriction, boundary_mu,
                                       restriction == Restriction::tied ? boundary_mu : boundary_k);
    }

    [[nodiscard]] AnomalyModel model_from(const Eigen::VectorXd& x, double boundary_mu, double boundary_k) const {
        Eigen::VectorXd qm, qk;
        likelihood(boundary_mu, boundary_k).expand(x, qm, qk);
        return {detail::to_std(qm), detail::to_std(qk), restriction, basis.domain, changepoint, reference};
    }
};

struct MapEstimate {
    AnomalyModel model;
    optim::PenalizedResult raw;
    double loglik{0.0};
    double penalized{0.0};
    std::vector<std::string> diagnostics;
};

/// MAP coefficients for fixed weights and boundary coefficients, by projected
/// Newton from the flat (reference) model or from `start`, with nonnegativity enforced.
[[nodiscard]] inline MapEstimate map_estimate(const NsProblem& problem, const PenaltyConfig& penalty,
                                              double boundary_mu = 1.0, double boundary_k = 1.0,
                                              const optim::PenalizedOptions& options = {},
                                              const Eigen::VectorXd* start = nullptr) {
    penalty.validate();
    require(std::isfinite(boundary_mu) && boundary_mu >= 0.0 && std::isfinite(boundary_k) && boundary_k >= 0.0,
            "boundary coefficients must be finite and nonnegative");
    require(problem.catalog->size() >= 2, "MAP estimation needs at least two events");
    const auto lik = problem.likelihood(boundary_mu, boundary_k);
    const auto blocks = problem.prior_blocks(penalty, boundary_mu, boundary_k);
    MapEstimate out;
    out.raw = optim::maximize_penalized(lik, std::span<const optim::PriorBlock>(blocks),
                                        start && start->size() == lik.dimension()
                                            ? *start
                                            : Eigen::VectorXd::Ones(lik.dimension()),
                                        options);
    out.model = problem.model_from(out.raw.x, boundary_mu, boundary_k);
    out.loglik = out.raw.loglik;
    out.penalized = out.raw.value;
    if (!out.raw.converged) out.diagnostics.push_back("MAP not converged: " + out.raw.message);
    if (!out.raw.active.empty())
        out.diagnostics.push_back("nonnegativity active at " + std::to_string(out.raw.active.size()) +
                                  " coefficient(s)");
    return out;
}

/// Convenience form building the basis and design internally.
[[nodiscard]] inline MapEstimate map_estimate(const Catalog& catalog, Restriction restriction,
                                              SmoothingDomain domain, const PenaltyConfig& penalty,
                                              const EtasParams& reference,
                                              std::optional<double> changepoint = std::nullopt) {
    const NsProblem problem(catalog, restriction, domain, reference, changepoint);
    return map_estimate(problem, penalty);
}

/// Intensity of the nonstationary model at t; events at exactly t are excluded.
[[nodiscard]] inline double ns_intensity(const AnomalyModel& model, const SplineBasis& basis,
                                         const Catalog& catalog, double t) {
    detail::check_model(model, basis);
    const auto& r = model.reference;
    double rate = r.mu * basis.interpolate(model.q_mu, t);
    for (std::size_t i = 0; i < catalog.events.size() && catalog.events[i].time < t; ++i) {
        const Event& e = catalog.events[i];
        const double factor = i < catalog.history_count ? 1.0 : model.q_k[i - catalog.history_count + 1];
        rate += factor * r.k0 * std::exp(r.alpha * (e.magnitude - catalog.threshold)) *
                std::pow(t - e.time + r.c, -r.p);
    }
    return rate;
}

/// Integral of the nonstationary intensity over [S, t].
[[nodiscard]] inline double ns_cumulative_intensity(const AnomalyModel& model, const SplineBasis& basis,
                                                    const Catalog& catalog, double t) {
    detail::check_model(model, basis);
    const auto& r = model.reference;
    const double S = catalog.window_start;
    require(t >= S && t <= catalog.window_end, "time outside the observation window");
    double total = 0.0;
    for (std::size_t l = 0; l + 1 < basis.size() && basis.knots[l] < t; ++l) {
        const double hi = std::min(t, basis.knots[l + 1]);
        const double q_hi = basis.interpolate(model.q_mu, hi);
        total += 0.5 * (hi - basis.knots[l]) * (model.q_mu[l] + q_hi);
    }
    total *= r.mu;
    for (std::size_t i = 0; i < catalog.events.size() && catalog.events[i].time < t; ++i) {
        const Event& e = catalog.events[i];
        const double factor = i < catalog.history_count ? 1.0 : model.q_k[i - catalog.history_count + 1];
        const double lower = std::max(S, e.time);
        total += factor * r.k0 * std::exp(r.alpha * (e.magnitude - catalog.threshold)) *
                 detail::power_integral(lower - e.time + r.c, t - e.time + r.c, r.p);
    }
    return total;
}

/// Time transformation under the nonstationary model.
[[nodiscard]] inline ResidualSequence ns_transform_times(const AnomalyModel& model, const SplineBasis& basis,
                                                         const Catalog& catalog) {
    ResidualSequence out;
    for (const Event& e : catalog.in_window())
        out.taus.push_back(ns_cumulative_intensity(model, basis, catalog, e.time));
    out.total = ns_cumulative_intensity(model, basis, catalog, catalog.window_end);
    return out;
}

}  // namespace etas

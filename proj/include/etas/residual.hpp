#pragma once

#include "etas/core.hpp"
#include "etas/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace etas {

struct KsResult {
    double statistic{0.0};
    double p_value{1.0};
    std::size_t n{0};
};

/// Asymptotic Kolmogorov tail Q(x) = 2 sum (-1)^{k-1} exp(-2 k^2 x^2).
[[nodiscard]] inline double kolmogorov_tail(double x) {
    if (x <= 0.0) return 1.0;
    if (x < 0.2) return 1.0;  // series converges slowly here and the tail is 1 to double precision
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        sum += (k % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-18) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

/// One-sample KS test of `sample` against Exp(1). The p-value uses the asymptotic
/// distribution with Stephens' finite-sample scaling (sqrt(n) + 0.12 + 0.11/sqrt(n)).
[[nodiscard]] inline KsResult ks_test_exp1(std::vector<double> sample) {
    KsResult out;
    out.n = sample.size();
    if (sample.empty()) return out;
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = sample[i] > 0.0 ? -std::expm1(-sample[i]) : 0.0;
        out.statistic = std::max({out.statistic, static_cast<double>(i + 1) / n - F,
                                  F - static_cast<double>(i) / n});
    }
    const double rn = std::sqrt(n);
    out.p_value = kolmogorov_tail((rn + 0.12 + 0.11 / rn) * out.statistic);
    return out;
}

/// Gaps of the transformed sequence, starting from tau = 0 at the window start.
[[nodiscard]] inline std::vector<double> transformed_gaps(const ResidualSequence& seq) {
    std::vector<double> gaps;
    gaps.reserve(seq.taus.size());
    double prev = 0.0;
    for (double tau : seq.taus) {
        gaps.push_back(tau - prev);
        prev = tau;
    }
    return gaps;
}

struct ResidualReport {
    ResidualSequence sequence;
    KsResult ks;
};

[[nodiscard]] inline ResidualReport residual_analysis(const EtasParams& params, const Catalog& catalog) {
    ResidualReport out;
    out.sequence = transform_times(params, catalog);
    out.ks = ks_test_exp1(transformed_gaps(out.sequence));
    return out;
}

}  // namespace etas

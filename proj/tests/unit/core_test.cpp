#include "etas/core.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

namespace etas {
namespace {

using testing::naive_intensity;
using testing::quadrature_log_likelihood;

Catalog one_event_at_zero(double mz = 2.0) { return make_catalog({{0.0, mz}}, 0.0, 10.0, mz); }

TEST(OmoriUtsu, KnownValues) {
    EXPECT_DOUBLE_EQ(omori_utsu(1, 1, 1, 0), 1.0);
    EXPECT_DOUBLE_EQ(omori_utsu(1, 1, 2, 1), 0.25);
    // K = 6.54e-2, c = 9.64e-4, p = 0.9 evaluated by an independent calculator.
    EXPECT_NEAR(omori_utsu(6.54e-2, 9.64e-4, 0.900, 0), 33.877270964639614, 1e-10);
    EXPECT_THROW((void)omori_utsu(1, 0, 1, 0), Error);
    EXPECT_THROW((void)omori_utsu(1, 1, 1, -1), Error);
}

TEST(ConditionalIntensity, EmptyCatalogIsBackground) {
    const auto c = make_catalog({}, 0, 10, 2);
    EXPECT_DOUBLE_EQ(conditional_intensity({1.0, 0.5, 0.1, 1.0, 1.2}, c, 3.0), 1.0);
}

TEST(ConditionalIntensity, SingleTerm) {
    const auto c = one_event_at_zero();
    EXPECT_DOUBLE_EQ(conditional_intensity({1, 1, 1, 0.7, 1}, c, 1.0), 1.5);
}

TEST(ConditionalIntensity, EventAtEvaluationTimeExcluded) {
    const auto c = make_catalog({{0.0, 2}, {1.0, 5}}, 0, 10, 2);
    EXPECT_DOUBLE_EQ(conditional_intensity({1, 1, 1, 0.7, 1}, c, 1.0), 1.5);
}

TEST(ConditionalIntensity, MatchesNaiveLoop) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 10);
    for (int trial = 0; trial < 50; ++trial) {
        const auto cat = testing::random_catalog(rng, 5, 0, 10);
        const auto p = testing::random_params(rng);
        const double t = u(rng);
        const double expected = naive_intensity(p, cat, t);
        EXPECT_NEAR(conditional_intensity(p, cat, t), expected, 1e-12 * expected);
    }
}

TEST(ConditionalIntensity, NeverBelowBackground) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 10);
    for (int trial = 0; trial < 200; ++trial) {
        const auto cat = testing::random_catalog(rng, 8, 0, 10);
        const auto p = testing::random_params(rng);
        EXPECT_GE(conditional_intensity(p, cat, u(rng)), p.mu);
    }
}

TEST(ConditionalIntensity, HistoryEventsTrigger) {
    const auto full = make_catalog({{1.0, 3.0}, {6.0, 3.0}}, 0, 10, 2.0);
    const auto with_history = filter_catalog(full, 2.0, 5.0, 10.0, 0.0);
    const auto without = filter_catalog(full, 2.0, 5.0, 10.0, 5.0);
    const EtasParams p{0.5, 0.2, 0.1, 1.0, 1.1};
    EXPECT_GT(conditional_intensity(p, with_history, 7.0), conditional_intensity(p, without, 7.0));
    EXPECT_NEAR(conditional_intensity(p, with_history, 7.0), naive_intensity(p, full, 7.0), 1e-14);
}

TEST(CumulativeIntensity, PoissonIntegral) {
    const auto c = make_catalog({}, 0, 3, 2);
    EXPECT_DOUBLE_EQ(cumulative_intensity({2, 0, 1, 0, 1}, c, 3.0), 6.0);
}

TEST(CumulativeIntensity, LogPrimitive) {
    const auto c = one_event_at_zero();
    EXPECT_NEAR(cumulative_intensity({0, 1, 1, 0, 1}, c, 1.0), std::log(2.0), 1e-15);
}

TEST(CumulativeIntensity, RejectsTimeOutsideWindow) {
    const auto c = one_event_at_zero();
    EXPECT_THROW((void)cumulative_intensity({1, 1, 1, 0, 1}, c, 11.0), Error);
}

TEST(CumulativeIntensity, MatchesQuadrature) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 40; ++trial) {
        auto full = testing::random_catalog(rng, 8, 0, 20);
        const auto cat = filter_catalog(full, full.threshold, 4.0, 20.0, 0.0);
        const auto p = testing::random_params(rng);
        const double t = 4.0 + 16.0 * u(rng);
        const double expected = testing::integrate_piecewise(
            [&](double s) { return naive_intensity(p, cat, s); }, 4.0, t, testing::event_times(cat), p.c);
        EXPECT_NEAR(cumulative_intensity(p, cat, t), expected, 1e-8 * expected);
    }
}

TEST(CumulativeIntensity, Nondecreasing) {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 30; ++trial) {
        const auto cat = testing::random_catalog(rng, 10, 0, 10);
        const auto p = testing::random_params(rng);
        double prev = 0.0;
        for (double t = 0.0; t <= 10.0; t += 0.05) {
            const double v = cumulative_intensity(p, cat, t);
            EXPECT_GE(v, prev);
            prev = v;
        }
    }
}

TEST(LogLikelihood, PoissonReduction) {
    const auto c = make_catalog({{0.2, 3}, {0.5, 3}, {0.9, 3}}, 0, 1, 2);
    EXPECT_NEAR(log_likelihood({2, 0, 1, 1, 1}, c), 0.07944154167983575, 1e-14);
}

TEST(LogLikelihood, EmptyCatalog) {
    const auto c = make_catalog({}, 0, 5, 2);
    EXPECT_DOUBLE_EQ(log_likelihood({1, 0.3, 0.1, 1, 1.1}, c), -5.0);
}

TEST(LogLikelihood, DegenerateIntensityIsDiagnosed) {
    const auto c = make_catalog({{0.5, 3}}, 0, 1, 2);
    try {
        (void)log_likelihood({0, 0, 1, 1, 1}, c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::degenerate_likelihood);
    }
}

TEST(LogLikelihood, MatchesQuadratureOracle) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        const auto cat = testing::random_catalog(rng, 6, 0, 15);
        const auto p = testing::random_params(rng);
        const double expected = quadrature_log_likelihood(p, cat);
        EXPECT_NEAR(log_likelihood(p, cat), expected, 1e-8 * std::abs(expected));
    }
}

TEST(LogLikelihood, InvariantUnderMagnitudeShift) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cat = testing::random_catalog(rng, 12, 0, 15);
        auto shifted = cat;
        for (Event& e : shifted.events) e.magnitude += 1.7;
        shifted.threshold += 1.7;
        const auto p = testing::random_params(rng);
        const double a = log_likelihood(p, cat), b = log_likelihood(p, shifted);
        EXPECT_NEAR(a, b, 1e-12 * std::abs(a));
    }
}

// Five-point central differences of the log-likelihood.
std::array<double, 5> finite_difference_gradient(const EtasParams& p, const Catalog& cat) {
    std::array<double, 5> g{};
    const auto base = p.to_array();
    for (std::size_t i = 0; i < 5; ++i) {
        const double h = 1e-4 * std::max(std::abs(base[i]), 1e-2);
        auto at = [&](double delta) {
            auto v = base;
            v[i] += delta;
            return evaluate_log_likelihood(EtasParams::from_array(v), cat, false).value;
        };
        g[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    }
    return g;
}

TEST(LogLikelihood, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        auto full = testing::random_catalog(rng, 25, 0, 30);
        const auto cat = filter_catalog(full, full.threshold, 3.0, 30.0, 0.0);
        const auto p = testing::random_params(rng);
        const auto g = log_likelihood_gradient(p, cat);
        const auto fd = finite_difference_gradient(p, cat);
        double scale = 0.0;
        for (double v : g) scale = std::max(scale, std::abs(v));
        for (std::size_t i = 0; i < 5; ++i)
            EXPECT_NEAR(g[i], fd[i], 1e-5 * std::max(std::abs(g[i]), 1e-3 * scale)) << kParamNames[i];
    }
}

TEST(LogLikelihood, GradientNearUnitExponent) {
    const auto cat = make_catalog({{0.3, 3}, {1.0, 2.5}, {1.2, 4}, {4, 2.2}}, 0, 6, 2);
    for (double p : {1.0, 1.0 + 1e-9, 1.0 - 1e-6, 1.0 + 1e-3}) {
        const EtasParams prm{0.4, 0.2, 0.05, 0.8, p};
        const auto g = log_likelihood_gradient(prm, cat);
        const auto fd = finite_difference_gradient(prm, cat);
        for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(g[i], fd[i], 1e-5 * std::max(1.0, std::abs(g[i])));
    }
}

TEST(OmoriPrimitive, ContinuousThroughUnitExponent) {
    for (double delta : {1e-3, 0.5, 10.0, 1000.0}) {
        for (double c : {1e-4, 0.01, 1.0}) {
            const double log_form = detail::omori_primitive_log(delta, c);
            for (double p : {1.0 - 1e-9, 1.0 + 1e-9}) {
                EXPECT_NEAR(detail::omori_primitive_power(delta, c, p), log_form, 1e-6 * log_form);
            }
        }
    }
}

TEST(OmoriPrimitive, LogPowerIntegralSymmetricRange) {
    // ln(0.01) = -ln(100); reference value from a 30-digit quadrature.
    EXPECT_NEAR(detail::log_power_integral(0.01, 100.0, 0.9), 6.65010349518607152, 1e-12);
}

TEST(OmoriPrimitive, LogPowerIntegralMatchesQuadrature) {
    for (double p : {0.3, 0.9, 0.999, 1.0, 1.001, 1.3, 2.5}) {
        for (auto [x0, x1] : {std::pair{0.001, 0.5}, std::pair{0.01, 100.0}, std::pair{1.5, 2.0}}) {
            // In y = ln x the integrand y exp((1 - p) y) is smooth.
            const double expected = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                [&](double y) { return y * std::exp((1.0 - p) * y); }, std::log(x0), std::log(x1), 15, 1e-14);
            EXPECT_NEAR(detail::log_power_integral(x0, x1, p), expected, 1e-9 * std::abs(expected) + 1e-12);
        }
    }
}

TEST(CompensatedSum, ExactOnCancellingTerms) {
    std::vector<double> terms{1e16, 1.0, -1e16, 1.0, 1e-3};
    EXPECT_DOUBLE_EQ(detail::sum_descending_compensated(terms), 2.001);
}

TEST(TransformTimes, PoissonLinearRescaling) {
    const auto c = make_catalog({{0.5, 3}, {1.0, 3}}, 0, 2, 2);
    const auto r = transform_times({2, 0, 1, 1, 1}, c);
    ASSERT_EQ(r.taus.size(), 2u);
    EXPECT_DOUBLE_EQ(r.taus[0], 1.0);
    EXPECT_DOUBLE_EQ(r.taus[1], 2.0);
    EXPECT_DOUBLE_EQ(r.total, 4.0);
}

TEST(TransformTimes, MonotoneAndBounded) {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cat = testing::random_catalog(rng, 30, 0, 50);
        const auto p = testing::random_params(rng);
        const auto r = transform_times(p, cat);
        for (std::size_t i = 1; i < r.taus.size(); ++i) EXPECT_GT(r.taus[i], r.taus[i - 1]);
        EXPECT_GE(r.taus.front(), 0.0);
        EXPECT_LE(r.taus.back(), r.total);
        for (std::size_t i = 0; i < r.taus.size(); ++i)
            EXPECT_NEAR(r.taus[i], cumulative_intensity(p, cat, cat.in_window()[i].time), 1e-9 * r.total);
    }
}

TEST(BranchingRatio, FiniteHorizon) {
    const EtasParams p{0.5, 0.02, 0.01, 1.0, 1.2};
    const double beta = 1.273 * std::log(10.0);
    const double expected = 0.02 * beta / (beta - 1.0) * (std::pow(0.01, -0.2) - std::pow(100.01, -0.2)) / 0.2;
    EXPECT_NEAR(branching_ratio(p, beta, 100.0), expected, 1e-12);
    EXPECT_TRUE(std::isinf(branching_ratio({0.5, 0.02, 0.01, 3.0, 1.2}, beta, 100.0)));
}

}  // namespace
}  // namespace etas

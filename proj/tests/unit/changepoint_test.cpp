#include "etas/changepoint.hpp"
#include "etas/simulator.hpp"

#include <gtest/gtest.h>

namespace etas {
namespace {

const EtasParams kTruth{0.5, 0.02, 0.01, 1.0, 1.2};

Catalog stationary(std::uint64_t seed, double T) {
    SimConfig cfg;
    cfg.model = kTruth;
    cfg.window_end = T;
    cfg.b_value = 1.273;
    cfg.m_c = 2.5;
    cfg.seed = seed;
    return simulate_thinning(cfg).catalog;
}

// Background rate jumps sixfold at t_jump.
Catalog jumped(std::uint64_t seed, double T, double t_jump) {
    SimConfig cfg;
    cfg.model = NonstationaryTruth{kTruth, {{0, t_jump, t_jump + 1e-9, T}, {1, 1, 6, 6}}, PiecewiseLinear::constant(1)};
    cfg.window_end = T;
    cfg.b_value = 1.273;
    cfg.m_c = 2.5;
    cfg.seed = seed;
    return simulate_thinning(cfg).catalog;
}

TEST(ChangePointArithmetic, WorkedExamples) {
    EXPECT_NEAR(delta_aic_of(aic12_of(-118.3, 422.9, 0), 442.8), -138.2, 1e-9);
    EXPECT_NEAR(delta_aic_of(aic12_of(-95.4, 434.7, 0), 465.5), -126.2, 1e-9);
    EXPECT_DOUBLE_EQ(aic12_of(1.5, 2.5, 3), 10.0);
    EXPECT_THROW((void)aic12_of(0, 0, -1), Error);
}

TEST(TwoStageFit, AssemblesAic12Exactly) {
    const auto cat = stationary(1, 200);
    const auto r = two_stage_fit(cat, 100.0, 1.5);
    EXPECT_EQ(r.aic12, r.fit_before.aic + r.fit_after.aic + 2.0 * 1.5);
    EXPECT_EQ(r.delta_aic, r.aic12 - r.fit_whole.aic);
    EXPECT_EQ(r.significant, r.delta_aic < 0);
    EXPECT_DOUBLE_EQ(r.relative_probability(), std::exp(-r.delta_aic / 2));
}

TEST(TwoStageFit, PeriodsPartitionTheLikelihood) {
    const auto cat = stationary(2, 200);
    const double t0 = cat.in_window()[cat.size() / 2].time;
    const auto before = period_before(cat, t0);
    const auto after = period_after(cat, t0, false);
    EXPECT_EQ(before.size() + after.size(), cat.size());
    EXPECT_EQ(after.in_window().front().time, t0);
    EXPECT_NEAR(log_likelihood(kTruth, before) + log_likelihood(kTruth, after), log_likelihood(kTruth, cat),
                1e-9 * std::abs(log_likelihood(kTruth, cat)));
}

TEST(TwoStageFit, SplitLikelihoodDominatesWhole) {
    for (std::uint64_t seed = 3; seed < 6; ++seed) {
        const auto cat = stationary(seed, 200);
        const auto r = two_stage_fit(cat, 120.0);
        EXPECT_GE(r.fit_before.loglik + r.fit_after.loglik, r.fit_whole.loglik - 1e-6);
    }
}

TEST(TwoStageFit, HardResetDropsHistory) {
    const auto cat = stationary(7, 200);
    const auto after = period_after(cat, 100.0, true);
    EXPECT_TRUE(after.history().empty());
    EXPECT_EQ(after.window_start, 100.0);
    ChangePointOptions o;
    o.hard_reset = true;
    const auto r = two_stage_fit(cat, 100.0, 0.0, o);
    EXPECT_TRUE(std::isfinite(r.delta_aic));
}

TEST(TwoStageFit, ReferenceConstrainedRefitsOnlyMuAndK0) {
    const auto cat = stationary(8, 200);
    ChangePointOptions o;
    o.reference = EtasParams{0.4, 0.03, 0.02, 0.9, 1.15};
    const auto r = two_stage_fit(cat, 100.0, 0.0, o);
    for (const FitResult* f : {&r.fit_whole, &r.fit_before, &r.fit_after}) {
        EXPECT_EQ(f->k, 2);
        EXPECT_EQ(f->params.c, 0.02);
        EXPECT_EQ(f->params.alpha, 0.9);
        EXPECT_EQ(f->params.p, 1.15);
    }
    EXPECT_NE(r.fit_before.params.mu, r.fit_after.params.mu);
}

TEST(TwoStageFit, EmptyPeriodIsExplicit) {
    const auto cat = make_catalog({{5, 3}, {6, 3}, {7, 3}}, 0, 10, 2.5);
    try {
        (void)two_stage_fit(cat, 2.0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::empty_period);
        EXPECT_NE(std::string(e.what()).find("before"), std::string::npos);
    }
    EXPECT_THROW((void)two_stage_fit(cat, 0.0), Error);
    EXPECT_THROW((void)two_stage_fit(cat, 10.0), Error);
    EXPECT_THROW((void)two_stage_fit(cat, 5.0, -1.0), Error);
}

TEST(SearchChangePoint, SingleCandidateEqualsTwoStage) {
    const auto cat = stationary(9, 150);
    const auto s = search_changepoint(cat, {75.0}, 2.0);
    const auto r = two_stage_fit(cat, 75.0, 2.0);
    EXPECT_EQ(s.best.t0, 75.0);
    EXPECT_EQ(s.best.aic12, r.aic12);
    EXPECT_EQ(s.best.delta_aic, r.delta_aic);
}

TEST(SearchChangePoint, LargerCandidateSetNeverWorse) {
    const auto cat = stationary(10, 120);
    ChangePointOptions o;
    o.reference = kTruth;
    const auto all = default_candidates(cat);
    std::vector<double> half;
    for (std::size_t i = 0; i < all.size(); i += 2) half.push_back(all[i]);
    const auto a = search_changepoint(cat, half, 0.0, o);
    const auto b = search_changepoint(cat, all, 0.0, o);
    EXPECT_LE(b.best.aic12, a.best.aic12);
    EXPECT_THROW((void)search_changepoint(cat, {}, 0.0, o), Error);
}

TEST(SearchChangePoint, SkipsCandidatesLeavingEmptyPeriods) {
    const auto cat = make_catalog({{5, 3}, {6, 3}, {7, 3}, {8, 3}}, 0, 10, 2.5);
    ChangePointOptions o;
    o.reference = kTruth;
    const auto s = search_changepoint(cat, {1.0, 6.0}, 0.0, o);
    EXPECT_EQ(s.skipped, std::vector<double>{1.0});
    EXPECT_EQ(s.best.t0, 6.0);
}

TEST(SearchChangePoint, LocatesPlantedBackgroundJump) {
    ChangePointOptions o;
    o.reference = kTruth;
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto cat = jumped(1000 + seed, 60.0, 30.0);
        const auto s = search_changepoint(cat, default_candidates(cat), 0.0, o);
        const auto ev = cat.in_window();
        const auto true_index = std::lower_bound(ev.begin(), ev.end(), 30.0,
                                                 [](const Event& e, double t) { return e.time < t; }) -
                                ev.begin();
        const auto found = std::lower_bound(ev.begin(), ev.end(), s.best.t0,
                                            [](const Event& e, double t) { return e.time < t; }) -
                           ev.begin();
        hits += std::abs(found - true_index) <= 5 ? 1 : 0;
    }
    EXPECT_GE(hits, 16);
}

}  // namespace
}  // namespace etas

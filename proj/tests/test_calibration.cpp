#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace uixpose;
using namespace uixpose::testing;

namespace {

std::vector<double> ramp(std::size_t n, double slope = 1.0) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = slope * static_cast<double>(i);
    return v;
}

std::vector<double> noise(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

void put(PairedDeltaTable& t, const std::string& role, std::vector<double> col) {
    t.columns[role] = std::move(col);
    t.roles[role] = role;
}

}  // namespace

TEST(RankNormalise, Examples) {
    EXPECT_EQ(rank_normalise({5, 1, 3}), (std::vector<double>{1.0, 0.0, 0.5}));
    EXPECT_EQ(rank_normalise({2, 2, 2}), (std::vector<double>{0.5, 0.5, 0.5}));
    EXPECT_EQ(rank_normalise({10}), (std::vector<double>{0.5}));
    EXPECT_TRUE(rank_normalise({}).empty());
}

TEST(RankNormalise, MonotoneInvariance) {
    std::mt19937_64 rng(3);
    auto x = noise(rng, 40);
    std::vector<double> y;
    for (double v : x) y.push_back(std::exp(2.0 * v) + 7.0);
    EXPECT_EQ(rank_normalise(x), rank_normalise(y));
}

TEST(AverageRanks, Ties) {
    EXPECT_EQ(average_ranks({10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
}

TEST(BlendedStrength, Examples) {
    const std::vector<double> x{1, 2, 3, 4};
    EXPECT_NEAR(blended_strength(x, x).strength, 1.0, 1e-12);
    EXPECT_NEAR(blended_strength(x, {-1, -2, -3, -4}).strength, 1.0, 1e-12);
    auto s = blended_strength(x, {1, 3, 2, 4});
    EXPECT_NEAR(s.pearson, 0.8, 1e-12);
    EXPECT_NEAR(s.spearman, 0.8, 1e-12);
    EXPECT_NEAR(s.strength, 0.8, 1e-12);
}

TEST(BlendedStrength, ConstantSeries) {
    auto s = blended_strength({1, 2, 3, 4}, {5, 5, 5, 5});
    EXPECT_EQ(s.strength, 0.0);
    EXPECT_EQ(s.p_value, 1.0);
}

TEST(BlendedStrength, Errors) {
    EXPECT_THROW(blended_strength({1, 2, 3}, {1, 2}), Error);
    EXPECT_THROW(blended_strength({1, 2}, {1, 2}), Error);
}

TEST(BlendedStrength, PValueIsDoubledTwoSidedT) {
    // r = 0.8 at n = 4: t = 0.8 * sqrt(2 / 0.36) = 1.8856, two-sided p = 0.2000 with 2 dof.
    EXPECT_NEAR(correlation_p_value(0.8, 4), 0.2, 1e-9);
    EXPECT_NEAR(blended_strength({1, 2, 3, 4}, {1, 3, 2, 4}).p_value, 0.4, 1e-9);
    EXPECT_EQ(correlation_p_value(1.0, 10), 0.0);
    EXPECT_EQ(correlation_p_value(0.5, 2), 1.0);
}

TEST(Bh, Examples) {
    EXPECT_EQ(bh_select({0.01, 0.02, 0.04, 0.5}, 0.05), (std::vector<bool>{true, true, false, false}));
    EXPECT_EQ(bh_select({1, 1, 1}, 0.05), (std::vector<bool>{false, false, false}));
    EXPECT_EQ(bh_select({0.01}, 0.05), (std::vector<bool>{true}));
    EXPECT_TRUE(bh_select({}, 0.05).empty());
}

TEST(Bh, StepUpRescuesEarlierFailures) {
    // 0.03 > 1*0.05/3 but the largest passing rank (3) carries it along.
    EXPECT_EQ(bh_select({0.03, 0.04, 0.045}, 0.05), (std::vector<bool>{true, true, true}));
}

TEST(Bh, OrderIndependent) {
    EXPECT_EQ(bh_select({0.5, 0.04, 0.02, 0.01}, 0.05), (std::vector<bool>{false, false, true, true}));
}

TEST(Weights, NormaliseAndCap) {
    auto w = normalise_weights({0.6, 0.2});
    EXPECT_NEAR(w[0], 0.75, 1e-12);
    EXPECT_NEAR(w[1], 0.25, 1e-12);
    EXPECT_EQ(normalise_weights({0, 0}), (std::vector<double>{0, 0}));
    auto c = cap_total({0.3, 0.2}, 0.25);
    EXPECT_NEAR(c[0], 0.15, 1e-12);
    EXPECT_NEAR(c[1], 0.10, 1e-12);
    EXPECT_EQ(cap_total({0.1, 0.1}, 0.25), (std::vector<double>{0.1, 0.1}));
}

TEST(Weights, StrengthProportional) {
    std::vector<SurrogateScore> s(3);
    s[0].selected = s[1].selected = true;
    s[0].strength.strength = 0.6;
    s[1].strength.strength = 0.2;
    s[2].strength.strength = 0.9;  // not selected
    detail::weights_from_strength(s);
    EXPECT_NEAR(s[0].weight, 0.75, 1e-12);
    EXPECT_NEAR(s[1].weight, 0.25, 1e-12);
    EXPECT_EQ(s[2].weight, 0.0);
}

TEST(Rebalance, LevelsScaledDown) {
    auto a = rebalance_rates_over_levels({0.2, 0.2, 0.35, 0.25});
    EXPECT_NEAR(a[0], 0.2, 1e-12);
    EXPECT_NEAR(a[1], 0.2, 1e-12);
    EXPECT_NEAR(a[2], 0.35 * 0.4 / 0.6, 1e-12);
    EXPECT_NEAR(a[3], 0.25 * 0.4 / 0.6, 1e-12);
    EXPECT_NEAR(a[2], 0.2333, 1e-4);
    EXPECT_NEAR(a[3], 0.1667, 1e-4);
    EXPECT_NEAR(a[0] + a[1], a[2] + a[3], 1e-12);
    auto ok = rebalance_rates_over_levels({0.4, 0.3, 0.2, 0.1});
    EXPECT_EQ(ok, (std::array<double, 4>{0.4, 0.3, 0.2, 0.1}));
}

TEST(CrossCorrelation, IdenticalSeriesAtLagZero) {
    auto x = ramp(20);
    EXPECT_NEAR(mean_abs_cross_correlation(x, x, 0), 1.0, 1e-12);
    EXPECT_NEAR(mean_abs_cross_correlation(x, x, 3), 1.0, 1e-12);
}

TEST(CalibrateH, SingleStrongSurrogate) {
    PairedDeltaTable t;
    put(t, "physical.throughput", ramp(30));
    put(t, "h.requests", ramp(30, 2.0));
    auto r = calibrate_h(t);
    ASSERT_TRUE(r.find("h.requests")->selected);
    EXPECT_NEAR(r.weight("h.requests"), 1.0, 1e-12);
    EXPECT_FALSE(r.find("h.failures")->present);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(CalibrateH, NoiseShrinksAndFallsBackWithWarning) {
    std::mt19937_64 rng(1234);
    PairedDeltaTable t;
    put(t, "physical.throughput", noise(rng, 50));
    put(t, "h.requests", noise(rng, 50));
    put(t, "h.failures", noise(rng, 50));
    auto r = calibrate_h(t);
    EXPECT_FALSE(r.find("h.requests")->selected);
    EXPECT_FALSE(r.find("h.failures")->selected);
    ASSERT_FALSE(r.warnings.empty());
    EXPECT_EQ(r.warnings[0].rfind("WARNING", 0), 0u);
    EXPECT_NEAR(r.weight("h.requests"), 0.5, 1e-12);
    EXPECT_NEAR(r.weight("h.failures"), 0.5, 1e-12);
}

TEST(CalibrateH, SpilloverAndAnchor) {
    PairedDeltaTable t;
    put(t, "physical.throughput", ramp(30));
    put(t, "physical.memory", ramp(30, 3.0));
    put(t, "physical.traffic_volume", ramp(30, 5.0));
    put(t, "h.requests", ramp(30));
    auto r = calibrate_h(t);
    EXPECT_NEAR(r.spillover, 0.2, 1e-9);
    ASSERT_TRUE(r.baseline_anchor.has_value());
    EXPECT_NEAR(*r.baseline_anchor, 1.0, 1e-12);
}

TEST(CalibrateH, MissingThroughputThrows) {
    PairedDeltaTable t;
    put(t, "h.requests", ramp(10));
    EXPECT_THROW(calibrate_h(t), Error);
}

TEST(Rebalance, InequalityHoldsExactly) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 10000; ++k) {
        auto a = rebalance_rates_over_levels({u(rng), u(rng), u(rng), u(rng)});
        ASSERT_LE(a[2] + a[3], a[0] + a[1]);
        ASSERT_GE(a[2], 0.0);
        ASSERT_GE(a[3], 0.0);
    }
}

TEST(CalibrateM, RebalancedMixtureAndBudgets) {
    std::mt19937_64 rng(5);
    const std::size_t n = 60;
    auto mem = ramp(n);
    PairedDeltaTable t;
    put(t, "physical.throughput", ramp(n));
    put(t, "physical.memory", mem);
    // Levels track memory closely, rates only loosely: the rebalance has to engage.
    std::vector<double> rate(n), level(n);
    std::normal_distribution<double> d(0.0, 25.0);
    for (std::size_t i = 0; i < n; ++i) {
        rate[i] = mem[i] + d(rng);
        level[i] = mem[i];
    }
    put(t, "m.pss_rate", rate);
    put(t, "m.heap_pressure", level);
    put(t, "m.swap", level);
    put(t, "m.binder", ramp(n));
    put(t, "m.webview", ramp(n));
    put(t, "m.ui_churn", ramp(n));
    auto m = calibrate_m(t);
    EXPECT_GE(m.alpha[0] + m.alpha[1], m.alpha[2] + m.alpha[3] - 1e-12);
    EXPECT_NEAR(m.beta_ipc + m.beta_wv, 0.25, 1e-12);
    EXPECT_NEAR(m.gamma_ui, 0.20, 1e-12);
    EXPECT_GT(m.tau_mem, 0.0);
    EXPECT_LE(m.tau_mem, 1.0);
}

TEST(CalibrateM, NothingSignificantGivesZeroMixture) {
    std::mt19937_64 rng(9);
    PairedDeltaTable t;
    put(t, "physical.throughput", noise(rng, 30));
    put(t, "physical.memory", noise(rng, 30));
    put(t, "m.pss_rate", std::vector<double>(30, 1.0));
    auto m = calibrate_m(t);
    EXPECT_EQ(m.alpha, (std::array<double, 4>{0, 0, 0, 0}));
    EXPECT_EQ(m.tau_mem, 1.0);
    EXPECT_FALSE(m.warnings.empty());
}

TEST(CalibrateR, FourEqualColumns) {
    PairedDeltaTable t;
    put(t, "physical.memory", ramp(20));
    for (const char* r : {"r.pss", "r.heap", "r.pressure", "r.swap"}) put(t, r, ramp(20));
    auto r = calibrate_r(t);
    for (double a : r.alpha) EXPECT_NEAR(a, 0.25, 1e-12);
    EXPECT_FALSE(r.used_default);
}

TEST(CalibrateR, ThreeSurvivors) {
    PairedDeltaTable t;
    put(t, "physical.memory", ramp(20));
    for (const char* r : {"r.pss", "r.pressure", "r.swap"}) put(t, r, ramp(20));
    auto r = calibrate_r(t);
    EXPECT_NEAR(r.alpha[0], 1.0 / 3.0, 1e-12);
    EXPECT_EQ(r.alpha[1], 0.0);
    EXPECT_NEAR(r.alpha[2], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.alpha[3], 1.0 / 3.0, 1e-12);
}

TEST(CalibrateR, AllAbsentUsesDefault) {
    PairedDeltaTable t;
    put(t, "physical.memory", ramp(20));
    auto r = calibrate_r(t);
    EXPECT_TRUE(r.used_default);
    EXPECT_EQ(r.alpha, kDefaultCorroboratorMix);
    EXPECT_EQ(r.alpha, RChannelConfig{}.alpha);
}

TEST(PairedDeltaTable, CsvAndRoles) {
    auto t = PairedDeltaTable::parse_csv("thr,req,noise\n1,2,5\n2,4,3\n3,6,4\n4,8,1\n");
    t.apply_roles(json::parse(R"({"thr":"physical.throughput","req":"h.requests"})"));
    EXPECT_EQ(t.rows(), 4u);
    EXPECT_TRUE(t.check().empty());
    ASSERT_NE(t.role("h.requests"), nullptr);
    EXPECT_EQ((*t.role("h.requests"))[3], 8.0);
    EXPECT_EQ(t.role("h.failures"), nullptr);
    EXPECT_THROW(PairedDeltaTable::parse_csv("a,b\n1\n"), ParseError);
    EXPECT_THROW(PairedDeltaTable::parse_csv("a\nx\n"), ParseError);
    EXPECT_THROW(t.apply_roles(json::array()), ParseError);
}

TEST(PairedDeltaTable, CheckReportsProblems) {
    PairedDeltaTable t;
    t.columns["a"] = {1, 2};
    t.roles["h.requests"] = "zzz";
    EXPECT_EQ(t.check().size(), 2u);
}

TEST(CalibrationFragment, LoadsIntoConfig) {
    PairedDeltaTable t;
    put(t, "physical.throughput", ramp(30));
    put(t, "physical.memory", ramp(30));
    put(t, "h.requests", ramp(30));
    put(t, "m.pss_rate", ramp(30));
    put(t, "r.pss", ramp(30));
    auto h = calibrate_h(t);
    auto m = calibrate_m(t);
    auto r = calibrate_r(t);
    EngineConfig cfg;
    apply_config_json(cfg, calibration_fragment(h, m, r));
    EXPECT_NEAR(cfg.h.w_r, 1.0, 1e-12);
    EXPECT_EQ(cfg.h.w_f, 0.0);
    EXPECT_NEAR(cfg.m.alpha[0], 1.0, 1e-12);
    EXPECT_NEAR(cfg.r.alpha[0], 1.0, 1e-12);
    EXPECT_NO_THROW(cfg.validate());
    auto rep = calibration_report(h, m, r);
    EXPECT_EQ(rep["h"]["surrogates"].size(), kHSurrogates.size());
}

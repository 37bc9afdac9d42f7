#include <gtest/gtest.h>

#include "common.hpp"
#include "pdnac/markov.hpp"
#include "pdnac/mlmc.hpp"
#include "pdnac/simulate.hpp"

using namespace pdnac;

TEST(Mlmc, LevelLaw) {
    Rng rng = make_stream(1, StreamTag::generator);
    const MlmcConfig cfg{1024};
    int ones = 0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) ones += draw_level(rng, cfg).level == 1;
    EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 0.002);
}

TEST(Mlmc, ExpectedLength) {
    EXPECT_DOUBLE_EQ(expected_traj_len(MlmcConfig{1024}), 10.0 + std::ldexp(1.0, -10));
    Rng rng = make_stream(2, StreamTag::generator);
    std::vector<long> lens;
    for (int i = 0; i < 100000; ++i) lens.push_back(draw_level(rng, MlmcConfig{1024}).traj_len);
    const MlmcCostReport r = mlmc_cost_report(lens, MlmcConfig{1024});
    EXPECT_NEAR(r.mean_samples, 10.0, 0.3);
    EXPECT_LE(r.p99_samples, 1024);
    EXPECT_LE(r.max_samples, 1024);
    EXPECT_TRUE(r.in_band);
}

TEST(Mlmc, UnitTmaxAlwaysUsesOneSample) {
    Rng rng = make_stream(3, StreamTag::generator);
    for (int i = 0; i < 1000; ++i) {
        const MlmcDraw d = draw_level(rng, MlmcConfig{1});
        EXPECT_EQ(d.traj_len, 1);
        EXPECT_FALSE(d.corrected);
    }
}

TEST(Mlmc, RejectsBadTmax) { EXPECT_THROW(MlmcConfig{0}.validate(), ConfigError); }

TEST(Mlmc, ConstantEstimatorIsExact) {
    const VectorXd v = (VectorXd(2) << 0.25, -3.0).finished();
    for (int q = 1; q <= 8; ++q) {
        const MlmcDraw d = make_draw(q, MlmcConfig{64});
        const std::vector<Transition> traj(static_cast<std::size_t>(d.traj_len));
        EXPECT_LE((mlmc_estimate(traj, d, [&](const Transition&) { return v; }) - v).norm(), 1e-12);
    }
}

TEST(Mlmc, LevelOneAlgebra) {
    const MlmcDraw d = make_draw(1, MlmcConfig{8});
    ASSERT_EQ(d.traj_len, 2);
    std::vector<Transition> traj(2);
    traj[0].reward = 0.3;
    traj[1].reward = 0.9;
    const auto f = [](const Transition& z) { return VectorXd::Constant(1, z.reward); };
    // x0 + 2 ((x0 + x1)/2 - x0) = x1
    EXPECT_NEAR(mlmc_estimate(traj, d, f)(0), 0.9, 1e-15);
}

TEST(Mlmc, TelescopingMatchesWeights) {
    Rng rng = make_stream(4, StreamTag::generator);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int q = 1; q <= 6; ++q) {
        const MlmcDraw d = make_draw(q, MlmcConfig{64});
        std::vector<Transition> traj(static_cast<std::size_t>(d.traj_len));
        for (auto& z : traj) z.reward = unit(rng);
        const auto f = [](const Transition& z) { return VectorXd::Constant(1, z.reward); };
        const double n = static_cast<double>(d.traj_len);
        double all = 0, lower = 0;
        for (long t = 0; t < d.traj_len; ++t) {
            all += traj[static_cast<std::size_t>(t)].reward;
            if (t < d.traj_len / 2) lower += traj[static_cast<std::size_t>(t)].reward;
        }
        const double expected = traj[0].reward + n * (all / n - lower / (n / 2));
        const double est = mlmc_estimate(traj, d, f)(0);
        EXPECT_NEAR(est, expected, 1e-12);
        double by_weights = 0;
        for (long t = 0; t < d.traj_len; ++t) by_weights += mlmc_weight(d, t) * traj[static_cast<std::size_t>(t)].reward;
        EXPECT_NEAR(est, by_weights, 1e-12);
    }
}

TEST(Mlmc, UnbiasedOnIidSigns) {
    const TabularCmdp m = test::chain(MatrixXd::Constant(2, 2, 0.5), (VectorXd(2) << 1.0, 0.0).finished());
    const auto pi = PolicyTable::from_probs(uniform_policy(2, 1));
    const MlmcConfig cfg{64};
    ChainCursor cur = ChainCursor::start(m, 7);
    const auto f = [](const Transition& z) { return VectorXd::Constant(1, 2.0 * z.reward - 1.0); };
    double sum = 0, sum2 = 0;
    const int n = 100000;
    std::vector<Transition> traj;
    for (int i = 0; i < n; ++i) {
        cur.switch_stream(0, StreamTag::critic, static_cast<std::uint64_t>(i));
        const MlmcDraw d = draw_level(cur.rng(), cfg);
        sample_trajectory_into(m, pi, cur, d.traj_len, traj);
        const double x = mlmc_estimate(traj, d, f)(0);
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean), 4.0 * se);
}

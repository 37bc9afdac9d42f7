#include <gtest/gtest.h>

#include <filesystem>

#include "common.hpp"
#include "pdnac/io.hpp"
#include "pdnac/markov.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/simulate.hpp"

using namespace pdnac;

TEST(Cmdp, RejectsBadRowSum) {
    MatrixXd P(2, 2);
    P << 0.5, 0.4, 0.5, 0.5;
    EXPECT_THROW(test::chain(P), ConfigError);
}

TEST(Cmdp, RejectsNegativeProbability) {
    MatrixXd P(2, 2);
    P << 1.1, -0.1, 0.5, 0.5;
    EXPECT_THROW(test::chain(P), ConfigError);
}

TEST(Cmdp, RejectsOutOfRangeSignals) {
    MatrixXd P(2, 2);
    P << 0.5, 0.5, 0.5, 0.5;
    EXPECT_THROW(test::chain(P, VectorXd::Constant(2, 1.5)), ConfigError);
    EXPECT_THROW(test::chain(P, VectorXd::Zero(2), VectorXd::Constant(2, -1.5)), ConfigError);
}

TEST(Cmdp, RejectsShapeMismatch) {
    EXPECT_THROW(TabularCmdp(2, 2, MatrixXd::Constant(3, 2, 0.5), MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2),
                             VectorXd::Constant(2, 0.5)),
                 ConfigError);
}

TEST(Simulate, SingleStateTrajectory) {
    const TabularCmdp m(1, 1, MatrixXd::Ones(1, 1), MatrixXd::Constant(1, 1, 0.5), MatrixXd::Constant(1, 1, -0.25),
                        VectorXd::Ones(1));
    ChainCursor cur = ChainCursor::start(m, 3);
    const auto traj = sample_trajectory(m, PolicyTable::from_probs(uniform_policy(1, 1)), cur, 5);
    ASSERT_EQ(traj.size(), 5u);
    for (const auto& z : traj) {
        EXPECT_EQ(z.s, 0);
        EXPECT_EQ(z.a, 0);
        EXPECT_EQ(z.s_next, 0);
        EXPECT_EQ(z.reward, 0.5);
        EXPECT_EQ(z.cost, -0.25);
    }
}

TEST(Simulate, DeterministicDynamics) {
    MatrixXd P(2, 2);
    P << 0, 1, 1, 0;
    const TabularCmdp m = test::chain(P);
    ChainCursor cur(0, 1);
    const auto traj = sample_trajectory(m, PolicyTable::from_probs(uniform_policy(2, 1)), cur, 6);
    for (std::size_t t = 0; t < traj.size(); ++t) {
        EXPECT_EQ(traj[t].s, static_cast<Index>(t % 2));
        EXPECT_EQ(traj[t].s_next, static_cast<Index>((t + 1) % 2));
    }
}

TEST(Simulate, UniformFrequencies) {
    const TabularCmdp m = test::chain(MatrixXd::Constant(2, 2, 0.5));
    ChainCursor cur = ChainCursor::start(m, 42);
    const auto traj = sample_trajectory(m, PolicyTable::from_probs(uniform_policy(2, 1)), cur, 100000);
    double ones = 0;
    for (const auto& z : traj) ones += static_cast<double>(z.s);
    EXPECT_NEAR(ones / 1e5, 0.5, 0.01);
}

TEST(Simulate, Determinism) {
    const TabularCmdp m = make_random_ergodic(4, 3, 5, 0.2);
    const auto pi = PolicyTable::from_probs(uniform_policy(4, 3));
    ChainCursor a = ChainCursor::start(m, 9), b = ChainCursor::start(m, 9);
    const auto ta = sample_trajectory(m, pi, a, 500);
    const auto tb = sample_trajectory(m, pi, b, 500);
    for (std::size_t t = 0; t < ta.size(); ++t) {
        EXPECT_EQ(ta[t].s, tb[t].s);
        EXPECT_EQ(ta[t].a, tb[t].a);
        EXPECT_EQ(ta[t].s_next, tb[t].s_next);
    }
}

TEST(Simulate, NoResetConcatenation) {
    const TabularCmdp m = make_random_ergodic(4, 2, 7, 0.3);
    const auto pi = PolicyTable::from_probs(uniform_policy(4, 2));
    ChainCursor cur = ChainCursor::start(m, 1);
    const auto first = sample_trajectory(m, pi, cur, 50);
    const auto second = sample_trajectory(m, pi, cur, 50);
    EXPECT_EQ(second.front().s, first.back().s_next);
    for (std::size_t t = 1; t < first.size(); ++t) EXPECT_EQ(first[t].s, first[t - 1].s_next);
}

TEST(Simulate, RejectsZeroLength) {
    const TabularCmdp m = make_random_ergodic(2, 2, 1, 0.5);
    ChainCursor cur(0, 0);
    EXPECT_THROW(sample_trajectory(m, PolicyTable::from_probs(uniform_policy(2, 2)), cur, 0), ConfigError);
}

TEST(Generator, FloorAndDeterminism) {
    const TabularCmdp a = make_random_ergodic(5, 3, 11, 0.25);
    const TabularCmdp b = make_random_ergodic(5, 3, 11, 0.25);
    EXPECT_GE(a.transition().minCoeff(), 0.05 - 1e-12);
    EXPECT_EQ(a.transition(), b.transition());
    EXPECT_EQ(a.reward(), b.reward());
    EXPECT_EQ(a.cost(), b.cost());
    EXPECT_TRUE(check_ergodic(a, 50, 1));
    EXPECT_THROW(make_random_ergodic(3, 2, 0, 0.0), ConfigError);
}

TEST(Ergodicity, IdentityAndSwapChainsFail) {
    EXPECT_FALSE(check_ergodic(test::chain(MatrixXd::Identity(2, 2)), 10, 0));
    MatrixXd swap(2, 2);
    swap << 0, 1, 1, 0;
    EXPECT_FALSE(check_ergodic(test::chain(swap), 10, 0));
    EXPECT_EQ(chain_period(swap), 2);
}

TEST(Ergodicity, BenchmarkPasses) { EXPECT_TRUE(check_ergodic(test::benchmark(), 50, 1)); }

TEST(Io, RoundTrip) {
    const TabularCmdp m = make_random_ergodic(3, 2, 4, 0.3);
    const auto path = std::filesystem::temp_directory_path() / "pdnac_io_round_trip.json";
    save_cmdp(path, m);
    const TabularCmdp back = load_cmdp(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.transition(), m.transition());
    EXPECT_EQ(back.reward(), m.reward());
    EXPECT_EQ(back.cost(), m.cost());
    EXPECT_EQ(back.initial_dist(), m.initial_dist());
    EXPECT_EQ(back.meta().seed, m.meta().seed);
}

TEST(Io, FormatDoubleRoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, 447.0 / 700.0, -2.5e-17, 1e300}) EXPECT_EQ(std::stod(format_double(x)), x);
}

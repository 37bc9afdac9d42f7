#include <gtest/gtest.h>

#include "common.hpp"
#include "pdnac/io.hpp"
#include "pdnac/markov.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/simulate.hpp"

using namespace pdnac;

namespace {

VectorXd random_theta(Index n, std::uint64_t seed, double scale = 1.0) {
    Rng rng = make_stream(seed, StreamTag::generator);
    std::normal_distribution<double> normal(0.0, scale);
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

MatrixXd two_state_kernel() {
    MatrixXd P(2, 2);
    P << 0.9, 0.1, 0.2, 0.8;
    return P;
}

}  // namespace

TEST(Stationary, TwoStateChain) {
    const TabularCmdp m = test::chain(two_state_kernel());
    const StationaryInfo info = stationary(m, uniform_policy(2, 1));
    EXPECT_NEAR(info.d(0), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(info.d(1), 1.0 / 3.0, 1e-12);
}

TEST(Stationary, RankOneChainMixesInOneStep) {
    MatrixXd P(3, 3);
    P.rowwise() = Eigen::RowVector3d(0.2, 0.5, 0.3);
    const TabularCmdp m = test::chain(P);
    EXPECT_EQ(stationary(m, uniform_policy(3, 1)).mixing_time, 1);
}

TEST(Stationary, ReducibleChainIsRejected) {
    const TabularCmdp m = test::chain(MatrixXd::Identity(2, 2));
    EXPECT_THROW(stationary(m, uniform_policy(2, 1)), ErgodicityError);
}

TEST(Values, SingleState) {
    const TabularCmdp m(1, 2, MatrixXd::Ones(2, 1), (MatrixXd(1, 2) << 0.2, 0.6).finished(), MatrixXd::Zero(1, 2),
                        VectorXd::Ones(1));
    const ValueBundle v = exact_values(m, uniform_policy(1, 2), Signal::reward);
    EXPECT_NEAR(v.J, 0.4, 1e-15);
    EXPECT_NEAR(v.V(0), 0.0, 1e-15);
    EXPECT_NEAR(v.A(0, 0), -0.2, 1e-15);
    EXPECT_NEAR(v.A(0, 1), 0.2, 1e-15);
}

TEST(Values, BellmanResidualAndCentering) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TabularCmdp m = make_random_ergodic(4, 3, seed, 0.2);
        const auto pi = ParamPolicy::tabular(4, 3, random_theta(12, seed + 100));
        const StationaryInfo info = stationary(m, pi);
        for (Signal g : {Signal::reward, Signal::cost}) {
            const ValueBundle v = exact_values(m, pi, g);
            EXPECT_LE(bellman_residual(m, m.signal(g), v), 1e-10);
            EXPECT_NEAR(info.d.dot(v.V), 0.0, 1e-12);
            EXPECT_NEAR(info.nu.cwiseProduct(v.A).sum(), 0.0, 1e-12);
            EXPECT_LE(v.V.cwiseAbs().maxCoeff(), 5.0 * static_cast<double>(info.mixing_time));
        }
    }
}

TEST(Values, MonteCarloAverage) {
    const TabularCmdp m = test::benchmark();
    const auto pi = ParamPolicy::tabular(2, 2, random_theta(4, 1));
    ChainCursor cur = ChainCursor::start(m, 5);
    const auto traj = sample_trajectory(m, pi, cur, 200000);
    double sum = 0;
    for (const auto& z : traj) sum += z.reward;
    EXPECT_NEAR(sum / 2e5, exact_values(m, pi, Signal::reward).J, 0.01);
}

TEST(Gradient, MatchesFiniteDifference) {
    const TabularCmdp m = make_random_ergodic(3, 2, 21, 0.3);
    const auto pi = ParamPolicy::tabular(3, 2, random_theta(6, 22));
    const VectorXd g = exact_policy_gradient(m, pi, Signal::reward);
    const double h = 1e-5;
    VectorXd fd(6);
    for (Index i = 0; i < 6; ++i) {
        VectorXd tp = pi.theta(), tm = pi.theta();
        tp(i) += h;
        tm(i) -= h;
        fd(i) = (exact_values(m, pi.with_theta(tp), Signal::reward).J -
                 exact_values(m, pi.with_theta(tm), Signal::reward).J) /
                (2 * h);
    }
    EXPECT_LE((fd - g).norm() / std::max(g.norm(), 1e-3), 1e-5);
}

TEST(Gradient, ConstantRewardHasZeroGradient) {
    const TabularCmdp base = make_random_ergodic(3, 2, 23, 0.3);
    const TabularCmdp m = base.with_signals(MatrixXd::Constant(3, 2, 0.7), base.cost());
    EXPECT_LE(exact_policy_gradient(m, ParamPolicy::tabular(3, 2, random_theta(6, 24)), Signal::reward).norm(), 1e-12);
}

TEST(Gradient, BoundedByMixingTime) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TabularCmdp m = make_random_ergodic(4, 3, seed + 40, 0.2);
        const auto pi = ParamPolicy::tabular(4, 3, random_theta(12, seed + 60, 2.0));
        const double tau = static_cast<double>(stationary(m, pi).mixing_time);
        for (Signal g : {Signal::reward, Signal::cost})
            EXPECT_LE(exact_policy_gradient(m, pi, g).norm(), 6.0 * tau * pi.score_bound());
    }
}

TEST(Fisher, PositiveSemidefinite) {
    const TabularCmdp m = make_random_ergodic(3, 3, 25, 0.3);
    const MatrixXd f = exact_fisher(m, ParamPolicy::tabular(3, 3, random_theta(9, 26)));
    EXPECT_LE((f - f.transpose()).norm(), 1e-14);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(f).eigenvalues()(0), -1e-12);
}

TEST(Npg, SolvesRidgeSystemAndMinimizesQuadratic) {
    const TabularCmdp m = make_random_ergodic(3, 2, 27, 0.3);
    const auto pi = ParamPolicy::tabular(3, 2, random_theta(6, 28));
    const double mu = 1e-3;
    const MatrixXd F = exact_fisher(m, pi);
    const VectorXd g = exact_policy_gradient(m, pi, Signal::reward);
    const VectorXd w = exact_npg(m, pi, Signal::reward, mu);
    const MatrixXd reg = F + mu * MatrixXd::Identity(6, 6);
    EXPECT_LE((reg * w - g).norm(), 1e-10);
    const auto loss = [&](const VectorXd& x) { return 0.5 * x.dot(reg * x) - g.dot(x); };
    for (std::uint64_t k = 0; k < 20; ++k) EXPECT_GE(loss(w + 0.1 * random_theta(6, 200 + k)), loss(w));
}

TEST(Npg, MinimumNormWithoutRidge) {
    const TabularCmdp m = make_random_ergodic(3, 2, 29, 0.3);
    const auto pi = ParamPolicy::tabular(3, 2, random_theta(6, 30));
    const MatrixXd F = exact_fisher(m, pi);
    const VectorXd g = exact_policy_gradient(m, pi, Signal::cost);
    const VectorXd w = exact_npg(m, pi, Signal::cost, 0.0);
    EXPECT_LE((F * w - g).norm(), 1e-9);
    // tabular scores are orthogonal to per-state constant shifts
    for (Index s = 0; s < 3; ++s) EXPECT_NEAR(w.segment(s * 2, 2).sum(), 0.0, 1e-9);
}

TEST(CriticFixpoint, ConstantFeatureIsRejected) {
    const TabularCmdp m = test::benchmark();
    EXPECT_THROW(exact_critic_fixpoint(m, uniform_policy(2, 2), FeatureMap::constant(2), 2.0, Signal::reward),
                 AssumptionError);
}

TEST(CriticFixpoint, OneHotRecoversValues) {
    const TabularCmdp m = test::chain(two_state_kernel(), (VectorXd(2) << 1.0, 0.0).finished());
    const ValueBundle v = exact_values(m, uniform_policy(2, 1), Signal::reward);
    const CriticFixpoint fp = exact_critic_fixpoint(m, uniform_policy(2, 1), FeatureMap::one_hot(2), 2.0, Signal::reward);
    EXPECT_NEAR(fp.xi(0), v.J, 1e-8);
    const VectorXd fitted = FeatureMap::one_hot(2).matrix().transpose() * fp.xi.tail(2);
    const VectorXd diff = fitted - v.V;
    EXPECT_LE((diff.array() - diff.mean()).abs().maxCoeff(), 1e-6);
}

TEST(CriticFixpoint, CenteredFeaturesSatisfyFixpointAndQuadraticForm) {
    const TabularCmdp m = make_random_ergodic(5, 3, 31, 0.2);
    const auto pi = ParamPolicy::tabular(5, 3, random_theta(15, 32));
    const FeatureMap phi = FeatureMap::centered_one_hot(5);
    const CriticFixpoint fp = exact_critic_fixpoint(m, pi, phi, 2.0, Signal::cost);
    EXPECT_LE((fp.A * fp.xi - fp.b).norm(), 1e-10);
    EXPECT_GT(fp.lambda, 0.0);
    EXPECT_NEAR(fp.xi(0), exact_values(m, pi, Signal::cost).J, 1e-12);
    const MatrixXd M = fp.A.bottomRightCorner(4, 4);
    for (std::uint64_t k = 0; k < 50; ++k) {
        const VectorXd z = random_theta(4, 300 + k);
        EXPECT_GE(z.dot(M * z), fp.lambda * z.squaredNorm() - 1e-12);
    }
}

TEST(CmdpLp, ZeroCostMatchesBestDeterministicPolicy) {
    const TabularCmdp base = make_random_ergodic(3, 3, 41, 0.3);
    const TabularCmdp m = base.with_signals(base.reward(), MatrixXd::Zero(3, 3));
    double best = -1.0;
    for (const auto& p : deterministic_policies(3, 3)) best = std::max(best, average_value(m, p, Signal::reward));
    EXPECT_NEAR(solve_cmdp_lp(m).J_star, best, 1e-9);
}

TEST(CmdpLp, DominatesRandomFeasiblePolicies) {
    const TabularCmdp m = make_random_ergodic(4, 2, 42, 0.3);
    const CmdpSolution sol = solve_cmdp_lp(m);
    int feasible = 0;
    for (const auto& p : probe_policies(m, 200, 43)) {
        const PolicyEvaluation e = evaluate_policy(m, p);
        if (e.cost.J < 0.0) continue;
        ++feasible;
        EXPECT_LE(e.reward.J, sol.J_star + 1e-9);
    }
    EXPECT_GT(feasible, 0);
    const PolicyEvaluation opt = evaluate_policy(m, sol.policy);
    EXPECT_NEAR(opt.reward.J, sol.J_star, 1e-9);
    EXPECT_GE(opt.cost.J, -1e-9);
}

TEST(CmdpLp, BenchmarkMatchesGolden) {
    const json golden = read_json_file(std::string(PDNAC_DATA_DIR) + "/golden/benchmark_2s2a_oracle.json");
    const CmdpSolution sol = solve_cmdp_lp(load_cmdp(std::string(PDNAC_DATA_DIR) + "/benchmark_2s2a.json"));
    EXPECT_NEAR(sol.J_star, golden["J_r_star"].get<double>(), 1e-9);
    EXPECT_NEAR(sol.J_star, 447.0 / 700.0, 1e-12);
    EXPECT_NEAR(sol.slater_margin, golden["slater_margin"].get<double>(), 1e-9);
}

TEST(CmdpLp, AlwaysSatisfiedConstraint) {
    const TabularCmdp base = make_random_ergodic(3, 2, 44, 0.3);
    const TabularCmdp m = base.with_signals(base.reward(), MatrixXd::Ones(3, 2));
    const CmdpSolution sol = solve_cmdp_lp(m);
    EXPECT_NEAR(sol.slater_margin, 1.0, 1e-12);
    EXPECT_NEAR(sol.J_star, max_average(m, m.reward()), 1e-9);
}

TEST(CmdpLp, InfeasibleInstance) {
    const TabularCmdp base = make_random_ergodic(3, 2, 45, 0.3);
    EXPECT_THROW(solve_cmdp_lp(base.with_signals(base.reward(), MatrixXd::Constant(3, 2, -0.5))), InfeasibleError);
}

TEST(Lagrangian, Arithmetic) {
    const TabularCmdp m = test::benchmark();
    const PolicyMatrix p = uniform_policy(2, 2);
    const PolicyEvaluation e = evaluate_policy(m, p);
    EXPECT_NEAR(lagrangian(m, p, 0.7), e.reward.J + 0.7 * e.cost.J, 1e-15);
    EXPECT_THROW(lagrangian(m, p, -0.1), ConfigError);
}

TEST(Lagrangian, WeakAndStrongDuality) {
    const TabularCmdp m = test::benchmark();
    const CmdpSolution sol = solve_cmdp_lp(m);
    double best = 1e9, arg = -1;
    const double cap = 1.0 / sol.slater_margin;
    for (int i = 0; i <= 4000; ++i) {
        const double lam = 4.0 * i / 4000.0;
        const double dval = dual_function(m, lam);
        EXPECT_GE(dval, sol.J_star - 1e-12);
        if (dval < best) best = dval, arg = lam;
    }
    // D is piecewise linear with slope |J_c| <= 1, so the grid misses the minimum by at most its spacing
    EXPECT_NEAR(best, sol.J_star, 1e-3);
    EXPECT_GE(arg, 0.0);
    EXPECT_LE(arg, cap);
}

#include <gtest/gtest.h>

#include "common.hpp"
#include "pdnac/markov.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/pdnac.hpp"

using namespace pdnac;

namespace {

PdConfig small_config(const TabularCmdp& m, long K, std::uint64_t seed) {
    PdConfig cfg;
    cfg.K = K;
    cfg.alpha = cfg.beta = 0.05;
    cfg.delta = 0.5;
    cfg.critic.c_gamma = 2.0;
    cfg.critic.gamma_xi = 0.1;
    cfg.critic.h_inner = 16;
    cfg.critic.mlmc.t_max = 16;
    cfg.actor.gamma_omega = 0.2;
    cfg.actor.h_inner = 16;
    cfg.actor.mlmc.t_max = 16;
    cfg.phi_r = cfg.phi_c = FeatureMap::centered_one_hot(m.n_states());
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST(DualUpdate, Examples) {
    EXPECT_NEAR(dual_update(0.0, 0.1, -0.5, 0.5), 0.05, 1e-15);
    EXPECT_EQ(dual_update(3.99, 1.0, -1.0, 0.5), 4.0);
    EXPECT_EQ(dual_update(0.0, 0.3, 0.2, 0.5), 0.0);
    EXPECT_EQ(dual_update(0.0, 0.3, 0.0, 0.5), 0.0);
    EXPECT_THROW(dual_update(0.0, 0.1, 0.0, 1.0), ConfigError);
}

TEST(PrimalUpdate, Examples) {
    const VectorXd theta = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
    EXPECT_EQ(primal_update(theta, 0.0, VectorXd::Ones(3)), theta);
    const VectorXd e1 = (VectorXd(3) << 1.0, 0.0, 0.0).finished();
    EXPECT_LE((primal_update(VectorXd::Zero(3), 0.1, e1) - 0.1 * e1).norm(), 0.0);
    VectorXd bad = e1;
    bad(1) = std::nan("");
    EXPECT_THROW(primal_update(theta, 0.1, bad), NumericError);
    EXPECT_THROW(primal_update(theta, 0.1, VectorXd::Zero(2)), ConfigError);
}

TEST(PrimalUpdate, ExactRegimeAscent) {
    const TabularCmdp m = test::benchmark();
    const auto pi = ParamPolicy::tabular(2, 2, (VectorXd(4) << 0.3, -0.2, 0.1, 0.4).finished());
    const double lambda = 0.6, alpha = 1e-3;
    const VectorXd w = exact_npg(m, pi, Signal::reward, 1e-6) + lambda * exact_npg(m, pi, Signal::cost, 1e-6);
    const double before = lagrangian(m, pi, lambda);
    const double after = lagrangian(m, pi.with_theta(primal_update(pi.theta(), alpha, w)), lambda);
    EXPECT_GE(after, before - alpha * alpha);
    EXPECT_GT(after, before);
}

TEST(Schedule, KnownMixing) {
    Schedule s;
    s.tau_mix = 4.0;
    s.h_const = 1.0;
    const ScheduleParams p = schedule_params(1L << 20, s);
    EXPECT_EQ(p.H, 16 * 20 * 20);
    EXPECT_EQ(p.K, (1L << 20) / p.H);
    EXPECT_DOUBLE_EQ(p.alpha, std::ldexp(1.0, -10));
    EXPECT_DOUBLE_EQ(p.beta, std::ldexp(1.0, -10));
}

TEST(Schedule, UnknownMixing) {
    Schedule s;
    s.kind = MixingKnowledge::unknown;
    s.epsilon = 0.25;
    const ScheduleParams p = schedule_params(1L << 20, s);
    EXPECT_EQ(p.H, 32);
    EXPECT_EQ(p.K, 32768);
    s.epsilon = 0.0;
    EXPECT_THROW(schedule_params(1L << 20, s), ConfigError);
}

TEST(Driver, ZeroEpochs) {
    const TabularCmdp m = test::benchmark();
    const auto pi = ParamPolicy::tabular(2, 2, VectorXd::Constant(4, 0.25));
    const RunOracle oracle{solve_cmdp_lp(m).J_star};
    const RunResult r = run_pdnac(m, pi, small_config(m, 0, 0), &oracle);
    EXPECT_TRUE(r.records.empty());
    EXPECT_EQ(r.summary.theta_final, pi.theta());
    EXPECT_EQ(r.summary.total_samples, 0);
    EXPECT_FALSE(r.summary.avg_gap.has_value());
}

TEST(Driver, NeverViolatedConstraintKeepsDualAtZero) {
    const TabularCmdp base = make_random_ergodic(3, 2, 71, 0.3);
    const TabularCmdp m = base.with_signals(base.reward(), MatrixXd::Ones(3, 2));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const RunResult r = run_pdnac(m, ParamPolicy::tabular(3, 2), small_config(m, 20, seed));
        for (const auto& rec : r.records) EXPECT_EQ(rec.lambda, 0.0);
        EXPECT_EQ(r.summary.lambda_final, 0.0);
    }
}

TEST(Driver, InvariantsOnBenchmark) {
    const TabularCmdp m = test::benchmark();
    PdConfig cfg = small_config(m, 200, 3);
    cfg.delta = 0.52;
    cfg.keep_occupancies = true;
    const RunOracle oracle{solve_cmdp_lp(m).J_star};
    const RunResult r = run_pdnac(m, ParamPolicy::tabular(2, 2), cfg, &oracle);
    ASSERT_EQ(static_cast<long>(r.records.size()), cfg.K);

    for (const auto& rec : r.records) {
        EXPECT_GE(rec.lambda, 0.0);
        EXPECT_LE(rec.lambda, 2.0 / cfg.delta);
    }

    long total = 0;
    for (long n : r.samples_per_draw) total += n;
    EXPECT_EQ(total, r.summary.total_samples);
    EXPECT_EQ(static_cast<long>(r.samples_per_draw.size()), 2 * cfg.K * 16);
    const MlmcCostReport cost = mlmc_cost_report(r.samples_per_draw, cfg.critic.mlmc);
    EXPECT_TRUE(cost.in_band);
    EXPECT_LE(static_cast<double>(total), 4.0 * cfg.K * 16 * expected_traj_len(cfg.critic.mlmc) * 1.5);

    // averaged values equal the values of the uniform mixture of epoch policies
    MatrixXd mix = MatrixXd::Zero(2, 2);
    double jr = 0, jc = 0;
    for (std::size_t k = 0; k < r.records.size(); ++k) {
        mix += r.occupancies[k];
        jr += *r.records[k].J_r;
        jc += *r.records[k].J_c;
    }
    const double K = static_cast<double>(cfg.K);
    mix /= K;
    EXPECT_NEAR(mix.cwiseProduct(m.reward()).sum(), jr / K, 1e-12);
    EXPECT_NEAR(mix.cwiseProduct(m.cost()).sum(), jc / K, 1e-12);
    EXPECT_NEAR(*r.summary.avg_gap, oracle.J_star - jr / K, 1e-12);
    EXPECT_NEAR(*r.summary.avg_signed_violation, -jc / K, 1e-12);
}

TEST(Driver, ViolationBoundIdentity) {
    EXPECT_DOUBLE_EQ(violation_bound_from_gap(0.2, 0.5), 0.1);
    for (double zeta : {0.0, 0.01, 0.3})
        for (double delta : {0.1, 0.52, 0.9}) EXPECT_NEAR(violation_bound_from_gap(zeta, delta), delta * zeta, 1e-15);
}

TEST(Driver, Deterministic) {
    const TabularCmdp m = make_random_ergodic(3, 2, 72, 0.3);
    const RunResult a = run_pdnac(m, ParamPolicy::tabular(3, 2), small_config(m, 30, 5));
    const RunResult b = run_pdnac(m, ParamPolicy::tabular(3, 2), small_config(m, 30, 5));
    EXPECT_EQ(a.summary.theta_final, b.summary.theta_final);
    EXPECT_EQ(a.samples_per_draw, b.samples_per_draw);
}

TEST(StepAdmissibility, ReportsTheoryAndLimits) {
    const StepAdmissibility a = check_step_admissibility(1L << 20, 100, 256, 1e-4, 1e-9, 2.0, 0.5, 1e-2, std::sqrt(2.0), 2.0);
    EXPECT_GT(a.gamma_xi_theory, 0.0);
    EXPECT_GT(a.gamma_xi_max, 0.0);
    EXPECT_EQ(a.critic_step_ok, 1e-4 <= a.gamma_xi_max);
}

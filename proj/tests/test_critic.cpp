#include <gtest/gtest.h>

#include <algorithm>

#include "common.hpp"
#include "pdnac/critic.hpp"
#include "pdnac/markov.hpp"
#include "pdnac/oracle.hpp"

using namespace pdnac;

namespace {

VectorXd random_vector(Index n, std::uint64_t seed, double scale = 1.0) {
    Rng rng = make_stream(seed, StreamTag::generator);
    std::normal_distribution<double> normal(0.0, scale);
    VectorXd v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    return v;
}

/// sum over (s,a,s') of nu(s,a) P(s'|s,a) f(z)
template <typename F>
VectorXd enumerate_average(const TabularCmdp& m, const PolicyMatrix& probs, F&& f) {
    const StationaryInfo info = stationary(m, probs);
    VectorXd acc;
    for (Index s = 0; s < m.n_states(); ++s)
        for (Index a = 0; a < m.n_actions(); ++a)
            for (Index t = 0; t < m.n_states(); ++t) {
                const Transition z{s, a, t, m.reward()(s, a), m.cost()(s, a)};
                const VectorXd v = info.nu(s, a) * m.prob(s, a, t) * f(z);
                acc = acc.size() ? VectorXd(acc + v) : v;
            }
    return acc;
}

}  // namespace

TEST(CriticGrad, ZeroIterateGivesMinusB) {
    const FeatureMap phi = FeatureMap::centered_one_hot(3);
    const Transition z{1, 0, 2, 0.7, -0.2};
    const VectorXd out = critic_sample_grad(CriticVec::zero(2), z, z.reward, phi, 1.5);
    EXPECT_DOUBLE_EQ(out(0), -1.5 * 0.7);
    EXPECT_LE((out.tail(2) + 0.7 * VectorXd(phi(1))).norm(), 1e-15);
}

TEST(CriticGrad, HandExample) {
    const FeatureMap phi = FeatureMap::constant(1);
    const Transition z{0, 0, 0, 0.5, 0.0};
    const CriticVec xi{0.2, VectorXd::Constant(1, 0.7)};
    const VectorXd out = critic_sample_grad(xi, z, 0.5, phi, 1.0);
    EXPECT_NEAR(out(0), -0.3, 1e-15);
    EXPECT_NEAR(out(1), -0.3, 1e-15);
}

TEST(CriticGrad, AveragesToZeroAtFixpoint) {
    const TabularCmdp m = make_random_ergodic(4, 3, 51, 0.2);
    const PolicyMatrix probs = ParamPolicy::tabular(4, 3, random_vector(12, 52)).probs_matrix();
    for (const FeatureMap& phi : {FeatureMap::one_hot(4), FeatureMap::centered_one_hot(4)})
        for (Signal g : {Signal::reward, Signal::cost}) {
            const CriticFixpoint fp = exact_critic_fixpoint(m, probs, phi, 2.0, g);
            const CriticVec xi = CriticVec::from_stacked(fp.xi);
            const VectorXd avg = enumerate_average(
                m, probs, [&](const Transition& z) { return critic_sample_grad(xi, z, z.signal(g), phi, 2.0); });
            EXPECT_LE(avg.norm(), 1e-8);
            // the enumerated mean is A xi - b
            const VectorXd at_zero = enumerate_average(m, probs, [&](const Transition& z) {
                return critic_sample_grad(CriticVec::zero(phi.dim()), z, z.signal(g), phi, 2.0);
            });
            EXPECT_LE((at_zero + fp.b).norm(), 1e-12);
        }
}

TEST(Critic, ScalarRecursionWithoutFeatures) {
    const TabularCmdp m(1, 1, MatrixXd::Ones(1, 1), MatrixXd::Constant(1, 1, 0.4), MatrixXd::Zero(1, 1),
                        VectorXd::Ones(1));
    CriticConfig cfg;
    cfg.c_gamma = 1.0;
    cfg.gamma_xi = 0.5;
    cfg.h_inner = 50;
    cfg.mlmc.t_max = 16;
    ChainCursor cur = ChainCursor::start(m, 0);
    const CriticVec xi =
        run_critic(m, PolicyTable::from_probs(uniform_policy(1, 1)), cur, cfg, FeatureMap::empty(1), Signal::reward);
    EXPECT_EQ(xi.zeta.size(), 0);
    EXPECT_LT(std::abs(xi.eta - 0.4), 1e-6);
}

TEST(Critic, ZeroStepLeavesIterateAtZero) {
    const TabularCmdp m = make_random_ergodic(3, 2, 53, 0.3);
    CriticConfig cfg;
    cfg.gamma_xi = 0.0;
    cfg.h_inner = 20;
    cfg.mlmc.t_max = 8;
    ChainCursor cur = ChainCursor::start(m, 1);
    const CriticVec xi = run_critic(m, PolicyTable(ParamPolicy::tabular(3, 2)), cur, cfg,
                                    FeatureMap::centered_one_hot(3), Signal::cost);
    EXPECT_EQ(xi.eta, 0.0);
    EXPECT_EQ(xi.zeta.norm(), 0.0);
}

TEST(Critic, DivergenceIsReported) {
    const TabularCmdp m = make_random_ergodic(3, 2, 54, 0.3);
    CriticConfig cfg;
    cfg.gamma_xi = 50.0;
    cfg.h_inner = 100;
    cfg.mlmc.t_max = 8;
    ChainCursor cur = ChainCursor::start(m, 2);
    EXPECT_THROW(run_critic(m, PolicyTable(ParamPolicy::tabular(3, 2)), cur, cfg, FeatureMap::one_hot(3),
                            Signal::reward),
                 DivergenceError);
}

TEST(Critic, ErrorDecreasesWithInnerSteps) {
    const TabularCmdp m = make_random_ergodic(5, 3, 1, 0.5);
    const auto pi = ParamPolicy::tabular(5, 3, random_vector(15, 99, 0.5));
    const FeatureMap phi = FeatureMap::centered_one_hot(5);
    const CriticFixpoint fp = exact_critic_fixpoint(m, pi, phi, 2.0, Signal::reward);
    const PolicyTable table(pi);
    std::vector<double> medians;
    for (long H : {16L, 64L, 256L}) {
        std::vector<double> errs;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            CriticConfig cfg;
            cfg.c_gamma = 2.0;
            cfg.gamma_xi = 0.02;
            cfg.h_inner = H;
            cfg.mlmc.t_max = 256;
            ChainCursor cur = ChainCursor::start(m, seed);
            errs.push_back((run_critic(m, table, cur, cfg, phi, Signal::reward).stacked() - fp.xi).squaredNorm());
        }
        std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
        medians.push_back(errs[10]);
    }
    EXPECT_GT(medians[0], medians[1]);
    EXPECT_GT(medians[1], medians[2]);
}

TEST(Critic, EmpiricalQuadraticFormIsPositive) {
    const TabularCmdp m = make_random_ergodic(5, 3, 55, 0.3);
    const auto pi = ParamPolicy::tabular(5, 3, random_vector(15, 56));
    const FeatureMap phi = FeatureMap::centered_one_hot(5);
    const double lam = exact_critic_fixpoint(m, pi, phi, 2.0, Signal::reward).lambda;
    const double c = compliant_c_gamma(lam);
    const Index dim = 1 + phi.dim();
    // A(z) xi = grad(xi) - grad(0), so the columns of A(z) come from unit iterates
    MatrixXd A_hat = MatrixXd::Zero(dim, dim);
    ChainCursor cur = ChainCursor::start(m, 3);
    const auto traj = sample_trajectory(m, PolicyTable(pi), cur, 20000);
    for (const auto& z : traj) {
        const VectorXd base = critic_sample_grad(CriticVec::zero(phi.dim()), z, z.reward, phi, c);
        for (Index j = 0; j < dim; ++j) {
            VectorXd e = VectorXd::Zero(dim);
            e(j) = 1.0;
            A_hat.col(j) += critic_sample_grad(CriticVec::from_stacked(e), z, z.reward, phi, c) - base;
        }
    }
    A_hat /= static_cast<double>(traj.size());
    const MatrixXd sym = 0.5 * (A_hat + A_hat.transpose());
    double worst = 1e9;
    for (std::uint64_t k = 0; k < 2000; ++k) {
        const VectorXd u = random_vector(dim, 1000 + k).normalized();
        worst = std::min(worst, u.dot(sym * u));
    }
    EXPECT_GE(worst, lam / 4.0);
}

TEST(CriticConfig, Validation) {
    CriticConfig cfg;
    cfg.c_gamma = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    cfg = CriticConfig{};
    cfg.h_inner = 0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    EXPECT_THROW(FeatureMap::from_matrix(MatrixXd::Constant(2, 3, 1.0)), ConfigError);
}

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pdnac/critic.hpp"
#include "pdnac/features.hpp"
#include "pdnac/mlmc.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/simulate.hpp"

namespace pdnac {

struct NpgVec {
    VectorXd omega;
    static NpgVec zero(Index d) { return NpgVec{VectorXd::Zero(d)}; }
};

struct ActorConfig {
    double gamma_omega = 0.0;
    long h_inner = 1;
    MlmcConfig mlmc;
    double mu_ridge = 1e-6;
    double divergence_factor = 1e3;

    void validate() const {
        if (!(gamma_omega >= 0.0)) throw ConfigError("gamma_omega must be >= 0");
        if (h_inner < 1) throw ConfigError("actor H must be >= 1");
        if (!(mu_ridge >= 0.0)) throw ConfigError("mu_ridge must be >= 0");
        mlmc.validate();
    }
};

/// TD advantage A_hat = g - eta + <zeta, phi(s') - phi(s)>.
inline double td_advantage(const CriticVec& xi, const Transition& z, double g, const FeatureMap& phi) {
    double a = g - xi.eta;
    if (phi.dim() > 0) a += xi.zeta.dot(phi(z.s_next)) - xi.zeta.dot(phi(z.s));
    return a;
}

/// (score score^T + mu I) omega - A_hat score.
inline VectorXd npg_sample_grad(const VectorXd& omega, const Transition& z, const CriticVec& xi,
                                const Eigen::Ref<const VectorXd>& score, const FeatureMap& phi, Signal which,
                                double mu_ridge) {
    const double a_hat = td_advantage(xi, z, z.signal(which), phi);
    return score * (score.dot(omega) - a_hat) + mu_ridge * omega;
}

struct ActorStep {
    std::uint64_t epoch = 0;
    long h = 0;
    Signal which = Signal::reward;
    MlmcDraw draw;
    const VectorXd* omega = nullptr;
};

using ActorObserver = std::function<void(const ActorStep&)>;

/// NPG subroutine for several signals sharing one trajectory per inner step; each
/// omega starts at 0 and uses its own frozen critic output throughout.
inline std::vector<NpgVec> run_npgs(const TabularCmdp& m, const PolicyTable& pi, ChainCursor& cursor,
                                    const ActorConfig& cfg, const std::vector<Signal>& signals,
                                    const std::vector<CriticVec>& critics,
                                    const std::vector<const FeatureMap*>& features, std::uint64_t epoch = 0,
                                    std::vector<long>* samples_log = nullptr, const ActorObserver& observer = {}) {
    cfg.validate();
    if (signals.size() != critics.size() || signals.size() != features.size())
        throw ConfigError("one critic and one feature map per NPG signal are required");
    const Index d = pi.scores.rows();
    if (d == 0) throw ConfigError("policy table has no score vectors");
    std::vector<NpgVec> omega(signals.size(), NpgVec::zero(d));
    VectorXd grad(d);

    // worst-case growth of a stable run over H steps, times the configured factor
    const double g1 = pi.scores.colwise().norm().maxCoeff();
    std::vector<double> radius;
    for (const auto& xi : critics) {
        const double a_max = 1.0 + std::abs(xi.eta) + 2.0 * xi.zeta.norm();
        radius.push_back(cfg.divergence_factor *
                         (1.0 + static_cast<double>(cfg.h_inner) * cfg.gamma_omega * a_max * g1));
    }

    std::vector<Transition> traj;
    for (long h = 0; h < cfg.h_inner; ++h) {
        cursor.switch_stream(epoch, StreamTag::actor, static_cast<std::uint64_t>(h));
        const MlmcDraw draw = draw_level(cursor.rng(), cfg.mlmc);
        sample_trajectory_into(m, pi, cursor, draw.traj_len, traj);
        if (samples_log) samples_log->push_back(draw.traj_len);
        for (std::size_t i = 0; i < signals.size(); ++i) {
            VectorXd& w = omega[i].omega;
            grad = cfg.mu_ridge * w;  // MLMC weights sum to one, so the ridge term passes through once
            for (long t = 0; t < draw.traj_len; ++t) {
                const double wt = mlmc_weight(draw, t);
                if (wt == 0.0) continue;
                const Transition& z = traj[static_cast<std::size_t>(t)];
                const auto sc = pi.score(z.s, z.a);
                const double a_hat = td_advantage(critics[i], z, z.signal(signals[i]), *features[i]);
                grad.noalias() += (wt * (sc.dot(w) - a_hat)) * sc;
            }
            w -= cfg.gamma_omega * grad;
            if (!w.allFinite() || w.norm() > radius[i])
                throw DivergenceError(std::string("NPG (") + to_string(signals[i]) + ") diverged at inner step " +
                                      std::to_string(h) + ": ||omega|| = " + std::to_string(w.norm()) +
                                      "; reduce gamma_omega");
            if (observer) observer(ActorStep{epoch, h, signals[i], draw, &w});
        }
    }
    return omega;
}

inline NpgVec run_npg(const TabularCmdp& m, const PolicyTable& pi, ChainCursor& cursor, const ActorConfig& cfg,
                      const CriticVec& xi, const FeatureMap& phi, Signal which, std::uint64_t epoch = 0,
                      std::vector<long>* samples_log = nullptr, const ActorObserver& observer = {}) {
    return run_npgs(m, pi, cursor, cfg, {which}, {xi}, {&phi}, epoch, samples_log, observer).front();
}

}  // namespace pdnac

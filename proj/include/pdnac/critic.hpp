#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdnac/cmdp.hpp"
#include "pdnac/features.hpp"
#include "pdnac/mlmc.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/simulate.hpp"

namespace pdnac {

/// xi = (eta, zeta): average-value tracker and linear value weights.
struct CriticVec {
    double eta = 0.0;
    VectorXd zeta;

    static CriticVec zero(Index m) { return CriticVec{0.0, VectorXd::Zero(m)}; }

    static CriticVec from_stacked(const VectorXd& x) {
        return CriticVec{x(0), x.tail(x.size() - 1)};
    }

    [[nodiscard]] VectorXd stacked() const {
        VectorXd x(1 + zeta.size());
        x << eta, zeta;
        return x;
    }
    [[nodiscard]] double norm() const { return std::sqrt(eta * eta + zeta.squaredNorm()); }
    [[nodiscard]] bool finite() const { return std::isfinite(eta) && zeta.allFinite(); }
};

struct CriticConfig {
    double c_gamma = 2.0;
    double gamma_xi = 0.0;
    long h_inner = 1;
    MlmcConfig mlmc;
    std::optional<double> lambda_hat;  // positive-definiteness constant of the features, when known
    double divergence_factor = 1e3;

    void validate() const {
        if (!(c_gamma > 0.0)) throw ConfigError("c_gamma must be > 0");
        if (!(gamma_xi >= 0.0)) throw ConfigError("gamma_xi must be >= 0");
        if (h_inner < 1) throw ConfigError("critic H must be >= 1");
        mlmc.validate();
    }

    /// ||xi|| above this aborts the loop.
    [[nodiscard]] double divergence_radius() const {
        const double lam = lambda_hat.value_or(1.0);
        return divergence_factor * (1.0 + c_gamma / lam);
    }

    /// Whether c_gamma satisfies the positive-definiteness lemma for lambda_hat.
    [[nodiscard]] std::optional<bool> c_gamma_compliant() const {
        if (!lambda_hat) return std::nullopt;
        const double lam = *lambda_hat;
        return c_gamma >= lam + std::sqrt(std::max(0.0, 1.0 / (lam * lam) - 1.0));
    }
};

/// A_g(z) xi - b_g(z): first entry c (eta - g), then phi(s) (eta + <zeta, phi(s) - phi(s')> - g).
inline VectorXd critic_sample_grad(const CriticVec& xi, const Transition& z, double g, const FeatureMap& phi,
                                   double c_gamma) {
    VectorXd out(1 + phi.dim());
    out(0) = c_gamma * (xi.eta - g);
    if (phi.dim() > 0) {
        const double td = xi.eta + xi.zeta.dot(phi(z.s) - phi(z.s_next)) - g;
        out.tail(phi.dim()) = td * phi(z.s);
    }
    return out;
}

/// acc += w * critic_sample_grad(...), without temporaries.
inline void critic_accumulate(double w, const CriticVec& xi, const Transition& z, double g, const FeatureMap& phi,
                              double c_gamma, CriticVec& acc) {
    acc.eta += w * c_gamma * (xi.eta - g);
    if (phi.dim() > 0) {
        const double td = xi.eta + xi.zeta.dot(phi(z.s)) - xi.zeta.dot(phi(z.s_next)) - g;
        acc.zeta.noalias() += (w * td) * phi(z.s);
    }
}

/// One inner step as seen by a telemetry observer.
struct CriticStep {
    std::uint64_t epoch = 0;
    long h = 0;
    Signal which = Signal::reward;
    MlmcDraw draw;
    const CriticVec* xi = nullptr;  // iterate after the update
};

using CriticObserver = std::function<void(const CriticStep&)>;

/// Critic subroutine for a set of signals sharing one trajectory per inner step.
///
/// Every xi starts at 0. At step h the cursor switches to the (epoch, critic, h) stream,
/// draws an MLMC level, samples traj_len transitions, and each signal's xi takes one
/// step along the MLMC combination of critic_sample_grad with xi_h frozen.
inline std::vector<CriticVec> run_critics(const TabularCmdp& m, const PolicyTable& pi, ChainCursor& cursor,
                                          const CriticConfig& cfg, const std::vector<Signal>& signals,
                                          const std::vector<const FeatureMap*>& features, std::uint64_t epoch = 0,
                                          std::vector<long>* samples_log = nullptr,
                                          const CriticObserver& observer = {}) {
    cfg.validate();
    if (signals.size() != features.size()) throw ConfigError("one feature map per critic signal is required");
    for (const auto* f : features) f->check_compatible(m);
    std::vector<CriticVec> xi;
    std::vector<CriticVec> grad;
    for (const auto* f : features) {
        xi.push_back(CriticVec::zero(f->dim()));
        grad.push_back(CriticVec::zero(f->dim()));
    }
    const double radius = cfg.divergence_radius();
    std::vector<Transition> traj;
    for (long h = 0; h < cfg.h_inner; ++h) {
        cursor.switch_stream(epoch, StreamTag::critic, static_cast<std::uint64_t>(h));
        const MlmcDraw draw = draw_level(cursor.rng(), cfg.mlmc);
        sample_trajectory_into(m, pi, cursor, draw.traj_len, traj);
        if (samples_log) samples_log->push_back(draw.traj_len);
        for (std::size_t i = 0; i < signals.size(); ++i) {
            grad[i].eta = 0.0;
            grad[i].zeta.setZero();
            for (long t = 0; t < draw.traj_len; ++t) {
                const double w = mlmc_weight(draw, t);
                if (w == 0.0) continue;
                const Transition& z = traj[static_cast<std::size_t>(t)];
                critic_accumulate(w, xi[i], z, z.signal(signals[i]), *features[i], cfg.c_gamma, grad[i]);
            }
            xi[i].eta -= cfg.gamma_xi * grad[i].eta;
            xi[i].zeta -= cfg.gamma_xi * grad[i].zeta;
            if (!xi[i].finite() || xi[i].norm() > radius)
                throw DivergenceError(std::string("critic (") + to_string(signals[i]) + ") diverged at inner step " +
                                      std::to_string(h) + ": ||xi|| = " + std::to_string(xi[i].norm()) +
                                      " exceeds " + std::to_string(radius) + "; reduce gamma_xi");
            if (observer) observer(CriticStep{epoch, h, signals[i], draw, &xi[i]});
        }
    }
    return xi;
}

inline CriticVec run_critic(const TabularCmdp& m, const PolicyTable& pi, ChainCursor& cursor, const CriticConfig& cfg,
                            const FeatureMap& phi, Signal which, std::uint64_t epoch = 0,
                            std::vector<long>* samples_log = nullptr, const CriticObserver& observer = {}) {
    return run_critics(m, pi, cursor, cfg, {which}, {&phi}, epoch, samples_log, observer).front();
}

}  // namespace pdnac

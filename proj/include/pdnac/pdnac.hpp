#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pdnac/actor.hpp"
#include "pdnac/cmdp.hpp"
#include "pdnac/critic.hpp"
#include "pdnac/features.hpp"
#include "pdnac/log.hpp"
#include "pdnac/mlmc.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/policy.hpp"
#include "pdnac/simulate.hpp"

namespace pdnac {

// ---------------------------------------------------------------------------
// Schedules

enum class MixingKnowledge { known, unknown };

struct Schedule {
    MixingKnowledge kind = MixingKnowledge::known;
    double tau_mix = 1.0;   // known: the mixing time used to size H
    double epsilon = 0.5;   // unknown: H = T^eps
    double h_const = 1.0;   // known: H = h_const tau^2 ceil(log2 T)^2
};

struct ScheduleParams {
    long K = 0;
    long H = 1;
    double alpha = 0.0;
    double beta = 0.0;
};

inline long ceil_log2(long T) {
    long j = 0;
    while ((1L << j) < T) ++j;
    return j;
}

inline ScheduleParams schedule_params(long T, const Schedule& sched) {
    if (T < 1) throw ConfigError("T must be >= 1");
    ScheduleParams p;
    const double t = static_cast<double>(T);
    p.alpha = p.beta = 1.0 / std::sqrt(t);
    if (sched.kind == MixingKnowledge::known) {
        if (!(sched.tau_mix >= 1.0)) throw ConfigError("known-mixing schedule needs tau_mix >= 1");
        if (!(sched.h_const > 0.0)) throw ConfigError("h_const must be > 0");
        const double lg = static_cast<double>(std::max(1L, ceil_log2(T)));
        p.H = std::max(1L, static_cast<long>(std::ceil(sched.h_const * sched.tau_mix * sched.tau_mix * lg * lg - 1e-9)));
        p.K = T / p.H;
    } else {
        if (!(sched.epsilon > 0.0 && sched.epsilon < 1.0)) throw ConfigError("epsilon must lie in (0,1)");
        p.H = std::max(1L, std::lround(std::pow(t, sched.epsilon)));
        p.K = std::lround(std::pow(t, 1.0 - sched.epsilon));
    }
    return p;
}

/// Step-size conditions of the critic and NPG convergence results, evaluated for logging.
struct StepAdmissibility {
    double gamma_xi_theory = 0.0;     // 2 log T / (lambda H)
    double gamma_omega_theory = 0.0;  // 2 log T / (mu H)
    double gamma_xi_max = 0.0;        // lambda / (24 c^2 tau log T_max)
    double gamma_omega_max = 0.0;     // mu / (4 (6 G1^4 tau log T_max + 2 G1^2 tau^2 log T_max))
    bool critic_step_ok = false;
    bool critic_tmax_ok = false;      // T_max >= 8 c^2 tau / lambda
    bool actor_step_ok = false;
    bool actor_tmax_ok = false;       // T_max >= 8 G1^4 tau / mu
};

inline StepAdmissibility check_step_admissibility(long T, long H, long t_max, double gamma_xi, double gamma_omega,
                                                  double c_gamma, double lambda, double mu, double g1, double tau) {
    StepAdmissibility a;
    const double logT = std::log(static_cast<double>(std::max(2L, T)));
    const double logTmax = std::log(static_cast<double>(std::max(2L, t_max)));
    const double h = static_cast<double>(H);
    a.gamma_xi_theory = 2.0 * logT / (lambda * h);
    a.gamma_omega_theory = mu > 0.0 ? 2.0 * logT / (mu * h) : INFINITY;
    a.gamma_xi_max = lambda / (24.0 * c_gamma * c_gamma * tau * logTmax);
    const double g2 = g1 * g1;
    a.gamma_omega_max = mu / (4.0 * (6.0 * g2 * g2 * tau * logTmax + 2.0 * g2 * tau * tau * logTmax));
    a.critic_step_ok = gamma_xi <= a.gamma_xi_max;
    a.critic_tmax_ok = static_cast<double>(t_max) >= 8.0 * c_gamma * c_gamma * tau / lambda;
    a.actor_step_ok = gamma_omega <= a.gamma_omega_max;
    a.actor_tmax_ok = mu > 0.0 && static_cast<double>(t_max) >= 8.0 * g2 * g2 * tau / mu;
    return a;
}

// ---------------------------------------------------------------------------
// Primal and dual updates

struct DualState {
    double lambda = 0.0;
};

/// clip(lambda - beta eta_c, 0, 2/delta).
inline double dual_update(double lambda, double beta, double eta_c, double delta) {
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
    return std::clamp(lambda - beta * eta_c, 0.0, 2.0 / delta);
}

inline VectorXd primal_update(const VectorXd& theta, double alpha, const VectorXd& omega) {
    if (theta.size() != omega.size()) throw ConfigError("theta and omega dimensions differ");
    if (!omega.allFinite()) throw NumericError("non-finite NPG direction; epoch aborted");
    return theta + alpha * omega;
}

// ---------------------------------------------------------------------------
// Driver

struct PdConfig {
    long K = 0;
    double alpha = 0.0;
    double beta = 0.0;
    double delta = 0.5;
    CriticConfig critic;
    ActorConfig actor;
    FeatureMap phi_r;
    FeatureMap phi_c;
    std::uint64_t seed = 0;
    bool keep_occupancies = false;

    void validate() const {
        if (K < 0) throw ConfigError("K must be >= 0");
        if (!(alpha >= 0.0) || !(beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
        if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
        critic.validate();
        actor.validate();
    }
};

struct RunRecord {
    long k = 0;
    double lambda = 0.0;   // lambda_k used in this epoch
    double eta_r = 0.0;
    double eta_c = 0.0;
    VectorXd theta;        // theta_k
    std::optional<double> J_r;
    std::optional<double> J_c;
    std::optional<double> gap;        // J_r* - J_r(theta_k)
    std::optional<double> violation;  // max(0, -J_c(theta_k))
    long samples_so_far = 0;
};

struct RunSummary {
    long epochs = 0;
    std::optional<double> avg_gap;
    std::optional<double> avg_violation;
    std::optional<double> avg_signed_violation;  // (1/K) sum -J_c(theta_k), no positive part
    long total_samples = 0;
    double lambda_final = 0.0;
    VectorXd theta_final;
};

struct RunResult {
    std::vector<RunRecord> records;
    RunSummary summary;
    std::vector<long> samples_per_draw;
    std::vector<MatrixXd> occupancies;  // nu^{pi_k}, when requested and an oracle is attached
};

/// Exact quantities the driver may consult for reporting only; the learner never reads them.
struct RunOracle {
    double J_star = 0.0;
};

struct RunObservers {
    std::function<void(const RunRecord&)> on_epoch;
    CriticObserver on_critic;
    ActorObserver on_actor;
};

/// Driver loop: per epoch, both critics, then both NPG loops, then theta, then lambda.
/// The chain cursor starts at s_0 ~ rho and is never reset.
inline RunResult run_pdnac(const TabularCmdp& m, const ParamPolicy& policy0, const PdConfig& cfg,
                           const RunOracle* oracle = nullptr, const RunObservers& obs = {}) {
    cfg.validate();
    policy0.check_compatible(m);
    cfg.phi_r.check_compatible(m);
    cfg.phi_c.check_compatible(m);

    RunResult out;
    ParamPolicy policy = policy0;
    double lambda = 0.0;
    ChainCursor cursor = ChainCursor::start(m, cfg.seed);
    const std::vector<Signal> signals{Signal::reward, Signal::cost};
    const std::vector<const FeatureMap*> features{&cfg.phi_r, &cfg.phi_c};
    double gap_sum = 0.0;
    double viol_sum = 0.0;
    double signed_sum = 0.0;
    long samples = 0;

    for (long k = 0; k < cfg.K; ++k) {
        const auto epoch = static_cast<std::uint64_t>(k);
        const PolicyTable table(policy);
        const std::size_t before = out.samples_per_draw.size();

        const auto xi = run_critics(m, table, cursor, cfg.critic, signals, features, epoch, &out.samples_per_draw,
                                    obs.on_critic);
        const auto omega = run_npgs(m, table, cursor, cfg.actor, signals, xi, features, epoch,
                                    &out.samples_per_draw, obs.on_actor);
        for (std::size_t i = before; i < out.samples_per_draw.size(); ++i) samples += out.samples_per_draw[i];

        RunRecord rec;
        rec.k = k;
        rec.lambda = lambda;
        rec.eta_r = xi[0].eta;
        rec.eta_c = xi[1].eta;
        rec.theta = policy.theta();
        rec.samples_so_far = samples;
        if (oracle) {
            const PolicyMatrix probs = table.probs;
            const StationaryInfo info = stationary(m, probs);
            rec.J_r = info.nu.cwiseProduct(m.reward()).sum();
            rec.J_c = info.nu.cwiseProduct(m.cost()).sum();
            rec.gap = oracle->J_star - *rec.J_r;
            rec.violation = std::max(0.0, -*rec.J_c);
            gap_sum += *rec.gap;
            viol_sum += *rec.violation;
            signed_sum -= *rec.J_c;
            if (cfg.keep_occupancies) out.occupancies.push_back(info.nu);
        }

        const VectorXd direction = omega[0].omega + lambda * omega[1].omega;
        policy = policy.with_theta(primal_update(policy.theta(), cfg.alpha, direction));
        lambda = dual_update(lambda, cfg.beta, xi[1].eta, cfg.delta);

        if (obs.on_epoch) obs.on_epoch(rec);
        out.records.push_back(std::move(rec));
    }

    out.summary.epochs = cfg.K;
    out.summary.total_samples = samples;
    out.summary.lambda_final = lambda;
    out.summary.theta_final = policy.theta();
    if (oracle && cfg.K > 0) {
        out.summary.avg_gap = gap_sum / static_cast<double>(cfg.K);
        out.summary.avg_violation = viol_sum / static_cast<double>(cfg.K);
        out.summary.avg_signed_violation = signed_sum / static_cast<double>(cfg.K);
    }
    return out;
}

/// Lagrangian-gap extraction identity: with C = 2/delta, a gap bound zeta gives
/// an averaged violation bound 2 zeta / C = delta zeta.
inline double violation_bound_from_gap(double zeta, double delta) { return 2.0 * zeta / (2.0 / delta); }

}  // namespace pdnac

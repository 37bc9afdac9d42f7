#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pdnac/io.hpp"
#include "pdnac/log.hpp"
#include "pdnac/oracle.hpp"
#include "pdnac/pdnac.hpp"
#include "pdnac/recursion.hpp"

namespace pdnac {

namespace fs = std::filesystem;

/// CLI exit code for an exception escaping a command.
inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const AssumptionError*>(&e) ||
        dynamic_cast<const json::exception*>(&e))
        return exit_codes::config_error;
    if (dynamic_cast<const InfeasibleError*>(&e) || dynamic_cast<const ErgodicityError*>(&e))
        return exit_codes::infeasible;
    if (dynamic_cast<const NumericError*>(&e)) return exit_codes::divergence;
    return 1;
}

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Least-squares slope of log y against log x; nullopt with fewer than min_points
/// points or any non-positive coordinate.
inline std::optional<double> loglog_slope(const std::vector<double>& x, const std::vector<double>& y,
                                          std::size_t min_points = 4) {
    if (x.size() != y.size() || x.size() < min_points) return std::nullopt;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) return std::nullopt;
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double n = static_cast<double>(x.size());
    const double den = n * sxx - sx * sx;
    if (std::abs(den) < 1e-300) return std::nullopt;
    return (n * sxy - sx * sy) / den;
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---------------------------------------------------------------------------
// Experiment configuration

enum class Experiment { pdnac, critic_fixpoint, npg_fixpoint };

inline Experiment experiment_from_string(const std::string& s) {
    if (s == "pdnac") return Experiment::pdnac;
    if (s == "critic_fixpoint") return Experiment::critic_fixpoint;
    if (s == "npg_fixpoint") return Experiment::npg_fixpoint;
    throw ConfigError("experiment: unknown kind '" + s + "' (pdnac, critic_fixpoint, npg_fixpoint)");
}

struct InstanceSpec {
    std::optional<fs::path> file;
    std::string generator = "random_ergodic";
    long n_states = 0;
    long n_actions = 0;
    std::uint64_t seed = 0;
    double smoothing = 0.1;
};

struct FeatureSpec {
    std::string name = "centered_one_hot";
    std::optional<MatrixXd> matrix;

    [[nodiscard]] FeatureMap build(Index n_states) const {
        return matrix ? FeatureMap::from_matrix(*matrix) : FeatureMap::by_name(name, n_states);
    }
};

struct PolicySpec {
    PolicyFamily family = PolicyFamily::tabular_softmax;
    std::optional<MatrixXd> psi;  // linear family; default is one indicator per (s,a) pair
    std::optional<VectorXd> theta0;

    [[nodiscard]] ParamPolicy build(Index n_states, Index n_actions) const {
        if (family == PolicyFamily::tabular_softmax) {
            if (psi) throw ConfigError("policy.psi only applies to linear_softmax");
            return ParamPolicy::tabular(n_states, n_actions, theta0.value_or(VectorXd{}));
        }
        MatrixXd p = psi ? *psi : MatrixXd::Identity(n_states * n_actions, n_states * n_actions);
        return ParamPolicy::linear(n_states, n_actions, std::move(p), theta0.value_or(VectorXd{}));
    }
};

struct ScheduleSpec {
    Schedule schedule;
    bool tau_from_oracle = false;
};

struct CriticSpec {
    double gamma_xi = 0.0;
    std::optional<double> c_gamma;  // nullopt: the compliant value for the oracle's lambda_hat
    long t_max = 256;
    double divergence_factor = 1e3;
};

struct ActorSpec {
    double gamma_omega = 0.0;
    double mu_ridge = 1e-6;
    long t_max = 256;
    double divergence_factor = 1e3;
};

struct ProbeSpec {
    int count = 50;
    std::uint64_t seed = 1;
};

struct FixpointSpec {
    std::uint64_t theta_seed = 0;
    double theta_scale = 0.5;
    std::vector<long> H_grid;
    Signal which = Signal::reward;
};

struct TelemetrySpec {
    bool jsonl = true;
    long stride = 1;
};

struct ExperimentConfig {
    Experiment experiment = Experiment::pdnac;
    InstanceSpec instance;
    PolicySpec policy;
    FeatureSpec phi_r;
    FeatureSpec phi_c;
    ScheduleSpec schedule;
    std::optional<long> epochs;
    std::optional<double> delta;
    CriticSpec critic;
    ActorSpec actor;
    ProbeSpec probes;
    FixpointSpec fixpoint;
    std::vector<std::uint64_t> seeds;
    std::vector<long> T_grid;
    fs::path output_dir = "pdnac_out";
    bool record_wall_time = false;
    TelemetrySpec telemetry;
    json echo;  // the config exactly as given
};

namespace detail {

inline FeatureSpec parse_features(const json& v, const std::string& where) {
    FeatureSpec f;
    if (v.is_string()) f.name = v.get<std::string>();
    else if (v.is_array()) {
        f.name = "matrix";
        f.matrix = matrix_from_json(v, where);
    } else throw ConfigError(where + ": expected a feature name or an m x S matrix");
    return f;
}

inline std::uint64_t get_seed(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
    throw ConfigError(where + ": expected a non-negative integer");
}

}  // namespace detail

/// Parse and validate a config; relative instance paths resolve against base_dir.
inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir = ".") {
    reject_unknown_keys(j, {"experiment", "instance", "policy", "features", "schedule", "epochs", "delta", "critic",
                            "actor", "probes", "fixpoint", "seeds", "T_grid", "output_dir", "record_wall_time",
                            "telemetry", "description"},
                        "config");
    ExperimentConfig c;
    c.echo = j;
    if (j.contains("experiment")) c.experiment = experiment_from_string(get_string(j["experiment"], "experiment"));

    const json& inst = require(j, "instance", "config");
    if (inst.contains("file")) {
        reject_unknown_keys(inst, {"file"}, "instance");
        fs::path p = get_string(inst["file"], "instance.file");
        c.instance.file = p.is_absolute() ? p : base_dir / p;
    } else {
        reject_unknown_keys(inst, {"generator", "n_states", "n_actions", "seed", "smoothing"}, "instance");
        c.instance.generator = get_string(require(inst, "generator", "instance"), "instance.generator");
        if (c.instance.generator != "random_ergodic")
            throw ConfigError("instance.generator: unknown generator '" + c.instance.generator + "'");
        c.instance.n_states = get_integer(require(inst, "n_states", "instance"), "instance.n_states");
        c.instance.n_actions = get_integer(require(inst, "n_actions", "instance"), "instance.n_actions");
        if (inst.contains("seed")) c.instance.seed = detail::get_seed(inst["seed"], "instance.seed");
        if (inst.contains("smoothing")) c.instance.smoothing = get_number(inst["smoothing"], "instance.smoothing");
        if (c.instance.n_states < 1 || c.instance.n_actions < 1)
            throw ConfigError("instance: n_states and n_actions must be >= 1");
    }

    if (j.contains("policy")) {
        const json& p = j["policy"];
        reject_unknown_keys(p, {"family", "psi", "theta0"}, "policy");
        if (p.contains("family")) c.policy.family = policy_family_from_string(get_string(p["family"], "policy.family"));
        if (p.contains("psi")) c.policy.psi = matrix_from_json(p["psi"], "policy.psi");
        if (p.contains("theta0")) c.policy.theta0 = vector_from_json(p["theta0"], "policy.theta0");
    }

    if (j.contains("features")) {
        const json& f = j["features"];
        reject_unknown_keys(f, {"reward", "cost"}, "features");
        if (f.contains("reward")) c.phi_r = detail::parse_features(f["reward"], "features.reward");
        if (f.contains("cost")) c.phi_c = detail::parse_features(f["cost"], "features.cost");
    }

    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        const std::string kind = get_string(require(s, "kind", "schedule"), "schedule.kind");
        if (kind == "known_mixing") {
            reject_unknown_keys(s, {"kind", "tau_mix", "h_const"}, "schedule");
            c.schedule.schedule.kind = MixingKnowledge::known;
            const json& tau = require(s, "tau_mix", "schedule");
            if (tau.is_string()) {
                if (tau.get<std::string>() != "oracle") throw ConfigError("schedule.tau_mix: expected a number or \"oracle\"");
                c.schedule.tau_from_oracle = true;
            } else {
                c.schedule.schedule.tau_mix = get_number(tau, "schedule.tau_mix");
                if (c.schedule.schedule.tau_mix < 1.0) throw ConfigError("schedule.tau_mix must be >= 1");
            }
            if (s.contains("h_const")) c.schedule.schedule.h_const = get_number(s["h_const"], "schedule.h_const");
            if (!(c.schedule.schedule.h_const > 0.0)) throw ConfigError("schedule.h_const must be > 0");
        } else if (kind == "unknown_mixing") {
            reject_unknown_keys(s, {"kind", "epsilon"}, "schedule");
            c.schedule.schedule.kind = MixingKnowledge::unknown;
            c.schedule.schedule.epsilon = get_number(require(s, "epsilon", "schedule"), "schedule.epsilon");
            if (!(c.schedule.schedule.epsilon > 0.0 && c.schedule.schedule.epsilon < 1.0))
                throw ConfigError("schedule.epsilon must lie in (0,1)");
        } else {
            throw ConfigError("schedule.kind: expected known_mixing or unknown_mixing");
        }
    } else if (c.experiment == Experiment::pdnac) {
        throw ConfigError("config: missing required key 'schedule'");
    }

    if (j.contains("epochs")) {
        c.epochs = get_integer(j["epochs"], "epochs");
        if (*c.epochs < 0) throw ConfigError("epochs must be >= 0");
    }
    if (j.contains("delta")) {
        const json& d = j["delta"];
        if (!(d.is_string() && d.get<std::string>() == "oracle")) {
            c.delta = get_number(d, "delta");
            if (!(*c.delta > 0.0 && *c.delta < 1.0)) throw ConfigError("delta must lie in (0,1)");
        }
    }

    if (j.contains("critic")) {
        const json& s = j["critic"];
        reject_unknown_keys(s, {"gamma_xi", "c_gamma", "t_max", "divergence_factor"}, "critic");
        if (s.contains("gamma_xi")) c.critic.gamma_xi = get_number(s["gamma_xi"], "critic.gamma_xi");
        if (s.contains("c_gamma")) {
            const json& cg = s["c_gamma"];
            if (cg.is_string()) {
                if (cg.get<std::string>() != "compliant") throw ConfigError("critic.c_gamma: expected a number or \"compliant\"");
            } else {
                c.critic.c_gamma = get_number(cg, "critic.c_gamma");
            }
        }
        if (s.contains("t_max")) c.critic.t_max = get_integer(s["t_max"], "critic.t_max");
        if (s.contains("divergence_factor"))
            c.critic.divergence_factor = get_number(s["divergence_factor"], "critic.divergence_factor");
    }
    if (!(c.critic.gamma_xi > 0.0)) throw ConfigError("critic.gamma_xi must be > 0");

    if (j.contains("actor")) {
        const json& s = j["actor"];
        reject_unknown_keys(s, {"gamma_omega", "mu_ridge", "t_max", "divergence_factor"}, "actor");
        if (s.contains("gamma_omega")) c.actor.gamma_omega = get_number(s["gamma_omega"], "actor.gamma_omega");
        if (s.contains("mu_ridge")) c.actor.mu_ridge = get_number(s["mu_ridge"], "actor.mu_ridge");
        if (s.contains("t_max")) c.actor.t_max = get_integer(s["t_max"], "actor.t_max");
        if (s.contains("divergence_factor"))
            c.actor.divergence_factor = get_number(s["divergence_factor"], "actor.divergence_factor");
    }
    if (c.experiment != Experiment::critic_fixpoint && !(c.actor.gamma_omega > 0.0))
        throw ConfigError("actor.gamma_omega must be > 0");

    if (j.contains("probes")) {
        const json& s = j["probes"];
        reject_unknown_keys(s, {"count", "seed"}, "probes");
        if (s.contains("count")) c.probes.count = static_cast<int>(get_integer(s["count"], "probes.count"));
        if (s.contains("seed")) c.probes.seed = detail::get_seed(s["seed"], "probes.seed");
        if (c.probes.count < 1) throw ConfigError("probes.count must be >= 1");
    }

    if (j.contains("fixpoint")) {
        const json& s = j["fixpoint"];
        reject_unknown_keys(s, {"theta_seed", "theta_scale", "H_grid", "signal"}, "fixpoint");
        if (s.contains("theta_seed")) c.fixpoint.theta_seed = detail::get_seed(s["theta_seed"], "fixpoint.theta_seed");
        if (s.contains("theta_scale")) c.fixpoint.theta_scale = get_number(s["theta_scale"], "fixpoint.theta_scale");
        if (s.contains("H_grid")) {
            for (const auto& h : require(s, "H_grid", "fixpoint")) c.fixpoint.H_grid.push_back(get_integer(h, "fixpoint.H_grid"));
        }
        if (s.contains("signal")) {
            const std::string g = get_string(s["signal"], "fixpoint.signal");
            if (g == "reward") c.fixpoint.which = Signal::reward;
            else if (g == "cost") c.fixpoint.which = Signal::cost;
            else throw ConfigError("fixpoint.signal: expected reward or cost");
        }
    }
    if (c.experiment != Experiment::pdnac) {
        if (c.fixpoint.H_grid.empty()) throw ConfigError("fixpoint.H_grid must list at least one H");
        for (long h : c.fixpoint.H_grid)
            if (h < 1) throw ConfigError("fixpoint.H_grid entries must be >= 1");
    }

    const json& seeds = require(j, "seeds", "config");
    if (!seeds.is_array() || seeds.empty()) throw ConfigError("seeds: expected a non-empty array");
    for (const auto& s : seeds) c.seeds.push_back(detail::get_seed(s, "seeds"));

    if (c.experiment == Experiment::pdnac) {
        const json& grid = require(j, "T_grid", "config");
        if (!grid.is_array() || grid.empty()) throw ConfigError("T_grid: expected a non-empty array");
        for (const auto& t : grid) {
            const long T = get_integer(t, "T_grid");
            if (T < 1) throw ConfigError("T_grid entries must be >= 1");
            c.T_grid.push_back(T);
        }
    } else if (j.contains("T_grid")) {
        throw ConfigError("T_grid only applies to the pdnac experiment");
    }

    if (j.contains("output_dir")) c.output_dir = get_string(j["output_dir"], "output_dir");
    if (j.contains("record_wall_time")) c.record_wall_time = get_bool(j["record_wall_time"], "record_wall_time");
    if (j.contains("telemetry")) {
        const json& s = j["telemetry"];
        reject_unknown_keys(s, {"jsonl", "stride"}, "telemetry");
        if (s.contains("jsonl")) c.telemetry.jsonl = get_bool(s["jsonl"], "telemetry.jsonl");
        if (s.contains("stride")) c.telemetry.stride = get_integer(s["stride"], "telemetry.stride");
        if (c.telemetry.stride < 1) throw ConfigError("telemetry.stride must be >= 1");
    }
    if (c.critic.t_max < 1 || c.actor.t_max < 1) throw ConfigError("t_max must be >= 1");
    return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
    const json j = read_json_file(path);
    try {
        return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline TabularCmdp build_instance(const InstanceSpec& spec) {
    if (spec.file) return load_cmdp(*spec.file);
    return make_random_ergodic(spec.n_states, spec.n_actions, spec.seed, spec.smoothing);
}

// ---------------------------------------------------------------------------
// Oracle report

struct OracleReport {
    bool feasible = true;
    double J_star = 0.0;
    double slater_margin = 0.0;
    MatrixXd occupancy;
    PolicyMatrix policy;
    bool randomized = false;    // optimal policy mixes actions in some visited state
    long tau_max = 1;           // over theta0, probes, and (when enumerable) deterministic policies
    long tau_min = 1;
    long tau_uniform = 1;
    long policies_checked = 0;
    double lambda_hat_r = 0.0;  // positive-definiteness constant, min over theta0 and probes
    double lambda_hat_c = 0.0;
    double c_gamma = 1.0;       // compliant value for min(lambda_hat_r, lambda_hat_c)

    [[nodiscard]] double lambda_hat() const { return std::min(lambda_hat_r, lambda_hat_c); }

    [[nodiscard]] json to_json() const {
        json j{{"feasible", feasible}};
        if (!feasible) {
            j["slater_margin"] = slater_margin;
            return j;
        }
        auto finite_or_null = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
        j["J_r_star"] = J_star;
        j["slater_margin"] = slater_margin;
        j["optimal_occupancy"] = pdnac::to_json(occupancy);
        j["optimal_policy"] = pdnac::to_json(MatrixXd(policy));
        j["optimal_policy_randomized"] = randomized;
        j["tau_mix"] = {{"max", tau_max}, {"min", tau_min}, {"uniform", tau_uniform}, {"policies_checked", policies_checked}};
        j["lambda_hat"] = {{"reward", finite_or_null(lambda_hat_r)}, {"cost", finite_or_null(lambda_hat_c)}};
        j["c_gamma_compliant"] = c_gamma;
        return j;
    }
};

inline std::string policy_to_string(const PolicyMatrix& p) { return pdnac::to_json(MatrixXd(p)).dump(); }

/// Exact instance diagnostics. Throws ErgodicityError naming the first checked policy whose
/// chain is reducible or periodic; an infeasible LP yields feasible = false.
inline OracleReport compute_oracle(const TabularCmdp& m, const ParamPolicy& pi0, const FeatureMap& phi_r,
                                   const FeatureMap& phi_c, const ProbeSpec& probes) {
    OracleReport r;
    std::vector<PolicyMatrix> policies{pi0.probs_matrix()};
    for (auto& p : probe_policies(m, probes.count, probes.seed)) policies.push_back(std::move(p));
    const std::size_t n_lambda = policies.size();
    const double n_det = std::pow(static_cast<double>(m.n_actions()), static_cast<double>(m.n_states()));
    if (n_det <= 4096.0)
        for (auto& p : deterministic_policies(m.n_states(), m.n_actions())) policies.push_back(std::move(p));

    r.tau_max = 0;
    r.tau_min = std::numeric_limits<long>::max();
    for (const auto& p : policies) {
        if (!is_ergodic_chain(induced_chain(m, p)))
            throw ErgodicityError("policy " + policy_to_string(p) + " induces a reducible or periodic chain");
        const long t = stationary(m, p).mixing_time;
        r.tau_max = std::max(r.tau_max, t);
        r.tau_min = std::min(r.tau_min, t);
    }
    r.policies_checked = static_cast<long>(policies.size());
    r.tau_uniform = stationary(m, uniform_policy(m.n_states(), m.n_actions())).mixing_time;

    r.lambda_hat_r = r.lambda_hat_c = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n_lambda; ++i) {
        r.lambda_hat_r = std::min(r.lambda_hat_r, exact_critic_fixpoint(m, policies[i], phi_r, 1.0, Signal::reward).lambda);
        r.lambda_hat_c = std::min(r.lambda_hat_c, exact_critic_fixpoint(m, policies[i], phi_c, 1.0, Signal::cost).lambda);
    }
    r.c_gamma = std::isfinite(r.lambda_hat()) ? compliant_c_gamma(r.lambda_hat()) : 1.0;

    try {
        const CmdpSolution sol = solve_cmdp_lp(m);
        r.J_star = sol.J_star;
        r.slater_margin = sol.slater_margin;
        r.occupancy = sol.occupancy;
        r.policy = sol.policy;
        for (Index s = 0; s < m.n_states(); ++s)
            if (sol.occupancy.row(s).sum() > 1e-9 && sol.policy.row(s).maxCoeff() < 1.0 - 1e-9) r.randomized = true;
    } catch (const InfeasibleError&) {
        r.feasible = false;
        r.slater_margin = max_average(m, m.cost());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Prepared experiment: everything derived once per config

struct PreparedExperiment {
    ExperimentConfig cfg;
    TabularCmdp cmdp;
    ParamPolicy policy0;
    FeatureMap phi_r;
    FeatureMap phi_c;
    OracleReport oracle;
    double delta = 0.5;
    double c_gamma = 1.0;
    Schedule schedule;

    [[nodiscard]] json resolved() const {
        return json{{"delta", delta},
                    {"c_gamma", c_gamma},
                    {"tau_mix", schedule.tau_mix},
                    {"lambda_hat", std::isfinite(oracle.lambda_hat()) ? json(oracle.lambda_hat()) : json(nullptr)}};
    }
};

inline PreparedExperiment prepare(const ExperimentConfig& cfg) {
    TabularCmdp m = build_instance(cfg.instance);
    ParamPolicy pi0 = cfg.policy.build(m.n_states(), m.n_actions());
    pi0.check_compatible(m);
    FeatureMap phi_r = cfg.phi_r.build(m.n_states());
    FeatureMap phi_c = cfg.phi_c.build(m.n_states());
    phi_r.check_compatible(m);
    phi_c.check_compatible(m);
    OracleReport oracle = compute_oracle(m, pi0, phi_r, phi_c, cfg.probes);

    PreparedExperiment p{cfg, std::move(m), std::move(pi0), std::move(phi_r), std::move(phi_c), oracle, 0.5, 1.0, {}};
    if (cfg.experiment == Experiment::pdnac) {
        if (!oracle.feasible)
            throw InfeasibleError("instance is infeasible: max J_c = " + format_double(oracle.slater_margin) + " < 0");
        if (cfg.delta) {
            p.delta = *cfg.delta;
        } else {
            if (!(oracle.slater_margin > 0.0))
                throw InfeasibleError("no strictly feasible policy (Slater margin " + format_double(oracle.slater_margin) +
                                      "); supply delta explicitly");
            p.delta = std::min(oracle.slater_margin, 0.999);
        }
    }
    p.c_gamma = cfg.critic.c_gamma.value_or(oracle.c_gamma);
    p.schedule = cfg.schedule.schedule;
    if (cfg.schedule.tau_from_oracle) p.schedule.tau_mix = static_cast<double>(oracle.tau_max);
    return p;
}

// ---------------------------------------------------------------------------
// PDNAC cells

struct CellResult {
    long T = 0;
    std::uint64_t seed = 0;
    ScheduleParams params;
    RunSummary summary;
    MlmcCostReport cost;
    StepAdmissibility admissibility;
    double lambda_min = 0.0;  // over every recorded epoch and the final iterate
    double lambda_max = 0.0;
    double lambda_cap = 0.0;  // 2 / delta
    double wall_ms = 0.0;
    std::string jsonl;        // telemetry, when requested

    [[nodiscard]] bool lambda_in_range() const { return lambda_min >= 0.0 && lambda_max <= lambda_cap; }

    [[nodiscard]] json to_json() const {
        return json{{"T", T},
                    {"seed", seed},
                    {"K", params.K},
                    {"H", params.H},
                    {"alpha", params.alpha},
                    {"beta", params.beta},
                    {"avg_gap", optional_json(summary.avg_gap)},
                    {"avg_violation", optional_json(summary.avg_violation)},
                    {"avg_signed_violation", optional_json(summary.avg_signed_violation)},
                    {"total_samples", summary.total_samples},
                    {"mean_samples_per_draw", cost.draws ? json(cost.mean_samples) : json(nullptr)},
                    {"lambda_final", summary.lambda_final},
                    {"lambda_range", {lambda_min, lambda_max}},
                    {"lambda_cap", lambda_cap},
                    {"theta_final", pdnac::to_json(summary.theta_final)},
                    {"step_admissibility",
                     {{"gamma_xi_theory", admissibility.gamma_xi_theory},
                      {"gamma_omega_theory", admissibility.gamma_omega_theory},
                      {"gamma_xi_max", admissibility.gamma_xi_max},
                      {"gamma_omega_max", admissibility.gamma_omega_max},
                      {"critic_step_ok", admissibility.critic_step_ok},
                      {"critic_tmax_ok", admissibility.critic_tmax_ok},
                      {"actor_step_ok", admissibility.actor_step_ok},
                      {"actor_tmax_ok", admissibility.actor_tmax_ok}}},
                    {"wall_ms", wall_ms}};
    }
};

inline json record_to_json(const RunRecord& r) {
    json j{{"k", r.k}, {"lambda", r.lambda}, {"eta_r", r.eta_r}, {"eta_c", r.eta_c}};
    if (r.J_r) j["J_r_exact"] = *r.J_r;
    if (r.J_c) j["J_c_exact"] = *r.J_c;
    if (r.gap) j["gap"] = *r.gap;
    if (r.violation) j["violation"] = *r.violation;
    j["samples_so_far"] = r.samples_so_far;
    return j;
}

inline PdConfig make_pd_config(const PreparedExperiment& p, const ScheduleParams& sp, std::uint64_t seed) {
    PdConfig c;
    c.K = p.cfg.epochs.value_or(sp.K);
    c.alpha = sp.alpha;
    c.beta = sp.beta;
    c.delta = p.delta;
    c.critic.c_gamma = p.c_gamma;
    c.critic.gamma_xi = p.cfg.critic.gamma_xi;
    c.critic.h_inner = sp.H;
    c.critic.mlmc.t_max = p.cfg.critic.t_max;
    c.critic.divergence_factor = p.cfg.critic.divergence_factor;
    if (std::isfinite(p.oracle.lambda_hat())) c.critic.lambda_hat = p.oracle.lambda_hat();
    c.actor.gamma_omega = p.cfg.actor.gamma_omega;
    c.actor.h_inner = sp.H;
    c.actor.mlmc.t_max = p.cfg.actor.t_max;
    c.actor.mu_ridge = p.cfg.actor.mu_ridge;
    c.actor.divergence_factor = p.cfg.actor.divergence_factor;
    c.phi_r = p.phi_r;
    c.phi_c = p.phi_c;
    c.seed = seed;
    return c;
}

/// One (T, seed) cell of a pdnac sweep. Telemetry is kept in memory when with_jsonl.
inline CellResult run_cell(const PreparedExperiment& p, long T, std::uint64_t seed, bool with_jsonl) {
    CellResult out;
    out.T = T;
    out.seed = seed;
    out.params = schedule_params(T, p.schedule);
    if (p.cfg.epochs) out.params.K = *p.cfg.epochs;
    if (p.schedule.kind == MixingKnowledge::unknown) {
        const double tau = static_cast<double>(p.oracle.tau_max);
        if (std::pow(static_cast<double>(T), p.schedule.epsilon) < tau * tau)
            log::warn("T = " + std::to_string(T) + ": T^epsilon is below tau_mix^2 = " + format_double(tau * tau) +
                      "; the unknown-mixing schedule is outside its regime");
    }
    const PdConfig cfg = make_pd_config(p, out.params, seed);
    const double g1 = p.policy0.score_bound();
    out.admissibility = check_step_admissibility(T, out.params.H, cfg.critic.mlmc.t_max, cfg.critic.gamma_xi,
                                                 cfg.actor.gamma_omega, cfg.critic.c_gamma,
                                                 cfg.critic.lambda_hat.value_or(1.0), cfg.actor.mu_ridge, g1,
                                                 p.schedule.tau_mix);
    log::info("cell T=" + std::to_string(T) + " seed=" + std::to_string(seed) + ": K=" + std::to_string(cfg.K) +
              " H=" + std::to_string(out.params.H) + " critic step ok=" +
              (out.admissibility.critic_step_ok ? "yes" : "no") +
              " actor step ok=" + (out.admissibility.actor_step_ok ? "yes" : "no"));

    out.lambda_cap = 2.0 / cfg.delta;
    out.lambda_min = std::numeric_limits<double>::infinity();
    out.lambda_max = -std::numeric_limits<double>::infinity();
    std::string jsonl;
    const long stride = p.cfg.telemetry.stride;
    RunObservers obs;
    obs.on_epoch = [&](const RunRecord& r) {
        out.lambda_min = std::min(out.lambda_min, r.lambda);
        out.lambda_max = std::max(out.lambda_max, r.lambda);
        if (with_jsonl && r.k % stride == 0) {
            jsonl += record_to_json(r).dump();
            jsonl += '\n';
        }
    };
    const RunOracle oracle{p.oracle.J_star};
    const auto t0 = std::chrono::steady_clock::now();
    RunResult res = run_pdnac(p.cmdp, p.policy0, cfg, &oracle, obs);
    const auto t1 = std::chrono::steady_clock::now();
    out.lambda_min = std::min(out.lambda_min, res.summary.lambda_final);
    out.lambda_max = std::max(out.lambda_max, res.summary.lambda_final);
    out.summary = std::move(res.summary);
    if (!res.samples_per_draw.empty()) out.cost = mlmc_cost_report(res.samples_per_draw, cfg.critic.mlmc);
    if (p.cfg.record_wall_time) out.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    out.jsonl = std::move(jsonl);
    return out;
}

struct PerT {
    long T = 0;
    double median_gap = 0.0;
    double median_violation = 0.0;
    double median_signed_violation = 0.0;
};

struct SweepSummary {
    std::vector<CellResult> cells;
    std::vector<PerT> per_T;
    std::optional<double> slope_gap;
    std::optional<double> slope_violation;
    std::optional<double> slope_signed_violation;
};

inline SweepSummary summarize_cells(std::vector<CellResult> cells) {
    SweepSummary s;
    std::vector<long> Ts;
    for (const auto& c : cells)
        if (std::find(Ts.begin(), Ts.end(), c.T) == Ts.end()) Ts.push_back(c.T);
    std::sort(Ts.begin(), Ts.end());
    std::vector<double> x, g, v, sv;
    for (long T : Ts) {
        std::vector<double> gaps, viols, signed_v;
        for (const auto& c : cells) {
            if (c.T != T || !c.summary.avg_gap) continue;
            gaps.push_back(*c.summary.avg_gap);
            viols.push_back(*c.summary.avg_violation);
            signed_v.push_back(*c.summary.avg_signed_violation);
        }
        if (gaps.empty()) continue;
        PerT pt{T, median(gaps), median(viols), median(signed_v)};
        s.per_T.push_back(pt);
        x.push_back(static_cast<double>(T));
        g.push_back(pt.median_gap);
        v.push_back(pt.median_violation);
        sv.push_back(pt.median_signed_violation);
    }
    s.slope_gap = loglog_slope(x, g);
    s.slope_violation = loglog_slope(x, v);
    s.slope_signed_violation = loglog_slope(x, sv);
    s.cells = std::move(cells);
    return s;
}

inline json per_T_json(const SweepSummary& s) {
    json arr = json::array();
    for (const auto& p : s.per_T)
        arr.push_back({{"T", p.T},
                       {"median_avg_gap", p.median_gap},
                       {"median_avg_violation", p.median_violation},
                       {"median_avg_signed_violation", p.median_signed_violation}});
    return arr;
}

inline std::string results_csv(const SweepSummary& s) {
    std::string out = "T,seed,avg_gap,avg_violation,total_samples,wall_ms\n";
    for (const auto& c : s.cells) {
        out += std::to_string(c.T) + "," + std::to_string(c.seed) + ",";
        out += (c.summary.avg_gap ? format_double(*c.summary.avg_gap) : "") + ",";
        out += (c.summary.avg_violation ? format_double(*c.summary.avg_violation) : "") + ",";
        out += std::to_string(c.summary.total_samples) + "," + format_double(c.wall_ms) + "\n";
    }
    return out;
}

/// Runs fn(i) for i in [0, n) on up to jobs threads; rethrows the lowest-index failure.
template <class Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline fs::path cell_dir(const fs::path& out, long T, std::uint64_t seed) {
    return out / "cells" / ("T" + std::to_string(T) + "_seed" + std::to_string(seed));
}

inline SweepSummary run_pdnac_sweep(const PreparedExperiment& p, const std::optional<fs::path>& out_dir, int jobs = 1) {
    struct Key {
        long T;
        std::uint64_t seed;
    };
    std::vector<Key> keys;
    for (long T : p.cfg.T_grid)
        for (auto s : p.cfg.seeds) keys.push_back({T, s});
    std::vector<CellResult> cells(keys.size());
    const bool jsonl = out_dir && p.cfg.telemetry.jsonl;
    parallel_for(keys.size(), jobs, [&](std::size_t i) {
        CellResult c = run_cell(p, keys[i].T, keys[i].seed, jsonl);
        if (out_dir) {
            const fs::path dir = cell_dir(*out_dir, c.T, c.seed);
            if (jsonl) write_file_atomic(dir / "records.jsonl", c.jsonl);
            write_file_atomic(dir / "summary.json", c.to_json().dump(2) + "\n");
        }
        c.jsonl.clear();
        cells[i] = std::move(c);
    });
    return summarize_cells(std::move(cells));
}

inline json sweep_summary_json(const PreparedExperiment& p, const SweepSummary& s) {
    json cells = json::array();
    for (const auto& c : s.cells) cells.push_back(c.to_json());
    return json{{"experiment", "pdnac"},
                {"cells", cells},
                {"per_T", per_T_json(s)},
                {"slope_gap", optional_json(s.slope_gap)},
                {"slope_violation", optional_json(s.slope_violation)},
                {"slope_signed_violation", optional_json(s.slope_signed_violation)},
                {"oracle", p.oracle.to_json()},
                {"resolved", p.resolved()},
                {"config_echo", p.cfg.echo}};
}

// ---------------------------------------------------------------------------
// Fixed-point experiments (critic and NPG inner loops at a fixed random theta)

inline ParamPolicy fixpoint_policy(const PreparedExperiment& p) {
    const Index d = p.policy0.dim();
    Rng rng = make_stream(StreamKey{p.cfg.fixpoint.theta_seed, 1, StreamTag::generator, 0});
    std::normal_distribution<double> normal(0.0, p.cfg.fixpoint.theta_scale);
    VectorXd theta(d);
    for (Index i = 0; i < d; ++i) theta(i) = normal(rng);
    return p.policy0.with_theta(theta);
}

struct FixpointRow {
    long H = 0;
    std::uint64_t seed = 0;
    double sq_error = 0.0;
    std::optional<double> sq_error_estimated_xi;  // npg only
};

struct FixpointSummary {
    Experiment kind = Experiment::critic_fixpoint;
    double target_sq_norm = 0.0;  // ||xi*||^2 or ||omega*||^2
    double lambda = 0.0;
    double c_gamma = 0.0;
    std::vector<FixpointRow> rows;
    std::vector<long> H;
    std::vector<double> median_sq_error;
    std::vector<double> median_sq_error_estimated_xi;

    [[nodiscard]] json to_json() const {
        json per_H = json::array();
        for (std::size_t i = 0; i < H.size(); ++i) {
            json e{{"H", H[i]},
                   {"median_sq_error", median_sq_error[i]},
                   {"median_rel_error", median_sq_error[i] / target_sq_norm}};
            if (kind == Experiment::npg_fixpoint) {
                e["median_sq_error_estimated_xi"] = median_sq_error_estimated_xi[i];
                e["estimated_to_exact_ratio"] = median_sq_error_estimated_xi[i] / median_sq_error[i];
            }
            per_H.push_back(e);
        }
        return json{{"experiment", kind == Experiment::critic_fixpoint ? "critic_fixpoint" : "npg_fixpoint"},
                    {"target_sq_norm", target_sq_norm},
                    {"lambda", lambda},
                    {"c_gamma", c_gamma},
                    {"per_H", per_H}};
    }

    [[nodiscard]] std::string csv() const {
        std::string out = kind == Experiment::critic_fixpoint ? "H,seed,sq_error\n" : "H,seed,sq_error,sq_error_estimated_xi\n";
        for (const auto& r : rows) {
            out += std::to_string(r.H) + "," + std::to_string(r.seed) + "," + format_double(r.sq_error);
            if (r.sq_error_estimated_xi) out += "," + format_double(*r.sq_error_estimated_xi);
            out += "\n";
        }
        return out;
    }
};

inline FixpointSummary run_fixpoint(const PreparedExperiment& p, int jobs = 1) {
    const auto& fx = p.cfg.fixpoint;
    const Signal which = fx.which;
    const FeatureMap& phi = which == Signal::reward ? p.phi_r : p.phi_c;
    const ParamPolicy pi = fixpoint_policy(p);
    const PolicyTable table(pi);
    const double lam = exact_critic_fixpoint(p.cmdp, pi, phi, 1.0, which).lambda;
    FixpointSummary out;
    out.kind = p.cfg.experiment;
    out.lambda = lam;
    out.c_gamma = p.cfg.critic.c_gamma.value_or(std::isfinite(lam) ? compliant_c_gamma(lam) : 1.0);
    const CriticFixpoint fp = exact_critic_fixpoint(p.cmdp, pi, phi, out.c_gamma, which);
    const CriticVec xi_star = CriticVec::from_stacked(fp.xi);
    const VectorXd omega_star =
        out.kind == Experiment::npg_fixpoint ? exact_npg(p.cmdp, pi, which, p.cfg.actor.mu_ridge) : VectorXd{};
    out.target_sq_norm = out.kind == Experiment::critic_fixpoint ? fp.xi.squaredNorm() : omega_star.squaredNorm();

    for (long H : fx.H_grid)
        for (auto s : p.cfg.seeds) out.rows.push_back({H, s, 0.0, std::nullopt});

    parallel_for(out.rows.size(), jobs, [&](std::size_t i) {
        FixpointRow& row = out.rows[i];
        CriticConfig cc;
        cc.c_gamma = out.c_gamma;
        cc.gamma_xi = p.cfg.critic.gamma_xi;
        cc.h_inner = row.H;
        cc.mlmc.t_max = p.cfg.critic.t_max;
        cc.divergence_factor = p.cfg.critic.divergence_factor;
        if (std::isfinite(lam)) cc.lambda_hat = lam;
        if (out.kind == Experiment::critic_fixpoint) {
            ChainCursor cursor = ChainCursor::start(p.cmdp, row.seed);
            const CriticVec xi = run_critic(p.cmdp, table, cursor, cc, phi, which);
            row.sq_error = (xi.stacked() - fp.xi).squaredNorm();
            return;
        }
        ActorConfig ac;
        ac.gamma_omega = p.cfg.actor.gamma_omega;
        ac.h_inner = row.H;
        ac.mlmc.t_max = p.cfg.actor.t_max;
        ac.mu_ridge = p.cfg.actor.mu_ridge;
        ac.divergence_factor = p.cfg.actor.divergence_factor;
        ChainCursor exact_cursor = ChainCursor::start(p.cmdp, row.seed);
        row.sq_error = (run_npg(p.cmdp, table, exact_cursor, ac, xi_star, phi, which).omega - omega_star).squaredNorm();
        ChainCursor cursor = ChainCursor::start(p.cmdp, row.seed);
        const CriticVec xi = run_critic(p.cmdp, table, cursor, cc, phi, which);
        row.sq_error_estimated_xi =
            (run_npg(p.cmdp, table, cursor, ac, xi, phi, which).omega - omega_star).squaredNorm();
    });

    for (long H : fx.H_grid) {
        std::vector<double> e, e2;
        for (const auto& r : out.rows) {
            if (r.H != H) continue;
            e.push_back(r.sq_error);
            if (r.sq_error_estimated_xi) e2.push_back(*r.sq_error_estimated_xi);
        }
        out.H.push_back(H);
        out.median_sq_error.push_back(median(e));
        out.median_sq_error_estimated_xi.push_back(e2.empty() ? std::numeric_limits<double>::quiet_NaN() : median(e2));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

/// Runs a config and writes its artifacts under out_dir; returns the summary JSON.
inline json cmd_run(const ExperimentConfig& cfg, const fs::path& out_dir, int jobs = 1) {
    const PreparedExperiment p = prepare(cfg);
    write_file_atomic(out_dir / "config.json", cfg.echo.dump(2) + "\n");
    write_file_atomic(out_dir / "oracle.json", p.oracle.to_json().dump(2) + "\n");
    json summary;
    if (cfg.experiment == Experiment::pdnac) {
        const SweepSummary s = run_pdnac_sweep(p, out_dir, jobs);
        write_file_atomic(out_dir / "results.csv", results_csv(s));
        summary = sweep_summary_json(p, s);
    } else {
        const FixpointSummary s = run_fixpoint(p, jobs);
        write_file_atomic(out_dir / "fixpoint.csv", s.csv());
        summary = s.to_json();
        summary["resolved"] = p.resolved();
        summary["config_echo"] = cfg.echo;
    }
    write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");
    return summary;
}

// ---------------------------------------------------------------------------
// SVG plots

struct PlotSeries {
    std::string title;
    std::string y_label;
    std::vector<double> x;
    std::vector<double> y;
    std::optional<double> slope;
};

/// Log-log scatter with the least-squares fit (when given) and a -1/2 reference line.
inline std::string render_loglog_svg(const PlotSeries& s) {
    constexpr double W = 640, H = 440, L = 80, R = 30, T = 50, B = 60;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < s.x.size(); ++i)
        if (s.x[i] > 0.0 && s.y[i] > 0.0) {
            lx.push_back(std::log10(s.x[i]));
            ly.push_back(std::log10(s.y[i]));
        }
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << s.title << "</text>\n";
    if (lx.empty()) {
        o << "<text x=\"" << W / 2 << "\" y=\"" << H / 2 << "\" text-anchor=\"middle\">no positive data points</text>\n</svg>\n";
        return o.str();
    }
    double x0 = *std::min_element(lx.begin(), lx.end()), x1 = *std::max_element(lx.begin(), lx.end());
    double y0 = *std::min_element(ly.begin(), ly.end()), y1 = *std::max_element(ly.begin(), ly.end());
    // room for the reference line over the same x span
    y0 = std::min(y0, ly.front() - 0.5 * (x1 - x0));
    x0 = std::floor(x0 * 2 - 0.25) / 2;
    x1 = std::ceil(x1 * 2 + 0.25) / 2;
    y0 = std::floor(y0 - 0.1);
    y1 = std::ceil(y1 + 0.1);
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double v = std::ceil(x0 * 2) / 2; v <= x1 + 1e-9; v += 0.5)
        o << "<text x=\"" << px(v) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">1e" << format_double(v)
          << "</text>\n";
    for (double v = y0; v <= y1 + 1e-9; v += 1.0)
        o << "<text x=\"" << L - 8 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">1e" << format_double(v)
          << "</text>\n";
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">T</text>\n";
    o << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << (T + H - B) / 2 << ")\">" << s.y_label << "</text>\n";

    const double rx0 = lx.front(), ry0 = ly.front(), rx1 = lx.back();
    o << "<line x1=\"" << px(rx0) << "\" y1=\"" << py(ry0) << "\" x2=\"" << px(rx1) << "\" y2=\""
      << py(ry0 - 0.5 * (rx1 - rx0)) << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
    if (s.slope) {
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < lx.size(); ++i) {
            mx += lx[i];
            my += ly[i];
        }
        mx /= static_cast<double>(lx.size());
        my /= static_cast<double>(lx.size());
        const double a = lx.front(), b = lx.back();
        o << "<line x1=\"" << px(a) << "\" y1=\"" << py(my + *s.slope * (a - mx)) << "\" x2=\"" << px(b) << "\" y2=\""
          << py(my + *s.slope * (b - mx)) << "\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n";
    }
    for (std::size_t i = 0; i < lx.size(); ++i)
        o << "<circle cx=\"" << px(lx[i]) << "\" cy=\"" << py(ly[i]) << "\" r=\"4\" fill=\"crimson\"/>\n";
    std::ostringstream legend;
    legend << "dashed: slope -1/2 reference";
    if (s.slope) legend << "; fitted slope " << format_double(std::round(*s.slope * 1e4) / 1e4);
    o << "<text x=\"" << L + 8 << "\" y=\"" << T + 18 << "\">" << legend.str() << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

/// Writes <stem>_gap.svg and <stem>_violation.svg for each sweep summary; returns the paths.
inline std::vector<fs::path> cmd_plot(const std::vector<fs::path>& summaries, const fs::path& out_dir) {
    if (summaries.empty()) throw ConfigError("plot: no summary files given");
    std::vector<fs::path> written;
    for (const auto& path : summaries) {
        const json j = read_json_file(path);
        if (!j.contains("per_T") || !j["per_T"].is_array())
            throw ConfigError(path.string() + ": not a pdnac sweep summary (missing per_T)");
        PlotSeries gap{"median time-averaged gap", "avg gap", {}, {}, std::nullopt};
        PlotSeries viol{"median time-averaged violation", "avg violation", {}, {}, std::nullopt};
        for (const auto& e : j["per_T"]) {
            const double T = get_number(require(e, "T", "per_T"), "per_T.T");
            gap.x.push_back(T);
            viol.x.push_back(T);
            gap.y.push_back(get_number(require(e, "median_avg_gap", "per_T"), "per_T.median_avg_gap"));
            viol.y.push_back(get_number(require(e, "median_avg_violation", "per_T"), "per_T.median_avg_violation"));
        }
        gap.slope = loglog_slope(gap.x, gap.y, 2);
        viol.slope = loglog_slope(viol.x, viol.y, 2);
        std::string stem = path.stem().string();
        if (stem == "summary" && path.has_parent_path()) stem = path.parent_path().filename().string();
        const fs::path g = out_dir / (stem + "_gap.svg");
        const fs::path v = out_dir / (stem + "_violation.svg");
        write_file_atomic(g, render_loglog_svg(gap));
        write_file_atomic(v, render_loglog_svg(viol));
        written.push_back(g);
        written.push_back(v);
    }
    return written;
}

// ---------------------------------------------------------------------------
// Self-test

/// Recursion error bound in its four noise regimes plus oracle residual checks on random instances.
inline json selftest_report(int replicas = 400) {
    json regimes = json::array();
    bool ok = true;
    for (const auto& [regime, spec] : recursion_suite()) {
        const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(spec.dim());
        const BoundReport r = verify_error_bound(spec, x0, replicas, 6);
        bool pass = r.pass;
        if (regime == "noiseless") pass = pass && std::abs(r.measured - r.deterministic) <= 1e-10;
        ok = ok && pass;
        regimes.push_back({{"regime", regime},
                      {"measured", r.measured},
                      {"deterministic", r.deterministic},
                      {"exp_term", r.exp_term},
                      {"floor_term", r.floor_term},
                      {"bound", r.bound},
                      {"ratio", r.ratio},
                      {"pass", pass}});
    }
    double worst_bellman = 0.0, worst_critic = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TabularCmdp m = make_random_ergodic(4, 3, seed, 0.1);
        const PolicyMatrix probs = uniform_policy(4, 3);
        for (Signal g : {Signal::reward, Signal::cost}) {
            const ValueBundle v = exact_values(m, probs, g);
            worst_bellman = std::max(worst_bellman, bellman_residual(m, m.signal(g), v));
            const CriticFixpoint fp = exact_critic_fixpoint(m, probs, FeatureMap::centered_one_hot(4), 2.0, g);
            worst_critic = std::max(worst_critic, (fp.A * fp.xi - fp.b).cwiseAbs().maxCoeff());
        }
    }
    const bool oracle_ok = worst_bellman <= 1e-8 && worst_critic <= 1e-8;
    ok = ok && oracle_ok;
    return json{{"recursion", regimes},
                {"oracle", {{"max_bellman_residual", worst_bellman}, {"max_critic_residual", worst_critic}, {"pass", oracle_ok}}},
                {"pass", ok}};
}

}  // namespace pdnac

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pdnac/cmdp.hpp"
#include "pdnac/errors.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

struct MlmcConfig {
    long t_max = 1;

    [[nodiscard]] int top_level() const {
        int j = 0;
        while ((2L << j) <= t_max) ++j;
        return j;  // floor(log2 t_max)
    }
    void validate() const {
        if (t_max < 1) throw ConfigError("t_max must be >= 1");
    }
};

struct MlmcDraw {
    int level = 1;           // Q >= 1, P(Q = j) = 2^-j
    long traj_len = 1;       // 2^Q if 2^Q <= t_max, else 1
    bool corrected = false;  // whether the telescoping correction is applied
    [[nodiscard]] long samples_used() const { return traj_len; }
};

inline MlmcDraw make_draw(int level, const MlmcConfig& cfg) {
    MlmcDraw d;
    d.level = level;
    d.corrected = level < 62 && (1L << level) <= cfg.t_max;
    d.traj_len = d.corrected ? (1L << level) : 1;
    return d;
}

inline MlmcDraw draw_level(Rng& rng, const MlmcConfig& cfg) {
    // std::geometric_distribution counts failures before the first success
    std::geometric_distribution<int> geom(0.5);
    return make_draw(geom(rng) + 1, cfg);
}

/// Weight of transition t in g^0 + 2^Q (g^Q - g^{Q-1}):
/// 0 for t = 0, -1 for 1 <= t < 2^{Q-1}, +1 for 2^{Q-1} <= t < 2^Q.
inline double mlmc_weight(const MlmcDraw& d, long t) {
    if (!d.corrected) return t == 0 ? 1.0 : 0.0;
    if (t == 0) return 0.0;
    const long half = 1L << (d.level - 1);
    return t < half ? -1.0 : 1.0;
}

/// MLMC combination of per-transition estimates f(z_t) over one trajectory.
template <typename Estimator>
Eigen::VectorXd mlmc_estimate(const std::vector<Transition>& traj, const MlmcDraw& d, Estimator&& f) {
    if (static_cast<long>(traj.size()) != d.traj_len)
        throw std::logic_error("trajectory length does not match the MLMC draw");
    Eigen::VectorXd g0 = f(traj[0]);
    if (!d.corrected) return g0;
    // g^Q and g^{Q-1} via plain sums
    Eigen::VectorXd lower = g0;  // sum over t < 2^{Q-1}
    Eigen::VectorXd upper = Eigen::VectorXd::Zero(g0.size());
    const long half = d.traj_len / 2;
    for (long t = 1; t < d.traj_len; ++t) {
        if (t < half) lower += f(traj[static_cast<std::size_t>(t)]);
        else upper += f(traj[static_cast<std::size_t>(t)]);
    }
    const double scale = static_cast<double>(d.traj_len);
    const Eigen::VectorXd gq = (lower + upper) / scale;
    const Eigen::VectorXd gq1 = lower / static_cast<double>(half);
    return g0 + scale * (gq - gq1);
}

/// E[traj_len] = J + 2^-J with J = floor(log2 t_max).
inline double expected_traj_len(const MlmcConfig& cfg) {
    const int top = cfg.top_level();
    return static_cast<double>(top) + std::ldexp(1.0, -top);
}

/// Exact law of the level: P(Q = j) for j = 1..top, plus the truncated tail mass.
inline double level_probability(int j) { return std::ldexp(1.0, -j); }

struct MlmcCostReport {
    double mean_samples = 0.0;
    long p99_samples = 0;
    long max_samples = 0;
    std::size_t draws = 0;
    bool in_band = true;  // mean within [0.5 log2 t_max, 2 log2 t_max + 2] (only checked for t_max >= 8)
};

inline MlmcCostReport mlmc_cost_report(const std::vector<long>& samples_per_draw, const MlmcConfig& cfg) {
    if (samples_per_draw.empty()) throw ConfigError("MLMC cost report needs at least one draw");
    MlmcCostReport r;
    r.draws = samples_per_draw.size();
    double total = 0.0;
    for (long s : samples_per_draw) total += static_cast<double>(s);
    r.mean_samples = total / static_cast<double>(r.draws);
    std::vector<long> sorted = samples_per_draw;
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(r.draws))) - 1;
    r.p99_samples = sorted[std::min(idx, sorted.size() - 1)];
    r.max_samples = sorted.back();
    if (cfg.t_max >= 8) {
        const double lg = std::log2(static_cast<double>(cfg.t_max));
        r.in_band = r.mean_samples >= 0.5 * lg && r.mean_samples <= 2.0 * lg + 2.0;
    }
    return r;
}

}  // namespace pdnac

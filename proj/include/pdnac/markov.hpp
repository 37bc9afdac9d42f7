#pragma once

#include <Eigen/Dense>

#include <numeric>
#include <optional>
#include <queue>
#include <vector>

#include "pdnac/cmdp.hpp"

namespace pdnac {

/// Row-stochastic nS x nA matrix of action probabilities pi(a|s).
using PolicyMatrix = MatrixXd;

/// State-to-state kernel P^pi(s,s') = sum_a pi(a|s) P(s'|s,a).
inline MatrixXd induced_chain(const TabularCmdp& m, const PolicyMatrix& probs) {
    if (probs.rows() != m.n_states() || probs.cols() != m.n_actions())
        throw ConfigError("policy matrix does not match CMDP dimensions");
    MatrixXd kernel = MatrixXd::Zero(m.n_states(), m.n_states());
    for (Index s = 0; s < m.n_states(); ++s)
        for (Index a = 0; a < m.n_actions(); ++a)
            kernel.row(s) += probs(s, a) * m.next_state_dist(s, a);
    return kernel;
}

/// g^pi(s) = sum_a pi(a|s) g(s,a).
inline VectorXd induced_signal(const MatrixXd& g, const PolicyMatrix& probs) {
    return g.cwiseProduct(probs).rowwise().sum();
}

namespace detail {

inline std::vector<int> bfs_levels(const MatrixXd& kernel, Index source) {
    const Index n = kernel.rows();
    std::vector<int> level(static_cast<std::size_t>(n), -1);
    std::queue<Index> frontier;
    level[static_cast<std::size_t>(source)] = 0;
    frontier.push(source);
    while (!frontier.empty()) {
        const Index u = frontier.front();
        frontier.pop();
        for (Index v = 0; v < n; ++v) {
            if (kernel(u, v) > 0.0 && level[static_cast<std::size_t>(v)] < 0) {
                level[static_cast<std::size_t>(v)] = level[static_cast<std::size_t>(u)] + 1;
                frontier.push(v);
            }
        }
    }
    return level;
}

}  // namespace detail

/// Single communicating class: every state reaches every other along positive entries.
inline bool is_irreducible(const MatrixXd& kernel) {
    const Index n = kernel.rows();
    for (Index s = 0; s < n; ++s) {
        const auto level = detail::bfs_levels(kernel, s);
        for (int l : level)
            if (l < 0) return false;
    }
    return true;
}

/// Period of an irreducible chain: gcd over edges u->v of level(u) + 1 - level(v).
inline long chain_period(const MatrixXd& kernel) {
    const Index n = kernel.rows();
    const auto level = detail::bfs_levels(kernel, 0);
    long g = 0;
    for (Index u = 0; u < n; ++u) {
        if (level[static_cast<std::size_t>(u)] < 0) continue;
        for (Index v = 0; v < n; ++v) {
            if (kernel(u, v) <= 0.0 || level[static_cast<std::size_t>(v)] < 0) continue;
            const long diff = level[static_cast<std::size_t>(u)] + 1 - level[static_cast<std::size_t>(v)];
            g = std::gcd(g, diff < 0 ? -diff : diff);
        }
    }
    return g;
}

inline bool is_ergodic_chain(const MatrixXd& kernel) {
    return is_irreducible(kernel) && chain_period(kernel) == 1;
}

inline PolicyMatrix uniform_policy(Index n_states, Index n_actions) {
    return PolicyMatrix::Constant(n_states, n_actions, 1.0 / static_cast<double>(n_actions));
}

inline PolicyMatrix deterministic_policy(Index n_actions, const std::vector<Index>& action_of_state) {
    PolicyMatrix probs = PolicyMatrix::Zero(static_cast<Index>(action_of_state.size()), n_actions);
    for (std::size_t s = 0; s < action_of_state.size(); ++s)
        probs(static_cast<Index>(s), action_of_state[s]) = 1.0;
    return probs;
}

/// The probe set used by check_ergodic: uniform first, then alternately random
/// deterministic and random Dirichlet policies.
inline std::vector<PolicyMatrix> probe_policies(const TabularCmdp& m, int n_probe_policies,
                                                std::uint64_t seed) {
    std::vector<PolicyMatrix> out;
    out.push_back(uniform_policy(m.n_states(), m.n_actions()));
    Rng rng = make_stream(seed, StreamTag::probe);
    std::uniform_int_distribution<Index> pick(0, m.n_actions() - 1);
    for (int i = 0; i < n_probe_policies; ++i) {
        PolicyMatrix probs(m.n_states(), m.n_actions());
        if (i % 2 == 0) {
            probs.setZero();
            for (Index s = 0; s < m.n_states(); ++s) probs(s, pick(rng)) = 1.0;
        } else {
            for (Index s = 0; s < m.n_states(); ++s)
                probs.row(s) = detail::sample_dirichlet(rng, m.n_actions()).transpose();
        }
        out.push_back(std::move(probs));
    }
    return out;
}

/// First probe policy whose induced chain is reducible or periodic, if any.
inline std::optional<PolicyMatrix> find_non_ergodic_policy(const TabularCmdp& m, int n_probe_policies,
                                                           std::uint64_t seed) {
    if (n_probe_policies < 1) throw ConfigError("n_probe_policies must be >= 1");
    for (auto& probs : probe_policies(m, n_probe_policies, seed))
        if (!is_ergodic_chain(induced_chain(m, probs))) return probs;
    return std::nullopt;
}

/// Sampling check of ergodicity over the uniform policy plus random probes.
inline bool check_ergodic(const TabularCmdp& m, int n_probe_policies, std::uint64_t seed) {
    return !find_non_ergodic_policy(m, n_probe_policies, seed).has_value();
}

}  // namespace pdnac

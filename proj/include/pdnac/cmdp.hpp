#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pdnac/errors.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Which of the two per-step signals an estimate refers to.
enum class Signal { reward, cost };

inline const char* to_string(Signal g) { return g == Signal::reward ? "reward" : "cost"; }

/// Provenance recorded alongside a CMDP when it is serialized.
struct CmdpMeta {
    std::uint64_t seed = 0;
    std::string generator = "manual";
};

/// Finite constrained MDP (S, A, r, c, P, rho).
///
/// Immutable after construction; every invariant is checked by the constructor.
/// Transitions are stored as an (nS*nA) x nS matrix whose row s*nA + a is P(.|s,a).
class TabularCmdp {
public:
    static constexpr double kSimplexTol = 1e-12;

    TabularCmdp(Index n_states, Index n_actions, MatrixXd transition, MatrixXd reward,
                MatrixXd cost, VectorXd initial_dist, CmdpMeta meta = {})
        : n_states_(n_states),
          n_actions_(n_actions),
          transition_(std::move(transition)),
          reward_(std::move(reward)),
          cost_(std::move(cost)),
          initial_(std::move(initial_dist)),
          meta_(std::move(meta)) {
        validate();
        build_cdf();
    }

    [[nodiscard]] Index n_states() const { return n_states_; }
    [[nodiscard]] Index n_actions() const { return n_actions_; }
    [[nodiscard]] Index n_pairs() const { return n_states_ * n_actions_; }
    [[nodiscard]] Index pair_index(Index s, Index a) const { return s * n_actions_ + a; }

    [[nodiscard]] const MatrixXd& transition() const { return transition_; }
    [[nodiscard]] auto next_state_dist(Index s, Index a) const {
        return transition_.row(pair_index(s, a));
    }
    [[nodiscard]] double prob(Index s, Index a, Index s_next) const {
        return transition_(pair_index(s, a), s_next);
    }
    [[nodiscard]] const MatrixXd& reward() const { return reward_; }
    [[nodiscard]] const MatrixXd& cost() const { return cost_; }
    [[nodiscard]] const MatrixXd& signal(Signal g) const {
        return g == Signal::reward ? reward_ : cost_;
    }
    [[nodiscard]] double signal(Signal g, Index s, Index a) const { return signal(g)(s, a); }
    [[nodiscard]] const VectorXd& initial_dist() const { return initial_; }
    [[nodiscard]] const CmdpMeta& meta() const { return meta_; }

    /// Inverse-CDF draw of s' ~ P(.|s,a) given u in [0,1).
    [[nodiscard]] Index next_state_from_uniform(Index s, Index a, double u) const {
        const double* row = cdf_.data() + pair_index(s, a) * n_states_;
        for (Index j = 0; j + 1 < n_states_; ++j) {
            if (u < row[j]) return j;
        }
        return n_states_ - 1;
    }

    [[nodiscard]] Index initial_state_from_uniform(double u) const {
        double acc = 0.0;
        for (Index s = 0; s + 1 < n_states_; ++s) {
            acc += initial_(s);
            if (u < acc) return s;
        }
        return n_states_ - 1;
    }

    /// Copy with the reward and/or cost tables replaced (same dynamics).
    [[nodiscard]] TabularCmdp with_signals(MatrixXd reward, MatrixXd cost) const {
        return TabularCmdp(n_states_, n_actions_, transition_, std::move(reward), std::move(cost),
                           initial_, meta_);
    }

    friend bool operator==(const TabularCmdp& x, const TabularCmdp& y) {
        return x.n_states_ == y.n_states_ && x.n_actions_ == y.n_actions_ &&
               x.transition_ == y.transition_ && x.reward_ == y.reward_ && x.cost_ == y.cost_ &&
               x.initial_ == y.initial_;
    }

private:
    void validate() const {
        if (n_states_ < 1 || n_actions_ < 1) throw ConfigError("CMDP needs at least one state and one action");
        if (transition_.rows() != n_pairs() || transition_.cols() != n_states_)
            throw ConfigError("transition tensor has wrong shape");
        if (reward_.rows() != n_states_ || reward_.cols() != n_actions_)
            throw ConfigError("reward table has wrong shape");
        if (cost_.rows() != n_states_ || cost_.cols() != n_actions_)
            throw ConfigError("cost table has wrong shape");
        if (initial_.size() != n_states_) throw ConfigError("initial distribution has wrong size");
        if (!transition_.allFinite() || !reward_.allFinite() || !cost_.allFinite() || !initial_.allFinite())
            throw ConfigError("CMDP contains non-finite entries");
        for (Index i = 0; i < n_pairs(); ++i) {
            if (transition_.row(i).minCoeff() < 0.0)
                throw ConfigError("negative transition probability in row " + std::to_string(i));
            if (std::abs(transition_.row(i).sum() - 1.0) > kSimplexTol)
                throw ConfigError("transition row " + std::to_string(i) + " does not sum to 1");
        }
        if (reward_.minCoeff() < 0.0 || reward_.maxCoeff() > 1.0)
            throw ConfigError("reward entries must lie in [0,1]");
        if (cost_.minCoeff() < -1.0 || cost_.maxCoeff() > 1.0)
            throw ConfigError("cost entries must lie in [-1,1]");
        if (initial_.minCoeff() < 0.0 || std::abs(initial_.sum() - 1.0) > kSimplexTol)
            throw ConfigError("initial distribution is not a probability vector");
    }

    void build_cdf() {
        cdf_.resize(static_cast<std::size_t>(n_pairs() * n_states_));
        for (Index i = 0; i < n_pairs(); ++i) {
            double acc = 0.0;
            for (Index j = 0; j < n_states_; ++j) {
                acc += transition_(i, j);
                cdf_[static_cast<std::size_t>(i * n_states_ + j)] = acc;
            }
        }
    }

    Index n_states_;
    Index n_actions_;
    MatrixXd transition_;
    MatrixXd reward_;
    MatrixXd cost_;
    VectorXd initial_;
    CmdpMeta meta_;
    std::vector<double> cdf_;
};

/// One observed step z = (s, a, s') together with the signals g(s,a).
struct Transition {
    Index s = 0;
    Index a = 0;
    Index s_next = 0;
    double reward = 0.0;
    double cost = 0.0;

    [[nodiscard]] double signal(Signal g) const { return g == Signal::reward ? reward : cost; }
    friend bool operator==(const Transition&, const Transition&) = default;
};

namespace detail {

inline VectorXd sample_dirichlet(Rng& rng, Index n, double concentration = 1.0) {
    std::gamma_distribution<double> gamma(concentration, 1.0);
    VectorXd x(n);
    for (Index i = 0; i < n; ++i) x(i) = gamma(rng);
    const double total = x.sum();
    if (total <= 0.0) return VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    return x / total;
}

}  // namespace detail

/// Random CMDP whose every P(.|s,a) is a Dirichlet(1) draw mixed with the uniform
/// distribution at weight `smoothing`. All entries are then >= smoothing/nS, so the
/// chain induced by any policy is irreducible and aperiodic.
inline TabularCmdp make_random_ergodic(Index n_states, Index n_actions, std::uint64_t seed,
                                       double smoothing) {
    if (!(smoothing > 0.0) || smoothing > 1.0)
        throw ConfigError("smoothing must lie in (0,1]; zero smoothing loses the ergodicity guarantee");
    if (n_states < 1 || n_actions < 1) throw ConfigError("generator needs positive dimensions");
    Rng rng = make_stream(seed, StreamTag::generator);
    const Index n_pairs = n_states * n_actions;
    const double floor = smoothing / static_cast<double>(n_states);

    MatrixXd transition(n_pairs, n_states);
    for (Index i = 0; i < n_pairs; ++i) {
        const VectorXd dir = detail::sample_dirichlet(rng, n_states);
        for (Index j = 0; j < n_states; ++j) transition(i, j) = (1.0 - smoothing) * dir(j) + floor;
        // renormalize so the row sums to 1 to machine precision
        transition.row(i) /= transition.row(i).sum();
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    MatrixXd reward(n_states, n_actions);
    MatrixXd cost(n_states, n_actions);
    for (Index s = 0; s < n_states; ++s)
        for (Index a = 0; a < n_actions; ++a) reward(s, a) = unit(rng);
    for (Index s = 0; s < n_states; ++s)
        for (Index a = 0; a < n_actions; ++a) cost(s, a) = sym(rng);
    VectorXd rho = VectorXd::Constant(n_states, 1.0 / static_cast<double>(n_states));
    return TabularCmdp(n_states, n_actions, std::move(transition), std::move(reward),
                       std::move(cost), std::move(rho), CmdpMeta{seed, "random_ergodic"});
}

}  // namespace pdnac

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "pdnac/cmdp.hpp"
#include "pdnac/markov.hpp"

namespace pdnac {

enum class PolicyFamily { tabular_softmax, linear_softmax };

inline const char* to_string(PolicyFamily f) {
    return f == PolicyFamily::tabular_softmax ? "tabular_softmax" : "linear_softmax";
}

inline PolicyFamily policy_family_from_string(const std::string& name) {
    if (name == "tabular_softmax") return PolicyFamily::tabular_softmax;
    if (name == "linear_softmax") return PolicyFamily::linear_softmax;
    throw ConfigError("unknown policy family '" + name + "'");
}

/// Softmax policy pi_theta(a|s) over logits theta[s,a] (tabular) or <psi(s,a), theta> (linear).
///
/// Linear features are stored as a d x (nS*nA) matrix whose column s*nA + a is psi(s,a);
/// the matrix is shared between copies that differ only in theta.
class ParamPolicy {
public:
    static ParamPolicy tabular(Index n_states, Index n_actions, VectorXd theta = {}) {
        if (theta.size() == 0) theta = VectorXd::Zero(n_states * n_actions);
        return ParamPolicy(PolicyFamily::tabular_softmax, n_states, n_actions, nullptr, std::move(theta));
    }

    static ParamPolicy linear(Index n_states, Index n_actions, MatrixXd psi, VectorXd theta = {}) {
        if (psi.cols() != n_states * n_actions)
            throw ConfigError("policy feature matrix must have nS*nA columns");
        if (psi.rows() < 1) throw ConfigError("policy feature dimension must be positive");
        if (!psi.allFinite()) throw ConfigError("policy features contain non-finite entries");
        if (theta.size() == 0) theta = VectorXd::Zero(psi.rows());
        auto shared = std::make_shared<const MatrixXd>(std::move(psi));
        return ParamPolicy(PolicyFamily::linear_softmax, n_states, n_actions, std::move(shared),
                           std::move(theta));
    }

    [[nodiscard]] PolicyFamily family() const { return family_; }
    [[nodiscard]] Index n_states() const { return n_states_; }
    [[nodiscard]] Index n_actions() const { return n_actions_; }
    [[nodiscard]] Index dim() const { return theta_.size(); }
    [[nodiscard]] const VectorXd& theta() const { return theta_; }

    [[nodiscard]] ParamPolicy with_theta(VectorXd theta) const {
        ParamPolicy out = *this;
        out.theta_ = std::move(theta);
        out.check_theta();
        return out;
    }

    /// psi(s,a); for the tabular family this is the indicator of coordinate s*nA + a.
    [[nodiscard]] VectorXd feature(Index s, Index a) const {
        if (family_ == PolicyFamily::linear_softmax) return psi_->col(s * n_actions_ + a);
        VectorXd e = VectorXd::Zero(dim());
        e(s * n_actions_ + a) = 1.0;
        return e;
    }

    [[nodiscard]] VectorXd logits(Index s) const {
        check_state(s);
        if (family_ == PolicyFamily::tabular_softmax) return theta_.segment(s * n_actions_, n_actions_);
        return psi_->middleCols(s * n_actions_, n_actions_).transpose() * theta_;
    }

    [[nodiscard]] VectorXd action_probs(Index s) const {
        VectorXd z = logits(s);
        if (!z.allFinite()) throw NumericError("non-finite logits at state " + std::to_string(s));
        const double top = z.maxCoeff();
        VectorXd p = (z.array() - top).exp().matrix();
        return p / p.sum();
    }

    [[nodiscard]] PolicyMatrix probs_matrix() const {
        PolicyMatrix out(n_states_, n_actions_);
        for (Index s = 0; s < n_states_; ++s) out.row(s) = action_probs(s).transpose();
        return out;
    }

    [[nodiscard]] double log_prob(Index s, Index a) const {
        check_action(a);
        const VectorXd z = logits(s);
        if (!z.allFinite()) throw NumericError("non-finite logits at state " + std::to_string(s));
        const double top = z.maxCoeff();
        return z(a) - top - std::log((z.array() - top).exp().sum());
    }

    /// grad_theta log pi(a|s) = psi(s,a) - sum_b pi(b|s) psi(s,b).
    [[nodiscard]] VectorXd score(Index s, Index a) const {
        check_action(a);
        const VectorXd p = action_probs(s);
        if (family_ == PolicyFamily::tabular_softmax) {
            VectorXd out = VectorXd::Zero(dim());
            out.segment(s * n_actions_, n_actions_) = -p;
            out(s * n_actions_ + a) += 1.0;
            return out;
        }
        const auto block = psi_->middleCols(s * n_actions_, n_actions_);
        return block.col(a) - block * p;
    }

    [[nodiscard]] MatrixXd fisher_outer(Index s, Index a) const {
        const VectorXd g = score(s, a);
        return g * g.transpose();
    }

    /// Uniform bound on ||score||: sqrt(2) for tabular, 2 max ||psi|| for linear.
    [[nodiscard]] double score_bound() const {
        if (family_ == PolicyFamily::tabular_softmax) return std::sqrt(2.0);
        return 2.0 * psi_->colwise().norm().maxCoeff();
    }

    /// Lipschitz constant of theta -> score(s,a): the score Jacobian is -Cov_pi(psi),
    /// whose operator norm is at most max ||psi||^2.
    [[nodiscard]] double score_lipschitz() const {
        if (family_ == PolicyFamily::tabular_softmax) return 1.0;
        return psi_->colwise().squaredNorm().maxCoeff();
    }

    [[nodiscard]] const MatrixXd* linear_features() const { return psi_.get(); }

    void check_compatible(const TabularCmdp& m) const {
        if (m.n_states() != n_states_ || m.n_actions() != n_actions_)
            throw ConfigError("policy dimensions do not match the CMDP");
    }

private:
    ParamPolicy(PolicyFamily family, Index n_states, Index n_actions,
                std::shared_ptr<const MatrixXd> psi, VectorXd theta)
        : family_(family), n_states_(n_states), n_actions_(n_actions), psi_(std::move(psi)),
          theta_(std::move(theta)) {
        if (n_states_ < 1 || n_actions_ < 1) throw ConfigError("policy needs positive dimensions");
        check_theta();
    }

    void check_theta() const {
        const Index expected = family_ == PolicyFamily::tabular_softmax ? n_states_ * n_actions_ : psi_->rows();
        if (theta_.size() != expected)
            throw ConfigError("theta has dimension " + std::to_string(theta_.size()) + ", family expects " +
                              std::to_string(expected));
        if (!theta_.allFinite()) throw ConfigError("theta contains non-finite entries");
    }
    void check_state(Index s) const {
        if (s < 0 || s >= n_states_) throw ConfigError("state index out of range");
    }
    void check_action(Index a) const {
        if (a < 0 || a >= n_actions_) throw ConfigError("action index out of range");
    }

    PolicyFamily family_;
    Index n_states_;
    Index n_actions_;
    std::shared_ptr<const MatrixXd> psi_;
    VectorXd theta_;
};

/// Everything the inner loops need from a frozen policy, precomputed once per epoch:
/// action probabilities, their CDFs, and the score of every (s,a) pair.
struct PolicyTable {
    PolicyMatrix probs;
    PolicyMatrix cdf;
    MatrixXd scores;  // d x (nS*nA), column s*nA + a

    PolicyTable() = default;

    explicit PolicyTable(const ParamPolicy& pi) : probs(pi.probs_matrix()) {
        build_cdf();
        scores.resize(pi.dim(), pi.n_states() * pi.n_actions());
        for (Index s = 0; s < pi.n_states(); ++s)
            for (Index a = 0; a < pi.n_actions(); ++a) scores.col(s * pi.n_actions() + a) = pi.score(s, a);
    }

    /// Table for a fixed probability matrix; no parameters, so no scores.
    static PolicyTable from_probs(PolicyMatrix p) {
        PolicyTable t;
        t.probs = std::move(p);
        t.build_cdf();
        return t;
    }

    [[nodiscard]] Index n_states() const { return probs.rows(); }
    [[nodiscard]] Index n_actions() const { return probs.cols(); }

    [[nodiscard]] Index action_from_uniform(Index s, double u) const {
        for (Index a = 0; a + 1 < probs.cols(); ++a)
            if (u < cdf(s, a)) return a;
        return probs.cols() - 1;
    }

    [[nodiscard]] auto score(Index s, Index a) const { return scores.col(s * probs.cols() + a); }

private:
    void build_cdf() {
        cdf.resize(probs.rows(), probs.cols());
        for (Index s = 0; s < probs.rows(); ++s) {
            double acc = 0.0;
            for (Index a = 0; a < probs.cols(); ++a) cdf(s, a) = (acc += probs(s, a));
        }
    }
};

}  // namespace pdnac

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pdnac/cmdp.hpp"
#include "pdnac/features.hpp"
#include "pdnac/lp.hpp"
#include "pdnac/markov.hpp"
#include "pdnac/policy.hpp"

namespace pdnac {

struct StationaryInfo {
    VectorXd d;         // d^pi over states
    MatrixXd nu;        // nu^pi(s,a) = d(s) pi(a|s)
    long mixing_time = 1;
    double spectral_gap = 1.0;
};

struct ValueBundle {
    double J = 0.0;
    VectorXd V;  // centered: sum_s d(s) V(s) = 0
    MatrixXd Q;
    MatrixXd A;
};

inline constexpr long kMixingTimeCap = 1'000'000;
inline constexpr double kResidualTol = 1e-8;

/// Smallest t >= 1 with max_s TV(P^t(s,.), d) <= 1/4.
inline long mixing_time(const MatrixXd& kernel, const VectorXd& d, long cap = kMixingTimeCap) {
    MatrixXd power = kernel;
    for (long t = 1; t <= cap; ++t) {
        double worst = 0.0;
        for (Index s = 0; s < kernel.rows(); ++s)
            worst = std::max(worst, 0.5 * (power.row(s).transpose() - d).lpNorm<1>());
        if (worst <= 0.25) return t;
        power = power * kernel;
    }
    throw NumericError("mixing time exceeds cap of " + std::to_string(cap) + " steps (chain nearly reducible)");
}

/// Stationary distribution of an ergodic kernel: solve d^T (I - P) = 0 with sum(d) = 1.
inline VectorXd stationary_distribution(const MatrixXd& kernel) {
    if (!is_ergodic_chain(kernel)) throw ErgodicityError("induced chain is reducible or periodic");
    const Index n = kernel.rows();
    MatrixXd system = MatrixXd::Identity(n, n) - kernel.transpose();
    system.row(n - 1).setOnes();
    VectorXd rhs = VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    VectorXd d = system.colPivHouseholderQr().solve(rhs);
    const double residual = (d.transpose() * kernel - d.transpose()).cwiseAbs().maxCoeff();
    if (residual > 1e-10) throw NumericError("stationary distribution residual too large");
    return d.cwiseMax(0.0) / d.cwiseMax(0.0).sum();
}

inline double spectral_gap(const MatrixXd& kernel) {
    if (kernel.rows() == 1) return 1.0;
    Eigen::EigenSolver<MatrixXd> es(kernel, false);
    std::vector<double> mags;
    for (Index i = 0; i < kernel.rows(); ++i) mags.push_back(std::abs(es.eigenvalues()(i)));
    std::sort(mags.begin(), mags.end(), std::greater<>());
    return 1.0 - mags[1];
}

inline StationaryInfo stationary(const TabularCmdp& m, const PolicyMatrix& probs) {
    const MatrixXd kernel = induced_chain(m, probs);
    StationaryInfo info;
    info.d = stationary_distribution(kernel);
    info.nu = info.d.asDiagonal() * probs;
    info.mixing_time = mixing_time(kernel, info.d);
    info.spectral_gap = spectral_gap(kernel);
    return info;
}

inline StationaryInfo stationary(const TabularCmdp& m, const ParamPolicy& pi) {
    pi.check_compatible(m);
    return stationary(m, pi.probs_matrix());
}

/// Checks |V| <= 5 tau and |Q| <= 6 tau; these hold for every ergodic chain with |g| <= 1.
inline void check_value_bounds(const ValueBundle& v, long tau) {
    const double t = static_cast<double>(tau);
    if (v.V.cwiseAbs().maxCoeff() > 5.0 * t + 1e-9)
        throw NumericError("|V| exceeds 5 tau_mix; oracle invariant broken");
    if (v.Q.cwiseAbs().maxCoeff() > 6.0 * t + 1e-9)
        throw NumericError("|Q| exceeds 6 tau_mix; oracle invariant broken");
}

inline double bellman_residual(const TabularCmdp& m, const MatrixXd& g, const ValueBundle& v) {
    double worst = 0.0;
    for (Index s = 0; s < m.n_states(); ++s)
        for (Index a = 0; a < m.n_actions(); ++a) {
            const double rhs = g(s, a) - v.J + m.next_state_dist(s, a).dot(v.V);
            worst = std::max(worst, std::abs(v.Q(s, a) - rhs));
        }
    return worst;
}

/// Values of signal table g under probs, given the stationary info of probs.
///
/// V = (I - P + 1 d^T)^{-1} (g^pi - J 1) solves the Poisson equation and already
/// satisfies d^T V = 0, because d^T (I - P + 1 d^T) = d^T.
inline ValueBundle exact_values(const TabularCmdp& m, const PolicyMatrix& probs, const StationaryInfo& info,
                                const MatrixXd& g) {
    const Index n = m.n_states();
    const MatrixXd kernel = induced_chain(m, probs);
    ValueBundle v;
    v.J = info.nu.cwiseProduct(g).sum();
    const VectorXd g_pi = induced_signal(g, probs);
    const MatrixXd fundamental = MatrixXd::Identity(n, n) - kernel + VectorXd::Ones(n) * info.d.transpose();
    Eigen::FullPivLU<MatrixXd> lu(fundamental);
    if (!lu.isInvertible()) throw NumericError("Poisson system is singular (chain not ergodic)");
    v.V = lu.solve(g_pi - v.J * VectorXd::Ones(n));
    v.Q.resize(n, m.n_actions());
    for (Index s = 0; s < n; ++s)
        for (Index a = 0; a < m.n_actions(); ++a) v.Q(s, a) = g(s, a) - v.J + m.next_state_dist(s, a).dot(v.V);
    v.A = v.Q.colwise() - v.V;

    const double poisson = ((MatrixXd::Identity(n, n) - kernel) * v.V - (g_pi - v.J * VectorXd::Ones(n)))
                               .cwiseAbs()
                               .maxCoeff();
    if (poisson > kResidualTol || std::abs(info.d.dot(v.V)) > kResidualTol)
        throw NumericError("Poisson residual above tolerance");
    check_value_bounds(v, info.mixing_time);
    return v;
}

inline ValueBundle exact_values(const TabularCmdp& m, const PolicyMatrix& probs, Signal which) {
    return exact_values(m, probs, stationary(m, probs), m.signal(which));
}

inline ValueBundle exact_values(const TabularCmdp& m, const ParamPolicy& pi, Signal which) {
    pi.check_compatible(m);
    return exact_values(m, pi.probs_matrix(), which);
}

inline double average_value(const TabularCmdp& m, const PolicyMatrix& probs, Signal which) {
    return stationary_distribution(induced_chain(m, probs)).transpose() *
           induced_signal(m.signal(which), probs);
}

/// Both signals of one policy, sharing a single stationary computation.
struct PolicyEvaluation {
    StationaryInfo info;
    ValueBundle reward;
    ValueBundle cost;
    [[nodiscard]] const ValueBundle& of(Signal g) const { return g == Signal::reward ? reward : cost; }
};

inline PolicyEvaluation evaluate_policy(const TabularCmdp& m, const PolicyMatrix& probs) {
    PolicyEvaluation e;
    e.info = stationary(m, probs);
    e.reward = exact_values(m, probs, e.info, m.reward());
    e.cost = exact_values(m, probs, e.info, m.cost());
    return e;
}

/// sum_{s,a} nu(s,a) A(s,a) score(s,a).
inline VectorXd exact_policy_gradient(const ParamPolicy& pi, const StationaryInfo& info, const ValueBundle& v) {
    VectorXd grad = VectorXd::Zero(pi.dim());
    for (Index s = 0; s < pi.n_states(); ++s)
        for (Index a = 0; a < pi.n_actions(); ++a) grad += info.nu(s, a) * v.A(s, a) * pi.score(s, a);
    return grad;
}

inline VectorXd exact_policy_gradient(const TabularCmdp& m, const ParamPolicy& pi, Signal which) {
    pi.check_compatible(m);
    const PolicyMatrix probs = pi.probs_matrix();
    const StationaryInfo info = stationary(m, probs);
    return exact_policy_gradient(pi, info, exact_values(m, probs, info, m.signal(which)));
}

inline MatrixXd exact_fisher(const ParamPolicy& pi, const StationaryInfo& info) {
    MatrixXd f = MatrixXd::Zero(pi.dim(), pi.dim());
    for (Index s = 0; s < pi.n_states(); ++s)
        for (Index a = 0; a < pi.n_actions(); ++a) {
            const VectorXd g = pi.score(s, a);
            f.noalias() += info.nu(s, a) * (g * g.transpose());
        }
    return f;
}

inline MatrixXd exact_fisher(const TabularCmdp& m, const ParamPolicy& pi) {
    pi.check_compatible(m);
    return exact_fisher(pi, stationary(m, pi));
}

/// (F + mu I)^{-1} grad; for mu = 0 the minimum-norm solution, which must be consistent.
inline VectorXd solve_npg_system(const MatrixXd& fisher, const VectorXd& grad, double mu_ridge) {
    if (mu_ridge < 0.0) throw ConfigError("mu_ridge must be >= 0");
    if (mu_ridge > 0.0) {
        const MatrixXd reg = fisher + mu_ridge * MatrixXd::Identity(fisher.rows(), fisher.cols());
        return reg.ldlt().solve(grad);
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(fisher);
    cod.setThreshold(1e-12);
    VectorXd omega = cod.solve(grad);
    if ((fisher * omega - grad).norm() > kResidualTol * (1.0 + grad.norm()))
        throw NumericError("Fisher system is singular and the gradient is not in its range");
    return omega;
}

inline VectorXd exact_npg(const TabularCmdp& m, const ParamPolicy& pi, Signal which, double mu_ridge) {
    pi.check_compatible(m);
    const PolicyMatrix probs = pi.probs_matrix();
    const StationaryInfo info = stationary(m, probs);
    const VectorXd grad = exact_policy_gradient(pi, info, exact_values(m, probs, info, m.signal(which)));
    return solve_npg_system(exact_fisher(pi, info), grad, mu_ridge);
}

/// c_gamma from the positive-definiteness lemma: lambda + sqrt(1/lambda^2 - 1).
inline double compliant_c_gamma(double lambda) {
    if (!(lambda > 0.0)) throw AssumptionError("critic constant lambda must be positive");
    return lambda + std::sqrt(std::max(0.0, 1.0 / (lambda * lambda) - 1.0));
}

struct CriticFixpoint {
    VectorXd xi;            // (eta*, zeta*)
    MatrixXd A;             // E[A_g(z)]
    VectorXd b;             // E[b_g(z)]
    double lambda_min = 0;  // min eig of sym E[phi(s)(phi(s) - phi(s'))^T]
    double lambda = 0;      // same, restricted to the complement of the constant direction
    bool gauge_fixed = false;
};

/// Expected critic system and its solution xi* = A^{-1} b.
///
/// When the constant function is representable (phi^T w = 1 for some w), w lies in the
/// kernel of E[phi(s)(phi(s)-phi(s'))^T] and zeta* is only defined up to multiples of w;
/// we then pick the solution with sum_s d(s) <phi(s), zeta> = 0, matching the centering of V.
inline CriticFixpoint exact_critic_fixpoint(const TabularCmdp& m, const PolicyMatrix& probs,
                                            const FeatureMap& phi, double c_gamma, Signal which) {
    phi.check_compatible(m);
    const StationaryInfo info = stationary(m, probs);
    const MatrixXd kernel = induced_chain(m, probs);
    const Index n = m.n_states();
    const Index dim = phi.dim();
    const MatrixXd& Phi = phi.matrix();
    const VectorXd g_pi = induced_signal(m.signal(which), probs);
    const double J = info.nu.cwiseProduct(m.signal(which)).sum();

    CriticFixpoint out;
    const MatrixXd M = Phi * info.d.asDiagonal() * (MatrixXd::Identity(n, n) - kernel) * Phi.transpose();
    const VectorXd phi_d = Phi * info.d;
    out.A = MatrixXd::Zero(1 + dim, 1 + dim);
    out.A(0, 0) = c_gamma;
    out.A.block(1, 0, dim, 1) = phi_d;
    out.A.bottomRightCorner(dim, dim) = M;
    out.b.resize(1 + dim);
    out.b(0) = c_gamma * J;
    out.b.tail(dim) = Phi * info.d.asDiagonal() * g_pi;
    out.xi = VectorXd::Zero(1 + dim);
    out.xi(0) = J;
    if (dim == 0) {
        out.lambda_min = out.lambda = std::numeric_limits<double>::infinity();
        return out;
    }

    const MatrixXd sym = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sym);
    out.lambda_min = eig.eigenvalues()(0);

    // is the constant function in the feature span?
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(Phi.transpose());
    const VectorXd w = cod.solve(VectorXd::Ones(n));
    const bool constant_in_span = (Phi.transpose() * w - VectorXd::Ones(n)).norm() <= 1e-9;
    const VectorXd rhs = out.b.tail(dim) - phi_d * J;
    const double tol = 1e-10;
    if (constant_in_span) {
        out.gauge_fixed = true;
        if (dim == 1)
            throw AssumptionError("critic matrix is singular: features only span the constant function");
        // orthonormal basis of w^perp
        Eigen::HouseholderQR<MatrixXd> qr(w.normalized());
        const MatrixXd Qfull = qr.householderQ() * MatrixXd::Identity(dim, dim);
        const MatrixXd N = Qfull.rightCols(dim - 1);
        out.lambda = Eigen::SelfAdjointEigenSolver<MatrixXd>(N.transpose() * sym * N).eigenvalues()(0);
        if (out.lambda <= tol)
            throw AssumptionError("critic matrix is not positive definite on the gauge complement; "
                                  "features violate the critic positive-definiteness assumption");
        MatrixXd aug(dim + 1, dim);
        aug.topRows(dim) = M;
        aug.row(dim) = phi_d.transpose();
        VectorXd aug_rhs(dim + 1);
        aug_rhs << rhs, 0.0;
        out.xi.tail(dim) = aug.colPivHouseholderQr().solve(aug_rhs);
        if ((aug * out.xi.tail(dim) - aug_rhs).norm() > kResidualTol)
            throw NumericError("gauge-fixed critic system is inconsistent");
    } else {
        out.lambda = out.lambda_min;
        if (out.lambda <= tol)
            throw AssumptionError("critic matrix is not positive definite (lambda_min = " +
                                  std::to_string(out.lambda_min) + "); features violate the assumption");
        out.xi.tail(dim) = M.partialPivLu().solve(rhs);
    }
    return out;
}

inline CriticFixpoint exact_critic_fixpoint(const TabularCmdp& m, const ParamPolicy& pi, const FeatureMap& phi,
                                            double c_gamma, Signal which) {
    pi.check_compatible(m);
    return exact_critic_fixpoint(m, pi.probs_matrix(), phi, c_gamma, which);
}

// ---------------------------------------------------------------------------
// Occupancy-measure linear programs

namespace detail {

/// Flow and normalization constraints on mu(s,a) >= 0, variable index s*nA + a.
inline LinearProgram occupancy_lp(const TabularCmdp& m, const MatrixXd& objective) {
    const Index n = m.n_states();
    const Index k = m.n_pairs();
    LinearProgram lp;
    lp.A = MatrixXd::Zero(n + 1, k);
    lp.b = VectorXd::Zero(n + 1);
    for (Index s = 0; s < n; ++s)
        for (Index a = 0; a < m.n_actions(); ++a) {
            const Index j = m.pair_index(s, a);
            lp.A(s, j) += 1.0;
            for (Index t = 0; t < n; ++t) lp.A(t, j) -= m.prob(s, a, t);
        }
    lp.A.row(n).setOnes();
    lp.b(n) = 1.0;
    lp.sense.assign(static_cast<std::size_t>(n + 1), RowSense::eq);
    lp.c.resize(k);
    for (Index s = 0; s < n; ++s)
        for (Index a = 0; a < m.n_actions(); ++a) lp.c(m.pair_index(s, a)) = objective(s, a);
    return lp;
}

inline MatrixXd unflatten(const TabularCmdp& m, const VectorXd& x) {
    MatrixXd out(m.n_states(), m.n_actions());
    for (Index s = 0; s < m.n_states(); ++s)
        for (Index a = 0; a < m.n_actions(); ++a) out(s, a) = x(m.pair_index(s, a));
    return out;
}

}  // namespace detail

/// pi(a|s) = mu(s,a) / sum_b mu(s,b); uniform on states the occupancy never visits.
inline PolicyMatrix policy_from_occupancy(const MatrixXd& occupancy) {
    PolicyMatrix p(occupancy.rows(), occupancy.cols());
    for (Index s = 0; s < occupancy.rows(); ++s) {
        const double mass = occupancy.row(s).sum();
        if (mass > 1e-14) p.row(s) = occupancy.row(s) / mass;
        else p.row(s).setConstant(1.0 / static_cast<double>(occupancy.cols()));
    }
    return p;
}

struct CmdpSolution {
    double J_star = 0.0;
    MatrixXd occupancy;
    PolicyMatrix policy;
    double slater_margin = 0.0;  // max_pi J_c
};

/// max_pi J_g^pi via the unconstrained occupancy LP.
inline double max_average(const TabularCmdp& m, const MatrixXd& objective) {
    return solve_lp(detail::occupancy_lp(m, objective)).objective;
}

/// max J_r s.t. J_c >= 0 over occupancy measures.
inline CmdpSolution solve_cmdp_lp(const TabularCmdp& m) {
    CmdpSolution out;
    out.slater_margin = max_average(m, m.cost());
    if (out.slater_margin < -1e-12)
        throw InfeasibleError("no policy satisfies J_c >= 0 (max J_c = " + std::to_string(out.slater_margin) + ")");
    LinearProgram lp = detail::occupancy_lp(m, m.reward());
    const Index rows = lp.A.rows();
    lp.A.conservativeResize(rows + 1, Eigen::NoChange);
    lp.b.conservativeResize(rows + 1);
    for (Index s = 0; s < m.n_states(); ++s)
        for (Index a = 0; a < m.n_actions(); ++a) lp.A(rows, m.pair_index(s, a)) = m.cost()(s, a);
    lp.b(rows) = 0.0;
    lp.sense.push_back(RowSense::ge);
    const LpSolution sol = solve_lp(lp);
    out.J_star = sol.objective;
    out.occupancy = detail::unflatten(m, sol.x);
    out.policy = policy_from_occupancy(out.occupancy);
    return out;
}

/// L(pi, lambda) = J_r + lambda J_c.
inline double lagrangian(const TabularCmdp& m, const PolicyMatrix& probs, double lambda) {
    if (lambda < 0.0) throw ConfigError("lambda must be >= 0");
    const VectorXd d = stationary_distribution(induced_chain(m, probs));
    return d.dot(induced_signal(m.reward(), probs)) + lambda * d.dot(induced_signal(m.cost(), probs));
}

inline double lagrangian(const TabularCmdp& m, const ParamPolicy& pi, double lambda) {
    pi.check_compatible(m);
    return lagrangian(m, pi.probs_matrix(), lambda);
}

/// Dual function D(lambda) = max_pi L(pi, lambda).
inline double dual_function(const TabularCmdp& m, double lambda) {
    return max_average(m, m.reward() + lambda * m.cost());
}

/// All nA^nS deterministic policies (desk-scale enumeration).
inline std::vector<PolicyMatrix> deterministic_policies(Index n_states, Index n_actions) {
    std::vector<PolicyMatrix> out;
    std::vector<Index> choice(static_cast<std::size_t>(n_states), 0);
    while (true) {
        out.push_back(deterministic_policy(n_actions, choice));
        Index i = 0;
        while (i < n_states && ++choice[static_cast<std::size_t>(i)] == n_actions) choice[static_cast<std::size_t>(i++)] = 0;
        if (i == n_states) break;
    }
    return out;
}

}  // namespace pdnac

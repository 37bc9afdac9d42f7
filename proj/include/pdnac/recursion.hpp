#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "pdnac/errors.hpp"
#include "pdnac/rng.hpp"

namespace pdnac {

/// x_{h+1} = x_h - beta (P_hat_h x_h - q_hat_h) with
/// P_hat = P + bias_P + sigma_P_noise * G / n  and  q_hat = q + bias_q + sigma_q_noise * g / sqrt(n),
/// G, g standard Gaussian, so E||P_hat - E P_hat||_F^2 = sigma_P_noise^2 and likewise for q.
struct RecursionSpec {
    Eigen::MatrixXd P;
    Eigen::VectorXd q;
    double sigma_P_noise = 0.0;
    double sigma_q_noise = 0.0;
    Eigen::MatrixXd bias_P;  // empty means zero
    Eigen::VectorXd bias_q;  // empty means zero
    double beta = 0.0;
    long horizon = 0;
    bool check_assumptions = true;

    [[nodiscard]] Eigen::Index dim() const { return q.size(); }
    [[nodiscard]] Eigen::MatrixXd mean_P() const { return bias_P.size() ? Eigen::MatrixXd(P + bias_P) : P; }
    [[nodiscard]] Eigen::VectorXd mean_q() const { return bias_q.size() ? Eigen::VectorXd(q + bias_q) : q; }
    [[nodiscard]] Eigen::VectorXd x_star() const { return P.partialPivLu().solve(q); }
};

/// Constants entering the error bound, with lambda_P read as a quadratic-form lower bound.
struct RecursionConstants {
    double lambda_P = 0.0;  // min eig of sym(P)
    double Lambda_P = 0.0;  // ||P||_2
    double Lambda_q = 0.0;
    double sigma_P2 = 0.0;  // bound on E||P_hat - P||^2 (Frobenius, includes bias)
    double sigma_q2 = 0.0;
    double delta_P = 0.0;   // ||E P_hat - P||_2
    double delta_q = 0.0;
    double beta_max = 0.0;  // lambda_P / (4 (6 sigma_P^2 + 2 Lambda_P^2))
    bool step_ok = false;
    bool bias_ok = false;   // delta_P <= lambda_P / 8
    double R0 = 0.0;
    double R1 = 0.0;
    double R1_bar = 0.0;
};

inline RecursionConstants recursion_constants(const RecursionSpec& spec) {
    RecursionConstants c;
    const Eigen::MatrixXd sym = 0.5 * (spec.P + spec.P.transpose());
    c.lambda_P = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(sym).eigenvalues()(0);
    c.Lambda_P = Eigen::JacobiSVD<Eigen::MatrixXd>(spec.P).singularValues()(0);
    c.Lambda_q = spec.q.norm();
    const double bias_P_fro = spec.bias_P.size() ? spec.bias_P.squaredNorm() : 0.0;
    c.delta_P = spec.bias_P.size() ? Eigen::JacobiSVD<Eigen::MatrixXd>(spec.bias_P).singularValues()(0) : 0.0;
    c.delta_q = spec.bias_q.size() ? spec.bias_q.norm() : 0.0;
    c.sigma_P2 = spec.sigma_P_noise * spec.sigma_P_noise + bias_P_fro;
    c.sigma_q2 = spec.sigma_q_noise * spec.sigma_q_noise + c.delta_q * c.delta_q;
    c.beta_max = c.lambda_P / (4.0 * (6.0 * c.sigma_P2 + 2.0 * c.Lambda_P * c.Lambda_P));
    c.step_ok = spec.beta <= c.beta_max;
    c.bias_ok = c.delta_P <= c.lambda_P / 8.0;
    const double l = c.lambda_P;
    const double lq2 = c.Lambda_q * c.Lambda_q;
    c.R0 = lq2 * c.sigma_P2 / (l * l * l) + c.sigma_q2 / l;
    c.R1 = (c.delta_P * c.delta_P * lq2 / (l * l) + c.delta_q * c.delta_q) / (l * l);
    c.R1_bar = c.delta_P * c.delta_P * lq2 / (l * l) + c.delta_q * c.delta_q;
    return c;
}

inline void validate_spec(const RecursionSpec& spec) {
    const auto n = spec.dim();
    if (n < 1 || spec.P.rows() != n || spec.P.cols() != n) throw ConfigError("recursion spec has inconsistent dimensions");
    if (spec.bias_P.size() && (spec.bias_P.rows() != n || spec.bias_P.cols() != n))
        throw ConfigError("bias_P has wrong shape");
    if (spec.bias_q.size() && spec.bias_q.size() != n) throw ConfigError("bias_q has wrong size");
    if (!(spec.beta >= 0.0) || spec.horizon < 0) throw ConfigError("beta must be >= 0 and horizon >= 0");
    if (spec.sigma_P_noise < 0.0 || spec.sigma_q_noise < 0.0) throw ConfigError("noise levels must be >= 0");
    if (spec.check_assumptions) {
        const auto c = recursion_constants(spec);
        if (!(c.lambda_P > 0.0)) throw AssumptionError("P is not coercive (lambda_P <= 0)");
        if (!c.step_ok)
            throw AssumptionError("beta = " + std::to_string(spec.beta) + " exceeds the admissible " +
                                  std::to_string(c.beta_max));
        if (!c.bias_ok) throw AssumptionError("delta_P exceeds lambda_P / 8");
    }
}

/// Full path x_0..x_H of one replica; pure given (spec, x0, seed, replica).
inline std::vector<Eigen::VectorXd> run_recursion(const RecursionSpec& spec, const Eigen::VectorXd& x0,
                                                  std::uint64_t seed, std::uint64_t replica = 0) {
    validate_spec(spec);
    const auto n = spec.dim();
    if (x0.size() != n) throw ConfigError("x0 has wrong size");
    const Eigen::MatrixXd mean_P = spec.mean_P();
    const Eigen::VectorXd mean_q = spec.mean_q();
    const double sp = spec.sigma_P_noise / static_cast<double>(n);
    const double sq = spec.sigma_q_noise / std::sqrt(static_cast<double>(n));
    Rng rng = make_stream(StreamKey{seed, 0, StreamTag::replica, replica});
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<Eigen::VectorXd> path;
    path.reserve(static_cast<std::size_t>(spec.horizon + 1));
    path.push_back(x0);
    Eigen::VectorXd x = x0;
    Eigen::MatrixXd P_hat(n, n);
    Eigen::VectorXd q_hat(n);
    for (long h = 0; h < spec.horizon; ++h) {
        P_hat = mean_P;
        q_hat = mean_q;
        if (sp > 0.0)
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j) P_hat(i, j) += sp * normal(rng);
        if (sq > 0.0)
            for (Eigen::Index i = 0; i < n; ++i) q_hat(i) += sq * normal(rng);
        x -= spec.beta * (P_hat * x - q_hat);
        if (!x.allFinite()) throw DivergenceError("recursion iterate became non-finite at step " + std::to_string(h));
        path.push_back(x);
    }
    return path;
}

/// Monte Carlo path statistics over replicas: E||x_h - x*||^2 and ||E x_h - x*||^2 for every h.
struct RecursionStats {
    std::vector<double> mean_sq_error;
    std::vector<double> sq_bias;
    std::vector<double> sq_error_stderr;
};

inline RecursionStats recursion_statistics(const RecursionSpec& spec, const Eigen::VectorXd& x0, int replicas,
                                           std::uint64_t seed) {
    if (replicas < 1) throw ConfigError("replicas must be >= 1");
    const Eigen::VectorXd xs = spec.x_star();
    const auto steps = static_cast<std::size_t>(spec.horizon + 1);
    std::vector<double> sum(steps, 0.0), sum2(steps, 0.0);
    std::vector<Eigen::VectorXd> mean(steps, Eigen::VectorXd::Zero(spec.dim()));
    for (int r = 0; r < replicas; ++r) {
        const auto path = run_recursion(spec, x0, seed, static_cast<std::uint64_t>(r));
        for (std::size_t h = 0; h < steps; ++h) {
            const double e = (path[h] - xs).squaredNorm();
            sum[h] += e;
            sum2[h] += e * e;
            mean[h] += path[h];
        }
    }
    RecursionStats out;
    const double n = replicas;
    for (std::size_t h = 0; h < steps; ++h) {
        const double m = sum[h] / n;
        out.mean_sq_error.push_back(m);
        const double var = replicas > 1 ? std::max(0.0, (sum2[h] - n * m * m) / (n - 1.0)) : 0.0;
        out.sq_error_stderr.push_back(std::sqrt(var / n));
        out.sq_bias.push_back((mean[h] / n - xs).squaredNorm());
    }
    return out;
}

struct BoundReport {
    RecursionConstants constants;
    double measured = 0.0;        // Monte Carlo E||x_H - x*||^2
    double measured_stderr = 0.0;
    double deterministic = 0.0;   // ||x_H - x*||^2 along the noise-free path driven by E P_hat, E q_hat
    double exp_term = 0.0;        // exp(-H beta lambda_P) ||x0 - x*||^2
    double floor_term = 0.0;      // beta R0 + R1
    double slack = 10.0;
    double bound = 0.0;           // exp_term + slack * floor_term
    double ratio = 0.0;           // measured / bound
    bool pass = false;
};

inline BoundReport verify_error_bound(const RecursionSpec& spec, const Eigen::VectorXd& x0, int replicas,
                                            std::uint64_t seed, double slack = 10.0) {
    validate_spec(spec);
    BoundReport rep;
    rep.constants = recursion_constants(spec);
    rep.slack = slack;
    const Eigen::VectorXd xs = spec.x_star();
    const auto stats = recursion_statistics(spec, x0, replicas, seed);
    rep.measured = stats.mean_sq_error.back();
    rep.measured_stderr = stats.sq_error_stderr.back();

    const Eigen::MatrixXd mean_P = spec.mean_P();
    const Eigen::VectorXd mean_q = spec.mean_q();
    Eigen::VectorXd x = x0;
    for (long h = 0; h < spec.horizon; ++h) x -= spec.beta * (mean_P * x - mean_q);
    rep.deterministic = (x - xs).squaredNorm();

    const double h_beta = static_cast<double>(spec.horizon) * spec.beta;
    rep.exp_term = std::exp(-h_beta * rep.constants.lambda_P) * (x0 - xs).squaredNorm();
    rep.floor_term = spec.beta * rep.constants.R0 + rep.constants.R1;
    rep.bound = rep.exp_term + slack * rep.floor_term;
    rep.ratio = rep.bound > 0.0 ? rep.measured / rep.bound : (rep.measured == 0.0 ? 0.0 : INFINITY);
    rep.pass = rep.measured <= rep.bound;
    return rep;
}

struct NamedRecursion {
    std::string regime;
    RecursionSpec spec;
};

/// Five-dimensional SPD test problem in the four noise regimes: P = Q diag(1, 1.5, 2, 2.5, 3) Q^T
/// with Q a fixed random orthogonal matrix, beta = 0.01 (admissible in every regime), H = 500.
inline std::vector<NamedRecursion> recursion_suite(std::uint64_t seed = 6) {
    const Eigen::Index n = 5;
    Rng rng = make_stream(seed, StreamTag::generator, 6);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
    const Eigen::MatrixXd q_orth = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
    Eigen::VectorXd eig(n);
    eig << 1.0, 1.5, 2.0, 2.5, 3.0;
    RecursionSpec base;
    base.P = q_orth * eig.asDiagonal() * q_orth.transpose();
    base.P = 0.5 * (base.P + base.P.transpose());
    base.q.resize(n);
    base.q << 1.0, -1.0, 0.5, 2.0, -0.5;
    base.beta = 0.01;
    base.horizon = 500;

    Eigen::MatrixXd bias_P = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) bias_P(i, (i + 1) % n) = 0.1;  // ||.||_2 = 0.1 <= lambda_P / 8
    Eigen::VectorXd bias_q = Eigen::VectorXd::Constant(n, 0.1 / std::sqrt(static_cast<double>(n)));

    std::vector<NamedRecursion> out;
    out.push_back({"noiseless", base});
    RecursionSpec var = base;
    var.sigma_P_noise = 1.0;
    var.sigma_q_noise = 1.0;
    out.push_back({"variance_only", var});
    RecursionSpec bias = base;
    bias.bias_P = bias_P;
    bias.bias_q = bias_q;
    out.push_back({"bias_only", bias});
    RecursionSpec both = var;
    both.bias_P = bias_P;
    both.bias_q = bias_q;
    out.push_back({"both", both});
    return out;
}

}  // namespace pdnac

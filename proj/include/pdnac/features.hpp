#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "pdnac/cmdp.hpp"

namespace pdnac {

/// Linear value features phi: state -> R^m, stored column-wise (m x nS).
/// Every column must have norm at most 1.
class FeatureMap {
public:
    static constexpr double kNormTol = 1e-12;

    FeatureMap() = default;

    static FeatureMap from_matrix(MatrixXd phi, std::string name = "matrix") {
        if (!phi.allFinite()) throw ConfigError("feature matrix contains non-finite entries");
        if (phi.rows() > 0 && phi.colwise().norm().maxCoeff() > 1.0 + kNormTol)
            throw ConfigError("feature vectors must satisfy ||phi(s)|| <= 1");
        FeatureMap f;
        f.phi_ = std::move(phi);
        f.name_ = std::move(name);
        return f;
    }

    static FeatureMap one_hot(Index n_states) {
        return from_matrix(MatrixXd::Identity(n_states, n_states), "one_hot");
    }

    /// Unit-norm features spanning the complement of the constant function:
    /// the rows of an orthonormal (Helmert) basis of 1^perp, rescaled by sqrt(n/(n-1)).
    static FeatureMap centered_one_hot(Index n_states) {
        if (n_states < 2) throw ConfigError("centered one-hot features need at least two states");
        const double n = static_cast<double>(n_states);
        MatrixXd basis = MatrixXd::Zero(n_states, n_states - 1);
        for (Index k = 1; k < n_states; ++k) {
            const double kk = static_cast<double>(k);
            const double norm = std::sqrt(kk * (kk + 1.0));
            for (Index i = 0; i < k; ++i) basis(i, k - 1) = 1.0 / norm;
            basis(k, k - 1) = -kk / norm;
        }
        MatrixXd phi = std::sqrt(n / (n - 1.0)) * basis.transpose();
        // each column already has unit norm; renormalize away rounding
        for (Index s = 0; s < n_states; ++s) phi.col(s) /= phi.col(s).norm();
        return from_matrix(std::move(phi), "centered_one_hot");
    }

    static FeatureMap constant(Index n_states) {
        return from_matrix(MatrixXd::Ones(1, n_states), "constant");
    }

    /// m = 0: the critic tracks only the average value eta.
    static FeatureMap empty(Index n_states) { return from_matrix(MatrixXd(0, n_states), "empty"); }

    static FeatureMap by_name(const std::string& name, Index n_states) {
        if (name == "one_hot") return one_hot(n_states);
        if (name == "centered_one_hot") return centered_one_hot(n_states);
        if (name == "constant") return constant(n_states);
        if (name == "empty") return empty(n_states);
        throw ConfigError("unknown feature map '" + name + "'");
    }

    [[nodiscard]] Index dim() const { return phi_.rows(); }
    [[nodiscard]] Index n_states() const { return phi_.cols(); }
    [[nodiscard]] auto operator()(Index s) const { return phi_.col(s); }
    [[nodiscard]] const MatrixXd& matrix() const { return phi_; }
    [[nodiscard]] const std::string& name() const { return name_; }

    void check_compatible(const TabularCmdp& m) const {
        if (n_states() != m.n_states()) throw ConfigError("feature map does not match the number of states");
    }

private:
    MatrixXd phi_;
    std::string name_;
};

}  // namespace pdnac

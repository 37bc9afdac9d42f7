#pragma once

#include <Eigen/Dense>

#include "pdnac/cmdp.hpp"

namespace pdnac::test {

/// Single-action chain with the given kernel; reward and cost are per-state columns.
inline TabularCmdp chain(const MatrixXd& P, VectorXd r = {}, VectorXd c = {}) {
    const Index n = P.rows();
    if (r.size() == 0) r = VectorXd::Zero(n);
    if (c.size() == 0) c = VectorXd::Zero(n);
    return TabularCmdp(n, 1, P, MatrixXd(r), MatrixXd(c), VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

/// 2-state, 2-action benchmark with a randomized constrained optimum.
inline TabularCmdp benchmark() {
    MatrixXd P(4, 2);
    P << 0.8, 0.2, 0.3, 0.7, 0.8, 0.2, 0.3, 0.7;
    MatrixXd r(2, 2), c(2, 2);
    r << 0.3, 0.9, 0.6, 0.2;
    c << 0.6, -0.6, 0.2, 0.4;
    return TabularCmdp(2, 2, P, r, c, VectorXd::Constant(2, 0.5));
}

}  // namespace pdnac::test

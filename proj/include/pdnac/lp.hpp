#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "pdnac/errors.hpp"

namespace pdnac {

enum class RowSense { le, eq, ge };

/// maximize c^T x  subject to  A x (sense) b,  x >= 0.
struct LinearProgram {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    std::vector<RowSense> sense;
    Eigen::VectorXd c;
};

struct LpSolution {
    double objective = 0.0;
    Eigen::VectorXd x;
};

namespace detail {

/// Dense simplex tableau; the last column holds the right-hand side.
class SimplexTableau {
public:
    SimplexTableau(Eigen::MatrixXd t, std::vector<Eigen::Index> basis) : t_(std::move(t)), basis_(std::move(basis)) {}

    [[nodiscard]] Eigen::Index rows() const { return t_.rows(); }
    [[nodiscard]] Eigen::Index vars() const { return t_.cols() - 1; }
    [[nodiscard]] double rhs(Eigen::Index r) const { return t_(r, vars()); }
    [[nodiscard]] double at(Eigen::Index r, Eigen::Index j) const { return t_(r, j); }
    [[nodiscard]] const std::vector<Eigen::Index>& basis() const { return basis_; }

    void pivot(Eigen::Index r, Eigen::Index col) {
        t_.row(r) /= t_(r, col);
        for (Eigen::Index i = 0; i < t_.rows(); ++i) {
            if (i == r) continue;
            const double f = t_(i, col);
            if (f != 0.0) t_.row(i) -= f * t_.row(r);
        }
        basis_[static_cast<std::size_t>(r)] = col;
    }

    void drop_row(Eigen::Index r) {
        Eigen::MatrixXd next(t_.rows() - 1, t_.cols());
        next << t_.topRows(r), t_.bottomRows(t_.rows() - r - 1);
        t_ = std::move(next);
        basis_.erase(basis_.begin() + r);
    }

    /// Minimizes obj^T x over the allowed columns with Bland's rule. Returns false if unbounded.
    bool minimize(const Eigen::VectorXd& obj, const std::vector<bool>& allowed, double tol) {
        const Eigen::Index n = vars();
        const long max_iter = 50'000;
        for (long iter = 0; iter < max_iter; ++iter) {
            Eigen::VectorXd y(rows());
            for (Eigen::Index i = 0; i < rows(); ++i) y(i) = obj(basis_[static_cast<std::size_t>(i)]);
            const Eigen::VectorXd reduced = obj - t_.leftCols(n).transpose() * y;
            Eigen::Index entering = -1;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (allowed[static_cast<std::size_t>(j)] && reduced(j) < -tol) {
                    entering = j;
                    break;
                }
            }
            if (entering < 0) return true;
            Eigen::Index leaving = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < rows(); ++i) {
                const double a = t_(i, entering);
                if (a <= tol) continue;
                const double ratio = rhs(i) / a;
                if (ratio < best - tol ||
                    (ratio <= best + tol && leaving >= 0 &&
                     basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leaving)])) {
                    if (ratio < best) best = ratio;
                    leaving = i;
                }
            }
            if (leaving < 0) return false;
            pivot(leaving, entering);
        }
        throw NumericError("simplex iteration limit reached");
    }

private:
    Eigen::MatrixXd t_;
    std::vector<Eigen::Index> basis_;
};

}  // namespace detail

/// Two-phase dense simplex. Throws InfeasibleError or NumericError (unbounded).
inline LpSolution solve_lp(const LinearProgram& lp, double tol = 1e-11) {
    using Eigen::Index;
    const Index m = lp.A.rows();
    const Index n = lp.A.cols();
    if (lp.b.size() != m || static_cast<Index>(lp.sense.size()) != m || lp.c.size() != n)
        throw ConfigError("linear program has inconsistent dimensions");

    // normalize to b >= 0
    Eigen::MatrixXd A = lp.A;
    Eigen::VectorXd b = lp.b;
    std::vector<RowSense> sense = lp.sense;
    for (Index i = 0; i < m; ++i) {
        if (b(i) < 0.0) {
            A.row(i) *= -1.0;
            b(i) = -b(i);
            if (sense[static_cast<std::size_t>(i)] == RowSense::le) sense[static_cast<std::size_t>(i)] = RowSense::ge;
            else if (sense[static_cast<std::size_t>(i)] == RowSense::ge) sense[static_cast<std::size_t>(i)] = RowSense::le;
        }
    }
    Index n_slack = 0;
    Index n_art = 0;
    for (auto s : sense) {
        if (s != RowSense::eq) ++n_slack;
        if (s != RowSense::le) ++n_art;
    }
    const Index total = n + n_slack + n_art;
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, total + 1);
    t.leftCols(n) = A;
    t.col(total) = b;
    std::vector<Index> basis(static_cast<std::size_t>(m));
    Index slack = n;
    Index art = n + n_slack;
    for (Index i = 0; i < m; ++i) {
        const auto s = sense[static_cast<std::size_t>(i)];
        if (s == RowSense::le) {
            t(i, slack) = 1.0;
            basis[static_cast<std::size_t>(i)] = slack++;
        } else {
            if (s == RowSense::ge) t(i, slack++) = -1.0;
            t(i, art) = 1.0;
            basis[static_cast<std::size_t>(i)] = art++;
        }
    }
    const auto is_artificial = [&](Index j) { return j >= n + n_slack; };

    detail::SimplexTableau tab(std::move(t), std::move(basis));
    std::vector<bool> allowed(static_cast<std::size_t>(total), true);
    if (n_art > 0) {
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(total);
        phase1.tail(n_art).setOnes();
        tab.minimize(phase1, allowed, tol);
        double infeas = 0.0;
        for (Index i = 0; i < tab.rows(); ++i)
            if (is_artificial(tab.basis()[static_cast<std::size_t>(i)])) infeas += tab.rhs(i);
        if (infeas > 1e-9) throw InfeasibleError("linear program is infeasible");
        // pivot zero-valued artificials out of the basis; rows where that is impossible are redundant
        for (Index i = tab.rows() - 1; i >= 0; --i) {
            if (!is_artificial(tab.basis()[static_cast<std::size_t>(i)])) continue;
            Index col = -1;
            for (Index j = 0; j < n + n_slack; ++j) {
                if (std::abs(tab.at(i, j)) > 1e-9) {
                    col = j;
                    break;
                }
            }
            if (col >= 0) tab.pivot(i, col);
            else tab.drop_row(i);
        }
        for (Index j = n + n_slack; j < total; ++j) allowed[static_cast<std::size_t>(j)] = false;
    }
    Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(total);
    phase2.head(n) = -lp.c;
    if (!tab.minimize(phase2, allowed, tol)) throw NumericError("linear program is unbounded");

    LpSolution out;
    out.x = Eigen::VectorXd::Zero(n);
    for (Index i = 0; i < tab.rows(); ++i) {
        const Index j = tab.basis()[static_cast<std::size_t>(i)];
        if (j < n) out.x(j) = std::max(0.0, tab.rhs(i));
    }
    out.objective = lp.c.dot(out.x);
    return out;
}

}  // namespace pdnac

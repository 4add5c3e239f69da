// SPDX-License-Identifier: Apache-2.0

#ifndef ETBELL_SIMPLEX_HPP_
#define ETBELL_SIMPLEX_HPP_

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "etbell/error.hpp"

// Dense two-phase tableau simplex for small programs in equality form
//
//     maximize c.x   subject to   A x = b,  x >= 0.
//
// Pivoting follows Bland's rule (lowest eligible index enters, ties in the
// ratio test go to the lowest basic index), which cannot cycle.

namespace etbell
{

enum class LpStatus
{
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
};

struct LinearProgram
{
    Eigen::MatrixXd a_eq;
    Eigen::VectorXd b_eq;
    Eigen::VectorXd c; ///< objective to maximize; empty means feasibility only
};

struct LpResult
{
    LpStatus status = LpStatus::Infeasible;
    Eigen::VectorXd x;
    double objective = 0.0;
    double residual = 0.0; ///< max |A x - b| on the original data
    double infeasibility = 0.0; ///< phase-one optimum
    int iterations = 0;
};

namespace detail
{

class Tableau
{
public:
    Tableau(const Eigen::MatrixXd& a, const Eigen::VectorXd& b)
        : m_(a.rows()), n_(a.cols()), t_(Eigen::MatrixXd::Zero(a.rows() + 1, a.cols() + a.rows() + 1)),
          basis_(static_cast<std::size_t>(a.rows()))
    {
        for (Eigen::Index i = 0; i < m_; ++i)
        {
            const double sign = b(i) < 0.0 ? -1.0 : 1.0;
            t_.row(i).head(n_) = sign * a.row(i);
            t_(i, n_ + i) = 1.0;
            t_(i, rhs()) = sign * b(i);
            basis_[static_cast<std::size_t>(i)] = n_ + i;
        }
    }

    Eigen::Index rhs() const { return n_ + m_; }
    Eigen::Index rows() const { return m_; }
    Eigen::Index structural() const { return n_; }
    bool is_artificial(Eigen::Index col) const { return col >= n_ && col < n_ + m_; }

    /// Installs cost row for minimizing `cost` (length n + m) over the
    /// current basis.
    void set_cost(const Eigen::VectorXd& cost)
    {
        t_.row(m_).setZero();
        t_.row(m_).head(n_ + m_) = cost.transpose();
        for (Eigen::Index i = 0; i < m_; ++i)
        {
            const double cb = cost(basis_[static_cast<std::size_t>(i)]);
            if (cb != 0.0)
                t_.row(m_) -= cb * t_.row(i);
        }
    }

    /// Minimizes the installed cost. Columns with allowed[col] == false never
    /// enter the basis.
    LpStatus optimize(const std::vector<bool>& allowed, double tol, int max_iter, int& iterations)
    {
        while (true)
        {
            if (iterations >= max_iter)
                return LpStatus::IterationLimit;
            Eigen::Index enter = -1;
            for (Eigen::Index j = 0; j < n_ + m_; ++j)
                if (allowed[static_cast<std::size_t>(j)] && t_(m_, j) < -tol)
                {
                    enter = j;
                    break;
                }
            if (enter < 0)
                return LpStatus::Optimal;

            Eigen::Index leave = -1;
            double best = std::numeric_limits<double>::infinity();
            for (Eigen::Index i = 0; i < m_; ++i)
            {
                const double piv = t_(i, enter);
                if (piv <= tol)
                    continue;
                const double ratio = t_(i, rhs()) / piv;
                if (ratio < best - tol ||
                    (ratio <= best + tol && leave >= 0 &&
                     basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)]))
                {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0)
                return LpStatus::Unbounded;
            pivot(leave, enter);
            ++iterations;
        }
    }

    void pivot(Eigen::Index row, Eigen::Index col)
    {
        t_.row(row) /= t_(row, col);
        for (Eigen::Index i = 0; i <= m_; ++i)
            if (i != row && t_(i, col) != 0.0)
                t_.row(i) -= t_(i, col) * t_.row(row);
        basis_[static_cast<std::size_t>(row)] = col;
    }

    /// Pivots zero-level artificials out wherever a structural column allows.
    void expel_artificials(double tol)
    {
        for (Eigen::Index i = 0; i < m_; ++i)
        {
            if (!is_artificial(basis_[static_cast<std::size_t>(i)]))
                continue;
            for (Eigen::Index j = 0; j < n_; ++j)
                if (std::abs(t_(i, j)) > tol)
                {
                    pivot(i, j);
                    break;
                }
        }
    }

    double objective_value() const { return -t_(m_, rhs()); }

    Eigen::VectorXd solution() const
    {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n_);
        for (Eigen::Index i = 0; i < m_; ++i)
        {
            const Eigen::Index col = basis_[static_cast<std::size_t>(i)];
            if (col < n_)
                x(col) = std::max(0.0, t_(i, rhs()));
        }
        return x;
    }

private:
    Eigen::Index m_;
    Eigen::Index n_;
    Eigen::MatrixXd t_;
    std::vector<Eigen::Index> basis_;
};

} // namespace detail

inline LpResult solve_lp(const LinearProgram& lp, double tol = 1e-9, int max_iter = 100000)
{
    const Eigen::Index m = lp.a_eq.rows();
    const Eigen::Index n = lp.a_eq.cols();
    if (lp.b_eq.size() != m || (lp.c.size() != 0 && lp.c.size() != n))
        throw ConfigError("linear program dimensions disagree");

    LpResult out;
    detail::Tableau tab(lp.a_eq, lp.b_eq);

    // Phase one: minimize the sum of artificials.
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(n + m);
    cost.tail(m).setOnes();
    tab.set_cost(cost);
    std::vector<bool> allowed(static_cast<std::size_t>(n + m), true);
    auto status = tab.optimize(allowed, tol, max_iter, out.iterations);
    if (status == LpStatus::IterationLimit)
    {
        out.status = status;
        return out;
    }
    out.infeasibility = tab.objective_value();
    const double scale = 1.0 + lp.b_eq.cwiseAbs().sum();
    if (out.infeasibility > tol * scale)
    {
        out.status = LpStatus::Infeasible;
        return out;
    }

    tab.expel_artificials(tol);
    for (Eigen::Index j = n; j < n + m; ++j)
        allowed[static_cast<std::size_t>(j)] = false;

    // Phase two on the original objective.
    cost.setZero();
    if (lp.c.size() == n)
        cost.head(n) = -lp.c;
    tab.set_cost(cost);
    status = tab.optimize(allowed, tol, max_iter, out.iterations);
    out.status = status;
    out.x = tab.solution();
    out.objective = lp.c.size() == n ? lp.c.dot(out.x) : 0.0;
    out.residual = (lp.a_eq * out.x - lp.b_eq).cwiseAbs().maxCoeff();
    return out;
}

} // namespace etbell

#endif // ETBELL_SIMPLEX_HPP_

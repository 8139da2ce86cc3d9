#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "relu_preimage/errors.hpp"
#include "relu_preimage/linalg.hpp"

namespace relu_preimage {

// Constraint residual tolerance for feasibility verdicts.
constexpr double kFeasTol = 1e-8;
// Objective improvement below this is treated as optimal.
constexpr double kOptTol = 1e-8;
// Margin used by callers that need a strict inequality encoded as a weak one.
constexpr double kStrictIneqMargin = 1e-6;

enum class LpStatus { Optimal, Infeasible, Unbounded };

// Maximize objective . x subject to eq_lhs x == eq_rhs, ineq_lhs x <= ineq_rhs
// and lower <= x <= upper. Bounds may be +-infinity; all other data must be
// finite. Empty constraint blocks are encoded as matrices with zero rows.
struct LpProblem {
    Vector objective;
    DenseMatrix eq_lhs;
    Vector eq_rhs;
    DenseMatrix ineq_lhs;
    Vector ineq_rhs;
    Vector lower;
    Vector upper;

    static LpProblem with_vars(std::size_t n) {
        LpProblem p;
        p.objective.assign(n, 0.0);
        p.eq_lhs = DenseMatrix(0, n);
        p.ineq_lhs = DenseMatrix(0, n);
        p.lower.assign(n, -std::numeric_limits<double>::infinity());
        p.upper.assign(n, std::numeric_limits<double>::infinity());
        return p;
    }
};

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Vector x;                     // populated only when status == Optimal
    double objective_value = 0.0; // dito
};

struct SimplexOptions {
    double feas_tol = kFeasTol;
    std::size_t iteration_cap = 0;  // 0 selects 50 * (vars + constraints) per phase
};

namespace detail {

inline void validate_problem(const LpProblem& p) {
    const std::size_t n = p.objective.size();
    if (n == 0) throw InvalidProblem("lp: no variables");
    if (p.lower.size() != n || p.upper.size() != n)
        throw InvalidProblem("lp: bound length mismatch");
    if (p.eq_lhs.rows != p.eq_rhs.size() || (p.eq_lhs.rows > 0 && p.eq_lhs.cols != n))
        throw InvalidProblem("lp: equality block shape mismatch");
    if (p.ineq_lhs.rows != p.ineq_rhs.size() || (p.ineq_lhs.rows > 0 && p.ineq_lhs.cols != n))
        throw InvalidProblem("lp: inequality block shape mismatch");
    if (!all_finite(p.objective) || !all_finite(p.eq_lhs) || !all_finite(p.eq_rhs) ||
        !all_finite(p.ineq_lhs) || !all_finite(p.ineq_rhs))
        throw InvalidProblem("lp: non-finite coefficient");
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(p.lower[j]) || std::isnan(p.upper[j]))
            throw InvalidProblem("lp: NaN bound");
        if (p.lower[j] > p.upper[j]) throw InvalidProblem("lp: lower bound exceeds upper bound");
    }
}

// Bounded-variable primal simplex over a dense tableau. Columns are the
// structural variables, then one slack per inequality row, then one artificial
// per row. Bland's rule (smallest eligible index in, smallest variable index
// out among minimal ratios) guarantees termination; the iteration cap is a
// safety net on top of that.
class SimplexTableau {
  public:
    SimplexTableau(const LpProblem& p, const SimplexOptions& opt) : opt_(opt) {
        n_struct_ = p.objective.size();
        n_eq_ = p.eq_lhs.rows;
        n_ineq_ = p.ineq_lhs.rows;
        n_rows_ = n_eq_ + n_ineq_;
        n_slack_ = n_ineq_;
        n_total_ = n_struct_ + n_slack_ + n_rows_;
        cap_ = opt.iteration_cap
                   ? opt.iteration_cap
                   : 50 * (n_struct_ + n_rows_ == 0 ? 1 : n_struct_ + n_rows_);

        const double inf = std::numeric_limits<double>::infinity();
        lo_.assign(n_total_, 0.0);
        hi_.assign(n_total_, inf);
        val_.assign(n_total_, 0.0);
        for (std::size_t j = 0; j < n_struct_; ++j) {
            lo_[j] = p.lower[j];
            hi_[j] = p.upper[j];
            if (std::isfinite(lo_[j]))
                val_[j] = lo_[j];
            else if (std::isfinite(hi_[j]))
                val_[j] = hi_[j];
            else
                val_[j] = 0.0;
        }

        t_ = DenseMatrix(n_rows_, n_total_);
        rhs_.assign(n_rows_, 0.0);
        basis_.assign(n_rows_, 0);
        is_basic_.assign(n_total_, 0);

        for (std::size_t i = 0; i < n_rows_; ++i) {
            double b;
            if (i < n_eq_) {
                for (std::size_t j = 0; j < n_struct_; ++j) t_(i, j) = p.eq_lhs(i, j);
                b = p.eq_rhs[i];
            } else {
                const std::size_t r = i - n_eq_;
                for (std::size_t j = 0; j < n_struct_; ++j) t_(i, j) = p.ineq_lhs(r, j);
                t_(i, n_struct_ + r) = 1.0;
                b = p.ineq_rhs[i - n_eq_];
            }
            double resid = b;
            for (std::size_t j = 0; j < n_struct_ + n_slack_; ++j) resid -= t_(i, j) * val_[j];
            const double sign = resid >= 0.0 ? 1.0 : -1.0;
            const std::size_t art = n_struct_ + n_slack_ + i;
            t_(i, art) = sign;
            if (sign < 0.0) {
                for (std::size_t j = 0; j < n_total_; ++j) t_(i, j) = -t_(i, j);
                rhs_[i] = -b;
            } else {
                rhs_[i] = b;
            }
            basis_[i] = art;
            is_basic_[art] = 1;
        }
    }

    LpStatus run_two_phase(const Vector& objective) {
        Vector phase1(n_total_, 0.0);
        for (std::size_t i = 0; i < n_rows_; ++i) phase1[n_struct_ + n_slack_ + i] = -1.0;
        if (optimize(phase1) == IterOutcome::Unbounded)
            throw Error("lp: phase one reported an unbounded objective");
        if (infeasibility() > opt_.feas_tol) return LpStatus::Infeasible;

        // Artificial variables are pinned at zero for phase two.
        for (std::size_t i = 0; i < n_rows_; ++i) {
            const std::size_t art = n_struct_ + n_slack_ + i;
            lo_[art] = 0.0;
            hi_[art] = 0.0;
            if (!is_basic_[art]) val_[art] = 0.0;
        }
        Vector phase2(n_total_, 0.0);
        for (std::size_t j = 0; j < n_struct_; ++j) phase2[j] = objective[j];
        if (optimize(phase2) == IterOutcome::Unbounded) return LpStatus::Unbounded;
        return LpStatus::Optimal;
    }

    Vector extract() const {
        const Vector xb = basic_values();
        Vector x(n_struct_);
        for (std::size_t j = 0; j < n_struct_; ++j) x[j] = val_[j];
        for (std::size_t i = 0; i < n_rows_; ++i)
            if (basis_[i] < static_cast<long>(n_struct_)) x[basis_[i]] = xb[i];
        return x;
    }

  private:
    enum class IterOutcome { Optimal, Unbounded };

    Vector basic_values() const {
        Vector xb = rhs_;
        for (std::size_t j = 0; j < n_total_; ++j) {
            if (is_basic_[j] || val_[j] == 0.0) continue;
            for (std::size_t i = 0; i < n_rows_; ++i) xb[i] -= t_(i, j) * val_[j];
        }
        return xb;
    }

    double infeasibility() const {
        const Vector xb = basic_values();
        double total = 0.0;
        for (std::size_t i = 0; i < n_rows_; ++i)
            if (basis_[i] >= static_cast<long>(n_struct_ + n_slack_)) total += std::max(xb[i], 0.0);
        for (std::size_t i = 0; i < n_rows_; ++i) {
            const std::size_t art = n_struct_ + n_slack_ + i;
            if (!is_basic_[art]) total += std::abs(val_[art]);
        }
        return total;
    }

    IterOutcome optimize(const Vector& cost) {
        const double ztol = 1e-9;
        const double pivot_tol = 1e-11;
        const double inf = std::numeric_limits<double>::infinity();
        for (std::size_t iter = 0; iter < cap_; ++iter) {
            const Vector xb = basic_values();

            long entering = -1;
            int dir = 0;
            for (std::size_t j = 0; j < n_total_; ++j) {
                if (is_basic_[j] || lo_[j] == hi_[j]) continue;
                double z = cost[j];
                for (std::size_t i = 0; i < n_rows_; ++i) {
                    const double cb = cost[basis_[i]];
                    if (cb != 0.0) z -= cb * t_(i, j);
                }
                if (z > ztol && val_[j] < hi_[j]) {
                    entering = static_cast<long>(j);
                    dir = 1;
                    break;
                }
                if (z < -ztol && val_[j] > lo_[j]) {
                    entering = static_cast<long>(j);
                    dir = -1;
                    break;
                }
            }
            if (entering < 0) return IterOutcome::Optimal;
            const std::size_t e = static_cast<std::size_t>(entering);

            // Ratio test: the entering variable moves by step >= 0 toward its
            // opposite bound; basic variables must stay inside their bounds.
            double best = dir > 0 ? hi_[e] - val_[e] : val_[e] - lo_[e];
            long leave_row = -1;
            int leave_side = 0;
            for (std::size_t i = 0; i < n_rows_; ++i) {
                const double coef = t_(i, e);
                if (std::abs(coef) <= pivot_tol) continue;
                const double delta = -static_cast<double>(dir) * coef;
                const std::size_t bv = basis_[i];
                double cap_i;
                int side;
                if (delta > 0.0) {
                    if (hi_[bv] == inf) continue;
                    cap_i = (hi_[bv] - xb[i]) / delta;
                    side = +1;
                } else {
                    if (lo_[bv] == -inf) continue;
                    cap_i = (lo_[bv] - xb[i]) / delta;
                    side = -1;
                }
                if (cap_i < 0.0) cap_i = 0.0;
                const bool better = cap_i < best - 1e-12;
                const bool tie = !better && cap_i <= best + 1e-12;
                if (better || (tie && leave_row >= 0 &&
                               basis_[i] < basis_[static_cast<std::size_t>(leave_row)])) {
                    best = std::min(best, cap_i);
                    leave_row = static_cast<long>(i);
                    leave_side = side;
                }
            }

            if (best == inf) return IterOutcome::Unbounded;

            if (leave_row < 0) {
                // Bound flip: the entering variable traverses to its other bound.
                val_[e] = dir > 0 ? hi_[e] : lo_[e];
                continue;
            }

            const std::size_t r = static_cast<std::size_t>(leave_row);
            const std::size_t leaving = basis_[r];
            const double piv = t_(r, e);
            for (std::size_t j = 0; j < n_total_; ++j) t_(r, j) /= piv;
            rhs_[r] /= piv;
            for (std::size_t i = 0; i < n_rows_; ++i) {
                if (i == r) continue;
                const double f = t_(i, e);
                if (f == 0.0) continue;
                for (std::size_t j = 0; j < n_total_; ++j) t_(i, j) -= f * t_(r, j);
                rhs_[i] -= f * rhs_[r];
            }
            is_basic_[leaving] = 0;
            val_[leaving] = leave_side > 0 ? hi_[leaving] : lo_[leaving];
            basis_[r] = static_cast<long>(e);
            is_basic_[e] = 1;
        }
        throw SolverStalled("lp: iteration cap of " + std::to_string(cap_) + " exceeded");
    }

    SimplexOptions opt_;
    std::size_t n_struct_ = 0, n_eq_ = 0, n_ineq_ = 0, n_slack_ = 0, n_rows_ = 0, n_total_ = 0;
    std::size_t cap_ = 0;
    DenseMatrix t_;
    Vector rhs_;
    std::vector<long> basis_;
    std::vector<char> is_basic_;
    Vector lo_, hi_, val_;
};

}  // namespace detail

inline LpSolution solve(const LpProblem& p, const SimplexOptions& opt = {}) {
    detail::validate_problem(p);
    detail::SimplexTableau tab(p, opt);
    LpSolution sol;
    sol.status = tab.run_two_phase(p.objective);
    if (sol.status == LpStatus::Optimal) {
        sol.x = tab.extract();
        sol.objective_value = dot(p.objective, sol.x);
    }
    return sol;
}

// Phase-one-only feasibility test for the constraint system of p; the
// objective is ignored.
inline bool feasible(const LpProblem& p, const SimplexOptions& opt = {}) {
    LpProblem q = p;
    std::fill(q.objective.begin(), q.objective.end(), 0.0);
    return solve(q, opt).status != LpStatus::Infeasible;
}

}  // namespace relu_preimage

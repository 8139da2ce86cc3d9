#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "relu_preimage/errors.hpp"
#include "relu_preimage/linalg.hpp"
#include "relu_preimage/lp.hpp"

namespace relu_preimage {

// Residual tolerance for "lies on the hyperplane" checks.
constexpr double kPointTol = 1e-7;
// Strict positivity floor for Stiemke multipliers.
constexpr double kPosFloor = 1e-6;

enum class OmniMethod { HullLp, ConeTest, Stiemke };

// A row set is omnidirectional when the origin is interior to the convex hull
// of the rows, equivalently when every open halfspace contains a row,
// equivalently when a . d <= 0 for every row a forces d == 0.
struct OmniVerdict {
    bool is_omni = false;
    OmniMethod method = OmniMethod::HullLp;
    // HullLp: convex weights over the original rows when is_omni.
    // ConeTest: a nonzero direction d with A d <= 0 when !is_omni.
    // Stiemke: strictly positive multipliers x with A^T x == 0 when is_omni.
    std::optional<Vector> witness;
};

namespace detail {

// Rows with negligible norm relative to the largest row are numerical zeros;
// they carry no direction and would let the hull LP place weight on noise.
inline std::vector<std::size_t> nonzero_row_indices(const DenseMatrix& a) {
    std::vector<double> norms(a.rows, 0.0);
    double max_norm = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += a(i, j) * a(i, j);
        norms[i] = std::sqrt(acc);
        max_norm = std::max(max_norm, norms[i]);
    }
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < a.rows; ++i)
        if (norms[i] > 1e-12 * max_norm && norms[i] > 0.0) keep.push_back(i);
    return keep;
}

inline void check_omni_input(const DenseMatrix& a) {
    if (a.cols == 0) throw InvalidInput("omni: matrix has no columns");
    if (!all_finite(a)) throw InvalidInput("omni: non-finite entries");
}

}  // namespace detail

// Convex-hull interiority via one feasibility LP: convex weights x in [0,1]^m
// with sum x == 1 and A^T x == 0 exist iff 0 is in the hull of the rows, and
// with more rows than columns the feasible weights certify interiority for
// row sets in general position. Needs m > n, which is also necessary.
inline OmniVerdict is_omnidirectional_hull(const DenseMatrix& a) {
    detail::check_omni_input(a);
    const auto keep = detail::nonzero_row_indices(a);
    const std::size_t m = keep.size(), n = a.cols;
    if (m <= n) return {false, OmniMethod::HullLp, std::nullopt};

    LpProblem p = LpProblem::with_vars(m);
    std::fill(p.objective.begin(), p.objective.end(), 1.0);
    std::fill(p.lower.begin(), p.lower.end(), 0.0);
    std::fill(p.upper.begin(), p.upper.end(), 1.0);
    p.eq_lhs = DenseMatrix(n + 1, m);
    p.eq_rhs.assign(n + 1, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t r = 0; r < m; ++r) p.eq_lhs(j, r) = a(keep[r], j);
    for (std::size_t r = 0; r < m; ++r) p.eq_lhs(n, r) = 1.0;
    p.eq_rhs[n] = 1.0;

    LpSolution sol = solve(p);
    if (sol.status != LpStatus::Optimal) return {false, OmniMethod::HullLp, std::nullopt};
    Vector witness(a.rows, 0.0);
    for (std::size_t r = 0; r < m; ++r) witness[keep[r]] = sol.x[r];
    return {true, OmniMethod::HullLp, std::move(witness)};
}

// Recession-cone probe: maximize +-d_j over {d in [-1,1]^n : A d <= 0}. Any
// optimum above kPointTol exhibits a nonzero deactivating direction, so the
// rows are not omnidirectional; all 2n optima at zero pin the cone to {0}.
inline OmniVerdict is_omnidirectional_cone(const DenseMatrix& a) {
    detail::check_omni_input(a);
    const auto keep = detail::nonzero_row_indices(a);
    const std::size_t n = a.cols;
    if (keep.empty()) {
        Vector d(n, 0.0);
        d[0] = 1.0;
        return {false, OmniMethod::ConeTest, std::move(d)};
    }

    LpProblem p = LpProblem::with_vars(n);
    std::fill(p.lower.begin(), p.lower.end(), -1.0);
    std::fill(p.upper.begin(), p.upper.end(), 1.0);
    p.ineq_lhs = DenseMatrix(keep.size(), n);
    p.ineq_rhs.assign(keep.size(), 0.0);
    for (std::size_t r = 0; r < keep.size(); ++r)
        for (std::size_t j = 0; j < n; ++j) p.ineq_lhs(r, j) = a(keep[r], j);

    for (std::size_t j = 0; j < n; ++j) {
        for (const double sgn : {1.0, -1.0}) {
            std::fill(p.objective.begin(), p.objective.end(), 0.0);
            p.objective[j] = sgn;
            LpSolution sol = solve(p);
            if (sol.status != LpStatus::Optimal)
                throw Error("omni: cone probe LP failed to solve");
            if (sol.objective_value > kPointTol)
                return {false, OmniMethod::ConeTest, std::move(sol.x)};
        }
    }
    return {true, OmniMethod::ConeTest, std::nullopt};
}

// Strict-multiplier test: positive x with A^T x == 0 exists iff no direction
// d satisfies A d <= 0 with at least one strict component. This is necessary
// for omnidirectionality but weaker; rows {(1), (-1), (0, pattern)} style
// degeneracies pass here yet fail the hull test, so this dual probe is
// exposed for diagnostics only. Strict positivity is encoded as x >= kPosFloor.
inline OmniVerdict is_omnidirectional_stiemke(const DenseMatrix& a) {
    detail::check_omni_input(a);
    if (a.rows == 0) return {false, OmniMethod::Stiemke, std::nullopt};
    const std::size_t m = a.rows, n = a.cols;
    LpProblem p = LpProblem::with_vars(m);
    std::fill(p.lower.begin(), p.lower.end(), kPosFloor);
    std::fill(p.upper.begin(), p.upper.end(), 1.0);
    p.eq_lhs = DenseMatrix(n, m);
    p.eq_rhs.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) p.eq_lhs(j, i) = a(i, j);
    LpSolution sol = solve(p);
    if (sol.status != LpStatus::Optimal) return {false, OmniMethod::Stiemke, std::nullopt};
    return {true, OmniMethod::Stiemke, std::move(sol.x)};
}

// True when p lies on every hyperplane a_i . x + b_i == 0 (within kPointTol)
// and the row directions are omnidirectional, i.e. the inequality system
// A x + b <= 0 admits no point other than p in a neighborhood of p.
inline bool is_omnidirectional_for_point(const DenseMatrix& a, const Vector& b, const Vector& p) {
    if (a.rows != b.size() || a.cols != p.size())
        throw DimensionMismatch("is_omnidirectional_for_point: shape mismatch");
    detail::check_omni_input(a);
    if (!all_finite(b) || !all_finite(p)) throw InvalidInput("is_omnidirectional_for_point: non-finite input");
    const Vector r = matvec(a, p);
    for (std::size_t i = 0; i < r.size(); ++i)
        if (std::abs(r[i] + b[i]) > kPointTol) return false;
    return is_omnidirectional_cone(a).is_omni;
}

}  // namespace relu_preimage

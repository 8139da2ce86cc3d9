#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "relu_preimage/errors.hpp"
#include "relu_preimage/linalg.hpp"
#include "relu_preimage/lp.hpp"
#include "relu_preimage/omni.hpp"

namespace relu_preimage {

// Coordinates of a ReLU output below this threshold count as inactive.
constexpr double kActTol = 1e-9;
// Residual tolerance when checking that a candidate point reproduces y.
constexpr double kForwardTol = 1e-6;
// Two LP optima within this distance are the same point.
constexpr double kCoincideTol = 1e-7;
// Largest reduced inequality count the exhaustive singleton check accepts.
constexpr std::size_t kExhaustiveBudget = 20;

struct AffineLayer {
    DenseMatrix weight;
    Vector bias;
};

inline void validate_layer(const AffineLayer& layer) {
    if (layer.weight.rows != layer.bias.size())
        throw DimensionMismatch("layer: weight has " + std::to_string(layer.weight.rows) +
                                " rows, bias has length " + std::to_string(layer.bias.size()));
    if (!all_finite(layer.weight) || !all_finite(layer.bias))
        throw InvalidInput("layer: non-finite parameters");
}

inline Vector relu(Vector v) {
    for (double& x : v) x = std::max(x, 0.0);
    return v;
}

inline Vector forward(const AffineLayer& layer, const Vector& x) {
    validate_layer(layer);
    if (!all_finite(x)) throw InvalidInput("forward: non-finite input");
    Vector y = matvec(layer.weight, x);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::max(y[i] + layer.bias[i], 0.0);
    return y;
}

// Partition of output coordinates into active (> act_tol) and inactive ones.
struct SignPattern {
    std::vector<std::size_t> positive;
    std::vector<std::size_t> zero;
    double act_tol = kActTol;
};

inline SignPattern sign_pattern(const Vector& y, double act_tol = kActTol) {
    if (!all_finite(y)) throw InvalidInput("sign_pattern: non-finite entries");
    SignPattern sp;
    sp.act_tol = act_tol;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < -act_tol)
            throw NotAReluOutput("sign_pattern: coordinate " + std::to_string(i) +
                                 " is negative beyond act_tol");
        if (y[i] > act_tol)
            sp.positive.push_back(i);
        else
            sp.zero.push_back(i);
    }
    return sp;
}

// The preimage of y under x -> relu(Wx + b) is the solution set of the mixed
// system  W_P x == y_P - b_P,  W_Z x <= -b_Z. Substituting the minimum-norm
// particular solution of the equality block and an orthonormal nullspace
// basis O turns it into a pure inequality system in the nullspace coordinate.
struct ReducedSystem {
    DenseMatrix nullspace;     // rows form an orthonormal basis, k x n
    std::size_t nullspace_dim = 0;
    DenseMatrix ineq_matrix;   // ktilde x k
    Vector ineq_offset;        // system: ineq_matrix d + ineq_offset <= 0
    std::size_t num_inequalities = 0;
    Vector particular;         // preimage = particular + nullspace^T d over feasible d
    std::size_t equality_rank = 0;
};

enum class PreimageKind { Singleton, FiniteVolume, InfiniteVolume };

struct PreimageClass {
    PreimageKind kind = PreimageKind::InfiniteVolume;
    std::optional<ReducedSystem> reduced;  // absent for Singleton
    std::optional<Vector> point;           // present for Singleton
    std::string diagnostics;
};

namespace detail {

struct EqualitySolve {
    SignPattern pattern;
    Vector x_part;
    std::size_t rank = 0;
    DenseMatrix nullspace;
};

inline EqualitySolve solve_equality_block(const AffineLayer& layer, const Vector& y, double act_tol) {
    validate_layer(layer);
    if (layer.weight.rows != y.size())
        throw DimensionMismatch("preimage: output length does not match layer rows");
    EqualitySolve es;
    es.pattern = sign_pattern(y, act_tol);
    const DenseMatrix a_pos = select_rows(layer.weight, es.pattern.positive);
    Vector rhs = select(y, es.pattern.positive);
    const Vector b_pos = select(layer.bias, es.pattern.positive);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= b_pos[i];

    es.x_part = min_norm_solution(a_pos, rhs);
    const Vector fitted = matvec(a_pos, es.x_part);
    double resid = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < rhs.size(); ++i) {
        resid = std::max(resid, std::abs(fitted[i] - rhs[i]));
        scale = std::max(scale, std::abs(rhs[i]));
    }
    if (resid > kForwardTol * (1.0 + scale))
        throw InconsistentOutput("preimage: active coordinates are not reachable by any input");
    es.rank = rank(a_pos);
    es.nullspace = nullspace_basis(a_pos);
    return es;
}

inline ReducedSystem build_reduced(const AffineLayer& layer, const EqualitySolve& es) {
    ReducedSystem rs;
    rs.nullspace = es.nullspace;
    rs.nullspace_dim = es.nullspace.rows;
    rs.particular = es.x_part;
    rs.equality_rank = es.rank;
    const DenseMatrix a_zero = select_rows(layer.weight, es.pattern.zero);
    rs.ineq_matrix = matmul(a_zero, transpose(es.nullspace));
    rs.ineq_offset = matvec(a_zero, es.x_part);
    const Vector b_zero = select(layer.bias, es.pattern.zero);
    for (std::size_t i = 0; i < rs.ineq_offset.size(); ++i) rs.ineq_offset[i] += b_zero[i];
    rs.num_inequalities = es.pattern.zero.size();
    return rs;
}

// Feasibility of ineq_matrix d + ineq_offset <= 0 over free d; with no
// nullspace directions this degenerates to a sign check on the offsets.
inline bool reduced_feasible(const ReducedSystem& rs) {
    if (rs.num_inequalities == 0) return true;
    if (rs.nullspace_dim == 0) {
        for (double v : rs.ineq_offset)
            if (v > kForwardTol) return false;
        return true;
    }
    LpProblem p = LpProblem::with_vars(rs.nullspace_dim);
    p.ineq_lhs = rs.ineq_matrix;
    p.ineq_rhs = rs.ineq_offset;
    for (double& v : p.ineq_rhs) v = -v;
    return feasible(p);
}

}  // namespace detail

inline ReducedSystem reduce_system(const AffineLayer& layer, const Vector& y, double act_tol = kActTol) {
    const auto es = detail::solve_equality_block(layer, y, act_tol);
    return detail::build_reduced(layer, es);
}

// Preimage classification. Full-rank active rows pin a unique input; otherwise
// the verdict is decided on the reduced inequality system: too few rows can
// never bound the nullspace coordinate, and beyond that the hull LP decides,
// cross-checked by the cone probe (the cone verdict wins a disagreement, which
// can only occur when 0 sits numerically on the hull boundary).
inline PreimageClass classify_preimage(const AffineLayer& layer, const Vector& y,
                                       double act_tol = kActTol) {
    const auto es = detail::solve_equality_block(layer, y, act_tol);
    const std::size_t n = layer.weight.cols;
    PreimageClass out;
    if (es.rank == n) {
        const Vector check = forward(layer, es.x_part);
        double resid = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) resid = std::max(resid, std::abs(check[i] - y[i]));
        if (resid > kForwardTol)
            throw InconsistentOutput("preimage: unique equality solution violates inactive rows");
        out.kind = PreimageKind::Singleton;
        out.point = es.x_part;
        out.diagnostics = "active rows have full rank " + std::to_string(n);
        return out;
    }

    ReducedSystem rs = detail::build_reduced(layer, es);
    if (!detail::reduced_feasible(rs))
        throw InconsistentOutput("preimage: inactive rows exclude every equality solution");
    if (rs.num_inequalities <= rs.nullspace_dim) {
        out.kind = PreimageKind::InfiniteVolume;
        out.diagnostics = "only " + std::to_string(rs.num_inequalities) +
                          " inequality rows against " + std::to_string(rs.nullspace_dim) +
                          " free directions";
        out.reduced = std::move(rs);
        return out;
    }

    const OmniVerdict hull = is_omnidirectional_hull(rs.ineq_matrix);
    const OmniVerdict cone = is_omnidirectional_cone(rs.ineq_matrix);
    bool omni = hull.is_omni;
    if (hull.is_omni != cone.is_omni) {
        omni = cone.is_omni;
        out.diagnostics = "boundary-degenerate: hull and cone verdicts disagree, cone wins; ";
    }
    out.kind = omni ? PreimageKind::FiniteVolume : PreimageKind::InfiniteVolume;
    out.diagnostics += omni ? "reduced rows are omnidirectional, preimage is a bounded polytope"
                            : "reduced rows admit a recession direction";
    out.reduced = std::move(rs);
    return out;
}

enum class PreimageExtent { Singleton, Bounded, Unbounded };

// Independent boundedness oracle: solve 2n LPs max +-x_j over the original
// mixed system, without rank or hull machinery. Any unbounded coordinate
// makes the preimage unbounded; otherwise coordinate spans below kCoincideTol
// collapse the box to a point.
inline PreimageExtent preimage_bounded_oracle(const AffineLayer& layer, const Vector& y,
                                              double act_tol = kActTol) {
    validate_layer(layer);
    if (layer.weight.rows != y.size())
        throw DimensionMismatch("preimage: output length does not match layer rows");
    const SignPattern sp = sign_pattern(y, act_tol);
    const std::size_t n = layer.weight.cols;

    LpProblem p = LpProblem::with_vars(n);
    p.eq_lhs = select_rows(layer.weight, sp.positive);
    p.eq_rhs = select(y, sp.positive);
    {
        const Vector b_pos = select(layer.bias, sp.positive);
        for (std::size_t i = 0; i < p.eq_rhs.size(); ++i) p.eq_rhs[i] -= b_pos[i];
    }
    p.ineq_lhs = select_rows(layer.weight, sp.zero);
    p.ineq_rhs = select(layer.bias, sp.zero);
    for (double& v : p.ineq_rhs) v = -v;

    if (!feasible(p)) throw InconsistentOutput("preimage: the queried output is not reachable");

    double span = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double ext[2];
        for (int s = 0; s < 2; ++s) {
            std::fill(p.objective.begin(), p.objective.end(), 0.0);
            p.objective[j] = s == 0 ? 1.0 : -1.0;
            const LpSolution sol = solve(p);
            if (sol.status == LpStatus::Unbounded) return PreimageExtent::Unbounded;
            if (sol.status != LpStatus::Optimal)
                throw InconsistentOutput("preimage: coordinate probe became infeasible");
            ext[s] = sol.objective_value;
        }
        span = std::max(span, ext[0] + ext[1]);  // max x_j plus max -x_j
    }
    return span <= kCoincideTol ? PreimageExtent::Singleton : PreimageExtent::Bounded;
}

// Decides whether the solution set of a d + b <= 0 is exactly one point, by
// locating the candidate point through coordinate LPs and testing that the
// rows active there are omnidirectional. Infeasible or non-degenerate systems
// return false.
inline bool inequality_singleton(const DenseMatrix& a, const Vector& b) {
    if (a.rows != b.size()) throw DimensionMismatch("inequality_singleton: shape mismatch");
    if (a.cols == 0) {
        for (double v : b)
            if (v > kFeasTol) return false;
        return true;
    }
    if (!all_finite(a) || !all_finite(b)) throw InvalidInput("inequality_singleton: non-finite input");

    LpProblem p = LpProblem::with_vars(a.cols);
    p.ineq_lhs = a;
    p.ineq_rhs = b;
    for (double& v : p.ineq_rhs) v = -v;
    if (!feasible(p)) return false;

    Vector point(a.cols, 0.0);
    for (std::size_t j = 0; j < a.cols; ++j) {
        double ext[2];
        for (int s = 0; s < 2; ++s) {
            std::fill(p.objective.begin(), p.objective.end(), 0.0);
            p.objective[j] = s == 0 ? 1.0 : -1.0;
            const LpSolution sol = solve(p);
            if (sol.status != LpStatus::Optimal) return false;  // unbounded coordinate
            ext[s] = sol.objective_value;
        }
        if (ext[0] + ext[1] > kCoincideTol) return false;
        point[j] = (ext[0] - ext[1]) / 2.0;
    }

    const Vector r = matvec(a, point);
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < a.rows; ++i)
        if (std::abs(r[i] + b[i]) <= kPointTol) active.push_back(i);
    if (active.size() <= a.cols) return false;
    return is_omnidirectional_for_point(select_rows(a, active), select(b, active), point);
}

// Exhaustive cross-check for the Singleton verdict on the reduced system.
// Refuses reduced systems with more than kExhaustiveBudget inequality rows.
inline bool singleton_exhaustive(const AffineLayer& layer, const Vector& y,
                                 double act_tol = kActTol) {
    const auto es = detail::solve_equality_block(layer, y, act_tol);
    const ReducedSystem rs = detail::build_reduced(layer, es);
    if (rs.num_inequalities > kExhaustiveBudget)
        throw BudgetExceeded("singleton_exhaustive: " + std::to_string(rs.num_inequalities) +
                             " reduced rows exceed the budget of " +
                             std::to_string(kExhaustiveBudget));
    if (!detail::reduced_feasible(rs))
        throw InconsistentOutput("preimage: inactive rows exclude every equality solution");
    if (rs.nullspace_dim == 0) return true;
    return inequality_singleton(rs.ineq_matrix, rs.ineq_offset);
}

// Whether x is recoverable from relu(a x), i.e. the only input mapping there:
// true when the strictly active rows already span, or when the rows sitting
// exactly on their hyperplane at x are omnidirectional inside the active
// rows' nullspace. Rows with a_i . x < 0 impose one-sided constraints only
// and never shrink the preimage to a point.
inline bool retrieval_under_relu(const DenseMatrix& a, const Vector& x, double act_tol = kActTol) {
    if (a.cols != x.size()) throw DimensionMismatch("retrieval_under_relu: shape mismatch");
    if (!all_finite(a) || !all_finite(x)) throw InvalidInput("retrieval_under_relu: non-finite input");
    const Vector z = matvec(a, x);
    std::vector<std::size_t> strict_pos, on_plane;
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (z[i] > act_tol)
            strict_pos.push_back(i);
        else if (z[i] >= -act_tol)
            on_plane.push_back(i);
    }
    const DenseMatrix a_pos = select_rows(a, strict_pos);
    if (rank(a_pos) == a.cols) return true;
    const DenseMatrix complement = nullspace_basis(a_pos);
    const DenseMatrix projected = matmul(select_rows(a, on_plane), transpose(complement));
    return is_omnidirectional_cone(projected).is_omni;
}

// Extreme point of the preimage within a box: maximize direction . x over
// inputs of the box that the layer maps to forward(layer, x_star) exactly.
inline Vector invariance_probe(const AffineLayer& layer, const Vector& x_star,
                               const Vector& direction, const Vector& lower, const Vector& upper,
                               double act_tol = kActTol) {
    validate_layer(layer);
    const std::size_t n = layer.weight.cols;
    if (x_star.size() != n || direction.size() != n || lower.size() != n || upper.size() != n)
        throw DimensionMismatch("invariance_probe: length mismatch");
    if (!all_finite(x_star) || !all_finite(direction))
        throw InvalidInput("invariance_probe: non-finite input");
    for (std::size_t j = 0; j < n; ++j) {
        if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j])
            throw InvalidInput("invariance_probe: malformed box");
        if (x_star[j] < lower[j] - kFeasTol || x_star[j] > upper[j] + kFeasTol)
            throw InvalidInput("invariance_probe: x_star outside the box");
    }

    const Vector y_star = forward(layer, x_star);
    const SignPattern sp = sign_pattern(y_star, act_tol);

    LpProblem p = LpProblem::with_vars(n);
    p.objective = direction;
    p.lower = lower;
    p.upper = upper;
    p.eq_lhs = select_rows(layer.weight, sp.positive);
    p.eq_rhs = select(y_star, sp.positive);
    {
        const Vector b_pos = select(layer.bias, sp.positive);
        for (std::size_t i = 0; i < p.eq_rhs.size(); ++i) p.eq_rhs[i] -= b_pos[i];
    }
    p.ineq_lhs = select_rows(layer.weight, sp.zero);
    p.ineq_rhs = select(layer.bias, sp.zero);
    for (double& v : p.ineq_rhs) v = -v;

    const LpSolution sol = solve(p);
    if (sol.status != LpStatus::Optimal)
        throw ProbeInfeasible(sol.status == LpStatus::Infeasible
                                  ? "invariance_probe: region LP infeasible although x_star "
                                    "satisfies it; tolerances are misconfigured"
                                  : "invariance_probe: region LP unbounded; the box must be finite");

    const Vector y_check = forward(layer, sol.x);
    double resid = 0.0;
    for (std::size_t i = 0; i < y_star.size(); ++i)
        resid = std::max(resid, std::abs(y_check[i] - y_star[i]));
    if (resid > kForwardTol)
        throw ProbeInfeasible("invariance_probe: optimum drifted out of the activation region");
    if (sol.objective_value < dot(direction, x_star) - kOptTol)
        throw ProbeInfeasible("invariance_probe: optimum fell below the probe point objective");
    return sol.x;
}

}  // namespace relu_preimage

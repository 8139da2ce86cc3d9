#pragma once

// Shared generators and independent oracles for the test suites. The oracles
// deliberately avoid the production code paths: singular values come from a
// two-sided Jacobi eigensolver on the Gram matrix, linear programs are solved
// by brute-force vertex enumeration over boxed polytopes, and Jacobians by
// central finite differences.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "relu_preimage/linalg.hpp"
#include "relu_preimage/lp.hpp"
#include "relu_preimage/preimage.hpp"
#include "relu_preimage/stability.hpp"

namespace testsupport {

namespace rp = relu_preimage;

inline rp::DenseMatrix random_matrix(std::mt19937_64& g, std::size_t r, std::size_t c,
                                     double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    rp::DenseMatrix m(r, c);
    for (double& v : m.entries) v = gauss(g);
    return m;
}

inline rp::Vector random_vector(std::mt19937_64& g, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    rp::Vector v(n);
    for (double& x : v) x = gauss(g);
    return v;
}

inline rp::DenseMatrix random_rank_deficient(std::mt19937_64& g, std::size_t r, std::size_t c,
                                             std::size_t target_rank) {
    const rp::DenseMatrix left = random_matrix(g, r, target_rank);
    const rp::DenseMatrix right = random_matrix(g, target_rank, c);
    return rp::matmul(left, right);
}

// Eigenvalues of a symmetric matrix by classic two-sided Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(rp::DenseMatrix s) {
    const std::size_t n = s.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        if (off < 1e-28 * (1.0 + rp::frobenius_norm(s))) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (std::abs(apq) < 1e-300) continue;
                const double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(1.0 + theta * theta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double sn = c * t;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = s(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<>());
    return eig;
}

// Singular values through the Gram matrix, independent of the production SVD.
inline std::vector<double> oracle_singular_values(const rp::DenseMatrix& m) {
    const bool tall = m.rows >= m.cols;
    const rp::DenseMatrix g = tall ? rp::matmul(rp::transpose(m), m)
                                   : rp::matmul(m, rp::transpose(m));
    std::vector<double> eig = symmetric_eigenvalues(g);
    for (double& v : eig) v = std::sqrt(std::max(v, 0.0));
    return eig;
}

// Gaussian elimination with partial pivoting; returns false on a singular
// system. Used only inside the vertex-enumeration oracle.
inline bool dense_solve(rp::DenseMatrix a, rp::Vector b, rp::Vector& x) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) return false;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
        if (std::abs(a(piv, col)) < 1e-11) return false;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(col, j), a(piv, j));
            std::swap(b[col], b[piv]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a(r, col) / a(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a(r, j) -= f * a(col, j);
            b[r] -= f * b[col];
        }
    }
    x.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
        x[i] = acc / a(i, i);
    }
    return true;
}

struct OracleLpResult {
    rp::LpStatus status = rp::LpStatus::Infeasible;
    double objective_value = 0.0;
    rp::Vector argmax;
};

// Brute-force LP oracle for problems whose variables all live in finite
// boxes: every vertex of the feasible set is the solution of n tight
// constraints, so enumerate all n-subsets drawn from equalities (always
// tight), inequality rows, and single-variable bounds; keep the feasible
// solutions and maximize over them. Finite boxes rule out unboundedness, so
// no feasible vertex means infeasible.
inline OracleLpResult lp_oracle(const rp::LpProblem& p, double feas_tol = 1e-7) {
    const std::size_t n = p.objective.size();
    const std::size_t peq = p.eq_lhs.rows, q = p.ineq_lhs.rows;

    // Tight-row candidates beyond the equalities: q inequality rows, then n
    // lower bounds, then n upper bounds.
    const std::size_t num_cand = q + 2 * n;
    std::vector<std::size_t> subset;
    OracleLpResult best;
    best.status = rp::LpStatus::Infeasible;

    if (peq > n) return best;
    const std::size_t need = n - peq;

    auto row_of = [&](std::size_t cand, rp::Vector& row, double& rhs) {
        row.assign(n, 0.0);
        if (cand < q) {
            for (std::size_t j = 0; j < n; ++j) row[j] = p.ineq_lhs(cand, j);
            rhs = p.ineq_rhs[cand];
        } else if (cand < q + n) {
            row[cand - q] = 1.0;
            rhs = p.lower[cand - q];
        } else {
            row[cand - q - n] = 1.0;
            rhs = p.upper[cand - q - n];
        }
    };

    auto consider = [&](const std::vector<std::size_t>& tight) {
        rp::DenseMatrix sys(n, n);
        rp::Vector rhs(n);
        for (std::size_t r = 0; r < peq; ++r) {
            for (std::size_t j = 0; j < n; ++j) sys(r, j) = p.eq_lhs(r, j);
            rhs[r] = p.eq_rhs[r];
        }
        rp::Vector row;
        double b = 0.0;
        for (std::size_t r = 0; r < tight.size(); ++r) {
            row_of(tight[r], row, b);
            for (std::size_t j = 0; j < n; ++j) sys(peq + r, j) = row[j];
            rhs[peq + r] = b;
        }
        rp::Vector x;
        if (!dense_solve(sys, rhs, x)) return;
        for (std::size_t j = 0; j < n; ++j)
            if (x[j] < p.lower[j] - feas_tol || x[j] > p.upper[j] + feas_tol) return;
        for (std::size_t r = 0; r < peq; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += p.eq_lhs(r, j) * x[j];
            if (std::abs(acc - p.eq_rhs[r]) > feas_tol) return;
        }
        for (std::size_t r = 0; r < q; ++r) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += p.ineq_lhs(r, j) * x[j];
            if (acc > p.ineq_rhs[r] + feas_tol) return;
        }
        const double val = std::inner_product(p.objective.begin(), p.objective.end(), x.begin(), 0.0);
        if (best.status == rp::LpStatus::Infeasible || val > best.objective_value) {
            best.status = rp::LpStatus::Optimal;
            best.objective_value = val;
            best.argmax = x;
        }
    };

    std::vector<std::size_t> idx(need);
    auto recurse = [&](auto&& self, std::size_t pos, std::size_t from) -> void {
        if (pos == need) {
            consider(idx);
            return;
        }
        for (std::size_t c = from; c < num_cand; ++c) {
            idx[pos] = c;
            self(self, pos + 1, c + 1);
        }
    };
    recurse(recurse, 0, 0);
    return best;
}

// Central-difference Jacobian of the model forward map.
inline rp::DenseMatrix fd_jacobian(const rp::MlpModel& m, const rp::Vector& x, double step = 1e-6) {
    const std::size_t n = x.size();
    const std::size_t out = rp::output_dim(m);
    rp::DenseMatrix jac(out, n);
    for (std::size_t j = 0; j < n; ++j) {
        rp::Vector hi = x, lo = x;
        hi[j] += step;
        lo[j] -= step;
        const rp::Vector fh = rp::model_forward(m, hi);
        const rp::Vector fl = rp::model_forward(m, lo);
        for (std::size_t i = 0; i < out; ++i) jac(i, j) = (fh[i] - fl[i]) / (2.0 * step);
    }
    return jac;
}

// Random rectifier model with the given layer widths.
inline rp::MlpModel random_model(std::mt19937_64& g, const std::vector<std::size_t>& dims,
                                 double weight_scale = 1.0, double bias_scale = 0.5) {
    rp::MlpModel m;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        rp::AffineLayer layer;
        layer.weight = random_matrix(g, dims[l + 1], dims[l], weight_scale);
        layer.bias = random_vector(g, dims[l + 1], bias_scale);
        m.layers.push_back(std::move(layer));
    }
    return m;
}

// Resample x until every hidden preactivation stays clear of zero, so the
// activation region has interior margin around x.
inline rp::Vector sample_interior_input(std::mt19937_64& g, const rp::MlpModel& m,
                                        double min_margin = 1e-3, int max_tries = 200) {
    const std::size_t n = rp::input_dim(m);
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        rp::Vector x = random_vector(g, n);
        bool ok = true;
        rp::Vector h = x;
        for (std::size_t l = 0; l + 1 < m.layers.size() && ok; ++l) {
            h = rp::matvec(m.layers[l].weight, h);
            for (std::size_t i = 0; i < h.size(); ++i) {
                h[i] += m.layers[l].bias[i];
                if (std::abs(h[i]) < min_margin) ok = false;
            }
            for (double& v : h) v = std::max(v, 0.0);
        }
        if (ok) return x;
    }
    throw std::runtime_error("sample_interior_input: no interior point found");
}

}  // namespace testsupport

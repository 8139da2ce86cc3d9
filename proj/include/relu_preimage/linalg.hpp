#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "relu_preimage/errors.hpp"

namespace relu_preimage {

using Vector = std::vector<double>;

// Relative threshold used to call a singular value zero: a value sigma counts
// as zero when sigma <= kRankTol * max(rows, cols) * sigma_max.
constexpr double kRankTol = 1e-10;

// Row-major dense matrix of 64-bit floats. Zero-row and zero-column shapes
// are legal; entries.size() == rows * cols always holds.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> entries;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), entries(r * c, fill) {}

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return entries[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return entries[i * cols + j]; }
};

inline bool all_finite(const Vector& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(const DenseMatrix& m) { return all_finite(m.entries); }

inline DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols != b.rows)
        throw DimensionMismatch("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                                " times " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    DenseMatrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

inline Vector matvec(const DenseMatrix& a, const Vector& x) {
    if (a.cols != x.size())
        throw DimensionMismatch("matvec: matrix has " + std::to_string(a.cols) +
                                " columns, vector has length " + std::to_string(x.size()));
    Vector y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += a(i, j) * x[j];
        y[i] = acc;
    }
    return y;
}

inline DenseMatrix select_rows(const DenseMatrix& a, const std::vector<std::size_t>& idx) {
    DenseMatrix out(idx.size(), a.cols);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= a.rows) throw InvalidInput("select_rows: index out of range");
        for (std::size_t j = 0; j < a.cols; ++j) out(r, j) = a(idx[r], j);
    }
    return out;
}

inline Vector select(const Vector& v, const std::vector<std::size_t>& idx) {
    Vector out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] >= v.size()) throw InvalidInput("select: index out of range");
        out[r] = v[idx[r]];
    }
    return out;
}

inline double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(const Vector& v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

inline double norm_inf(const Vector& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

inline double frobenius_norm(const DenseMatrix& a) {
    return std::sqrt(std::inner_product(a.entries.begin(), a.entries.end(), a.entries.begin(), 0.0));
}

// Singular values in descending order; values <= zero_tol count as zero.
struct SingularSpectrum {
    std::vector<double> values;
    double zero_tol = 0.0;
    std::size_t num_nonzero = 0;
};

inline SingularSpectrum make_spectrum(std::vector<double> values, double zero_tol) {
    SingularSpectrum s;
    s.values = std::move(values);
    s.zero_tol = zero_tol;
    s.num_nonzero = static_cast<std::size_t>(
        std::count_if(s.values.begin(), s.values.end(), [&](double v) { return v > zero_tol; }));
    return s;
}

namespace detail {

struct JacobiFactors {
    DenseMatrix w;                  // same shape as the input, mutually orthogonal columns
    DenseMatrix v;                  // accumulated right rotations, input * v == w
    std::vector<double> col_norms;  // descending; these are the singular values padded
                                    // with zeros when the input is wide
};

// One-sided Jacobi (Hestenes) orthogonalization of the columns. Converges when
// every column pair is orthogonal relative to the column norms; rank-deficient
// inputs end with exactly-zero or tiny columns, which is what rank and
// nullspace extraction rely on.
inline JacobiFactors one_sided_jacobi(const DenseMatrix& a) {
    const std::size_t m = a.rows, n = a.cols;
    JacobiFactors f;
    f.w = a;
    f.v = DenseMatrix::identity(n);
    DenseMatrix& w = f.w;
    DenseMatrix& v = f.v;

    const double off_tol = 1e-14;
    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && n >= 2; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if (alpha == 0.0 || beta == 0.0) continue;
                if (std::abs(gamma) <= off_tol * std::sqrt(alpha * beta)) continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
                rotated = true;
            }
        }
        if (!rotated) break;
    }

    std::vector<double> norms(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += w(i, j) * w(i, j);
        norms[j] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    DenseMatrix ws(m, n), vs(n, n);
    f.col_norms.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        f.col_norms[j] = norms[src];
        for (std::size_t i = 0; i < m; ++i) ws(i, j) = w(i, src);
        for (std::size_t i = 0; i < n; ++i) vs(i, j) = v(i, src);
    }
    f.w = std::move(ws);
    f.v = std::move(vs);
    return f;
}

}  // namespace detail

// Thin singular value decomposition: m == u * diag(s.values) * vt with
// u of shape rows x min(rows, cols) (orthonormal columns), vt of shape
// min(rows, cols) x cols (orthonormal rows).
struct SvdResult {
    DenseMatrix u;
    SingularSpectrum s;
    DenseMatrix vt;
};

inline SvdResult svd(const DenseMatrix& m_in) {
    if (!all_finite(m_in)) throw InvalidInput("svd: input has non-finite entries");
    if (m_in.rows == 0 || m_in.cols == 0)
        throw InvalidInput("svd: zero-dimensional input");
    const bool wide = m_in.rows < m_in.cols;
    const DenseMatrix work = wide ? transpose(m_in) : m_in;
    auto f = detail::one_sided_jacobi(work);
    const std::size_t wr = work.rows, wc = work.cols;
    const double sigma_max = f.col_norms.empty() ? 0.0 : f.col_norms.front();

    // Normalize the orthogonal columns; exactly-zero ones (rank deficiency)
    // are replaced by an orthonormal completion so u stays column-orthonormal.
    DenseMatrix uw(wr, wc);
    for (std::size_t j = 0; j < wc; ++j) {
        if (f.col_norms[j] > 0.0) {
            for (std::size_t i = 0; i < wr; ++i) uw(i, j) = f.w(i, j) / f.col_norms[j];
        } else {
            bool placed = false;
            for (std::size_t k = 0; k < wr && !placed; ++k) {
                Vector cand(wr, 0.0);
                cand[k] = 1.0;
                for (int pass = 0; pass < 2; ++pass)
                    for (std::size_t c = 0; c < j; ++c) {
                        double proj = 0.0;
                        for (std::size_t i = 0; i < wr; ++i) proj += uw(i, c) * cand[i];
                        for (std::size_t i = 0; i < wr; ++i) cand[i] -= proj * uw(i, c);
                    }
                const double nrm = norm2(cand);
                if (nrm > 0.5) {
                    for (std::size_t i = 0; i < wr; ++i) uw(i, j) = cand[i] / nrm;
                    placed = true;
                }
            }
            if (!placed) throw Error("svd: orthonormal completion failed");
        }
    }

    const double ztol = kRankTol * static_cast<double>(std::max(m_in.rows, m_in.cols)) * sigma_max;
    SingularSpectrum spec = make_spectrum(f.col_norms, ztol);
    if (!wide) return {std::move(uw), std::move(spec), transpose(f.v)};
    return {std::move(f.v), std::move(spec), transpose(uw)};
}

inline std::size_t rank(const DenseMatrix& m, double tol = kRankTol) {
    if (tol <= 0.0) throw InvalidInput("rank: tol must be positive");
    if (!all_finite(m)) throw InvalidInput("rank: input has non-finite entries");
    if (m.rows == 0 || m.cols == 0) return 0;
    auto f = detail::one_sided_jacobi(m);
    const double thr = tol * static_cast<double>(std::max(m.rows, m.cols)) * f.col_norms.front();
    return static_cast<std::size_t>(
        std::count_if(f.col_norms.begin(), f.col_norms.end(), [&](double v) { return v > thr; }));
}

// Orthonormal basis of the right nullspace, returned as the rows of a
// (cols - rank) x cols matrix. A zero-row input yields the identity.
inline DenseMatrix nullspace_basis(const DenseMatrix& m, double tol = kRankTol) {
    if (tol <= 0.0) throw InvalidInput("nullspace_basis: tol must be positive");
    if (!all_finite(m)) throw InvalidInput("nullspace_basis: input has non-finite entries");
    if (m.cols == 0) return DenseMatrix(0, 0);
    if (m.rows == 0) return DenseMatrix::identity(m.cols);
    auto f = detail::one_sided_jacobi(m);
    const double thr = tol * static_cast<double>(std::max(m.rows, m.cols)) * f.col_norms.front();
    std::vector<std::size_t> zero_cols;
    for (std::size_t j = 0; j < m.cols; ++j)
        if (f.col_norms[j] <= thr) zero_cols.push_back(j);
    DenseMatrix o(zero_cols.size(), m.cols);
    for (std::size_t r = 0; r < zero_cols.size(); ++r)
        for (std::size_t j = 0; j < m.cols; ++j) o(r, j) = f.v(j, zero_cols[r]);
    return o;
}

// Restricted condition number: largest singular value over the smallest one
// above zero_tol. All-zero spectra have no meaningful value.
inline double condition_number(const SingularSpectrum& s) {
    if (s.num_nonzero == 0)
        throw DegenerateSpectrum("condition_number: no singular value above zero_tol");
    return s.values.front() / s.values[s.num_nonzero - 1];
}

// Minimum-norm least-squares solution of a * x ~= rhs via the pseudoinverse.
inline Vector min_norm_solution(const DenseMatrix& a, const Vector& rhs) {
    if (a.rows != rhs.size()) throw DimensionMismatch("min_norm_solution: rhs length mismatch");
    if (a.rows == 0 || a.cols == 0) return Vector(a.cols, 0.0);
    auto r = svd(a);
    Vector x(a.cols, 0.0);
    for (std::size_t i = 0; i < r.s.values.size(); ++i) {
        if (r.s.values[i] <= r.s.zero_tol) continue;
        double ui_rhs = 0.0;
        for (std::size_t k = 0; k < a.rows; ++k) ui_rhs += r.u(k, i) * rhs[k];
        const double coef = ui_rhs / r.s.values[i];
        for (std::size_t j = 0; j < a.cols; ++j) x[j] += coef * r.vt(i, j);
    }
    return x;
}

}  // namespace relu_preimage

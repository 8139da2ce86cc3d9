#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "relu_preimage/errors.hpp"
#include "relu_preimage/linalg.hpp"
#include "relu_preimage/lp.hpp"
#include "relu_preimage/preimage.hpp"

namespace relu_preimage {

// Box radius inside which admissibility witnesses are searched.
constexpr double kAdmissibleBox = 1e3;

enum class Activation { Relu, None, Softmax };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::None: return "none";
        case Activation::Softmax: return "softmax";
    }
    return "none";
}

// Rectifier network: ReLU after every layer except the last. The recorded
// final activation is metadata only; analyses treat the head as affine.
struct MlpModel {
    std::vector<AffineLayer> layers;
    Activation final_activation = Activation::None;
};

inline void validate_model(const MlpModel& m) {
    if (m.layers.empty()) throw InvalidInput("model: no layers");
    for (const auto& layer : m.layers) validate_layer(layer);
    for (std::size_t l = 0; l + 1 < m.layers.size(); ++l)
        if (m.layers[l + 1].weight.cols != m.layers[l].weight.rows)
            throw DimensionMismatch("model: layer " + std::to_string(l + 2) + " expects " +
                                    std::to_string(m.layers[l + 1].weight.cols) +
                                    " inputs but layer " + std::to_string(l + 1) + " emits " +
                                    std::to_string(m.layers[l].weight.rows));
}

inline std::size_t input_dim(const MlpModel& m) { return m.layers.front().weight.cols; }
inline std::size_t output_dim(const MlpModel& m) { return m.layers.back().weight.rows; }

inline Vector model_forward(const MlpModel& m, const Vector& x) {
    validate_model(m);
    if (x.size() != input_dim(m)) throw DimensionMismatch("model_forward: input length mismatch");
    if (!all_finite(x)) throw InvalidInput("model_forward: non-finite input");
    Vector h = x;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        h = matvec(m.layers[l].weight, h);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += m.layers[l].bias[i];
        if (l + 1 < m.layers.size())
            for (double& v : h) v = std::max(v, 0.0);
    }
    return h;
}

// Units removed by the ReLU after each hidden layer, in forward order.
struct MaskChain {
    std::vector<std::vector<std::size_t>> deactivated;
};

// Exact linearization of the network on the activation region of an input:
// a_p x' + b_p reproduces the forward map for every x' with the same mask
// chain. Units with preactivation <= act_tol count as deactivated (exact
// zeros included).
struct LinearizationResult {
    DenseMatrix a_p;
    Vector b_p;
    MaskChain chain;
};

namespace detail {

inline void zero_rows_in_place(DenseMatrix& m, Vector* offset, const std::vector<std::size_t>& rows) {
    for (std::size_t r : rows) {
        if (r >= m.rows) throw InvalidInput("mask: row index out of range");
        for (std::size_t j = 0; j < m.cols; ++j) m(r, j) = 0.0;
        if (offset) (*offset)[r] = 0.0;
    }
}

}  // namespace detail

inline LinearizationResult linearize(const MlpModel& m, const Vector& x, double act_tol = kActTol) {
    validate_model(m);
    if (x.size() != input_dim(m)) throw DimensionMismatch("linearize: input length mismatch");
    if (!all_finite(x)) throw InvalidInput("linearize: non-finite input");

    LinearizationResult res;
    res.a_p = m.layers.front().weight;
    res.b_p = m.layers.front().bias;
    Vector h = matvec(m.layers.front().weight, x);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += m.layers.front().bias[i];

    for (std::size_t l = 1; l < m.layers.size(); ++l) {
        std::vector<std::size_t> off;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (h[i] <= act_tol) off.push_back(i);
        detail::zero_rows_in_place(res.a_p, &res.b_p, off);
        res.chain.deactivated.push_back(std::move(off));
        for (double& v : h) v = std::max(v, 0.0);

        res.a_p = matmul(m.layers[l].weight, res.a_p);
        res.b_p = matvec(m.layers[l].weight, res.b_p);
        h = matvec(m.layers[l].weight, h);
        for (std::size_t i = 0; i < h.size(); ++i) {
            res.b_p[i] += m.layers[l].bias[i];
            h[i] += m.layers[l].bias[i];
        }
    }
    return res;
}

// An index set is admissible for a layer when some input deactivates exactly
// those units: rows in the set must reach at most -margin, the others at
// least +margin, inside the search box. Decided by one feasibility LP.
inline bool is_admissible(const AffineLayer& layer, const std::vector<std::size_t>& deactivated,
                          double margin = kStrictIneqMargin, double box = kAdmissibleBox) {
    validate_layer(layer);
    if (margin <= 0.0 || box <= 0.0) throw InvalidInput("is_admissible: margin and box must be positive");
    std::vector<char> in_set(layer.weight.rows, 0);
    for (std::size_t r : deactivated) {
        if (r >= layer.weight.rows) throw InvalidInput("is_admissible: row index out of range");
        in_set[r] = 1;
    }
    const std::size_t n = layer.weight.cols;
    LpProblem p = LpProblem::with_vars(n);
    std::fill(p.lower.begin(), p.lower.end(), -box);
    std::fill(p.upper.begin(), p.upper.end(), box);
    p.ineq_lhs = DenseMatrix(layer.weight.rows, n);
    p.ineq_rhs.assign(layer.weight.rows, 0.0);
    for (std::size_t i = 0; i < layer.weight.rows; ++i) {
        const double sgn = in_set[i] ? 1.0 : -1.0;
        for (std::size_t j = 0; j < n; ++j) p.ineq_lhs(i, j) = sgn * layer.weight(i, j);
        p.ineq_rhs[i] = -sgn * layer.bias[i] - margin;
    }
    return feasible(p);
}

// Spectra before and after zeroing the given rows. Removing rows can only
// shrink the top of the spectrum and push nothing above the old values: the
// largest surviving value stays below sigma_1 and, with |removed| rows gone,
// the smallest nonzero surviving value stays below the (N - |removed|)-th
// nonzero value of the original. Both facts are asserted here.
inline std::pair<SingularSpectrum, SingularSpectrum> spectrum_effect(
    const DenseMatrix& a, const std::vector<std::size_t>& removed) {
    if (!all_finite(a)) throw InvalidInput("spectrum_effect: non-finite entries");
    if (a.rows == 0 || a.cols == 0) throw InvalidInput("spectrum_effect: empty matrix");
    DenseMatrix masked = a;
    detail::zero_rows_in_place(masked, nullptr, removed);

    const SingularSpectrum before = svd(a).s;
    const SingularSpectrum after = svd(masked).s;

    const double slack = 1e-9 + 1e-12 * before.values.front();
    if (after.num_nonzero > 0) {
        if (after.values.front() > before.values.front() + slack)
            throw Error("spectrum_effect: masked top value exceeded the original spectrum");
        std::vector<std::size_t> unique_removed;
        for (std::size_t r : removed)
            if (std::find(unique_removed.begin(), unique_removed.end(), r) == unique_removed.end())
                unique_removed.push_back(r);
        if (before.num_nonzero > unique_removed.size()) {
            const std::size_t k = before.num_nonzero - unique_removed.size();
            const double bound = before.values[k - 1];
            if (after.values[after.num_nonzero - 1] > bound + slack)
                throw Error("spectrum_effect: masked smallest nonzero value exceeded its bound");
        }
    }
    return {before, after};
}

// Row-correlation bound: if every surviving row j has
// |<a_j, a_k>| <= c * |a_k| / sqrt(M), with M surviving rows, and a_k lies in
// the row space of the masked matrix, then the smallest nonzero singular
// value of the masked matrix is at most c. c_min is the smallest c for which
// the hypothesis holds at this k.
struct CorrelationBound {
    double c_min = 0.0;
    double sigma_min_after = 0.0;
    bool bound_applies = false;
};

inline CorrelationBound correlation_bound(const DenseMatrix& a,
                                          const std::vector<std::size_t>& removed, std::size_t k) {
    if (!all_finite(a)) throw InvalidInput("correlation_bound: non-finite entries");
    std::vector<char> in_set(a.rows, 0);
    for (std::size_t r : removed) {
        if (r >= a.rows) throw InvalidInput("correlation_bound: row index out of range");
        in_set[r] = 1;
    }
    if (k >= a.rows || !in_set[k])
        throw InvalidInput("correlation_bound: k must be a removed row index");

    Vector row_k(a.cols);
    for (std::size_t j = 0; j < a.cols; ++j) row_k[j] = a(k, j);
    const double nk = norm2(row_k);
    if (nk == 0.0) throw DegenerateRow("correlation_bound: removed row has zero norm");

    DenseMatrix masked = a;
    detail::zero_rows_in_place(masked, nullptr, removed);
    std::size_t survivors = 0;
    for (std::size_t i = 0; i < a.rows; ++i)
        if (!in_set[i]) ++survivors;
    if (survivors == 0) throw DegenerateRow("correlation_bound: no surviving rows");

    double max_corr = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        if (in_set[i]) continue;
        double ip = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) ip += a(i, j) * row_k[j];
        max_corr = std::max(max_corr, std::abs(ip));
    }

    CorrelationBound out;
    out.c_min = max_corr * std::sqrt(static_cast<double>(survivors)) / nk;
    const SingularSpectrum after = svd(masked).s;
    out.sigma_min_after = after.num_nonzero > 0 ? after.values[after.num_nonzero - 1] : 0.0;

    // The bound needs a_k inside the masked row space; test by projection
    // onto the right singular vectors with nonzero value.
    const SvdResult dec = svd(masked);
    Vector proj(a.cols, 0.0);
    for (std::size_t i = 0; i < dec.s.values.size(); ++i) {
        if (dec.s.values[i] <= dec.s.zero_tol) continue;
        double coef = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) coef += dec.vt(i, j) * row_k[j];
        for (std::size_t j = 0; j < a.cols; ++j) proj[j] += coef * dec.vt(i, j);
    }
    double resid = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) resid += (row_k[j] - proj[j]) * (row_k[j] - proj[j]);
    out.bound_applies = std::sqrt(resid) <= kPointTol * nk;
    return out;
}

// For each threshold c in the grid, the largest number of surviving rows
// whose correlation with some removed row a_k stays within c |a_k| / sqrt(M).
// Counts reaching m_remaining mean the correlation hypothesis holds for that
// c and the smallest nonzero singular value is bounded by c.
struct CorrelationSweep {
    Vector c_grid;
    std::vector<std::size_t> counts;
    std::size_t m_remaining = 0;
    std::size_t threshold_row_count = 0;
};

inline CorrelationSweep correlation_sweep(const DenseMatrix& a,
                                          const std::vector<std::size_t>& removed,
                                          const Vector& c_grid) {
    if (!all_finite(a)) throw InvalidInput("correlation_sweep: non-finite entries");
    if (removed.empty()) throw NothingRemoved("correlation_sweep: no removed rows");
    if (!all_finite(c_grid)) throw InvalidInput("correlation_sweep: non-finite grid");
    std::vector<char> in_set(a.rows, 0);
    for (std::size_t r : removed) {
        if (r >= a.rows) throw InvalidInput("correlation_sweep: row index out of range");
        in_set[r] = 1;
    }
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < a.rows; ++i)
        if (!in_set[i]) survivors.push_back(i);

    CorrelationSweep sweep;
    sweep.c_grid = c_grid;
    sweep.m_remaining = survivors.size();
    sweep.threshold_row_count = survivors.size();
    sweep.counts.assign(c_grid.size(), 0);
    if (survivors.empty()) return sweep;

    const double root_m = std::sqrt(static_cast<double>(survivors.size()));
    for (std::size_t g = 0; g < c_grid.size(); ++g) {
        std::size_t best = 0;
        for (std::size_t k : removed) {
            Vector row_k(a.cols);
            for (std::size_t j = 0; j < a.cols; ++j) row_k[j] = a(k, j);
            const double nk = norm2(row_k);
            if (nk == 0.0) throw DegenerateRow("correlation_sweep: removed row has zero norm");
            const double cap = c_grid[g] * nk / root_m;
            std::size_t count = 0;
            for (std::size_t i : survivors) {
                double ip = 0.0;
                for (std::size_t j = 0; j < a.cols; ++j) ip += a(i, j) * row_k[j];
                if (std::abs(ip) <= cap) ++count;
            }
            best = std::max(best, count);
        }
        sweep.counts[g] = best;
    }
    return sweep;
}

// One aggregated statistic of the layerwise singular spectra.
struct SpectrumRow {
    std::size_t layer_index = 0;  // 1-based
    std::string stage;            // "affine" or "relu"
    std::string stat;             // sigma_max, sigma_min_nonzero, num_nonzero, cond
    double value = 0.0;
    std::size_t n_samples = 0;
};

struct SpectrumReport {
    std::vector<SpectrumRow> rows;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct StageStats {
    double sigma_max = 0.0;
    double sigma_min_nonzero = 0.0;
    double num_nonzero = 0.0;
    double cond = 0.0;
};

inline StageStats stats_of(const DenseMatrix& m) {
    const SingularSpectrum s = svd(m).s;
    StageStats st;
    st.sigma_max = s.values.empty() ? 0.0 : s.values.front();
    st.num_nonzero = static_cast<double>(s.num_nonzero);
    if (s.num_nonzero > 0) {
        st.sigma_min_nonzero = s.values[s.num_nonzero - 1];
        st.cond = st.sigma_max / st.sigma_min_nonzero;
    }
    return st;
}

// Spectra of every prefix linearization along the forward pass of one input:
// the affine stage after multiplying layer l, the relu stage after masking.
inline std::vector<StageStats> stage_stats_for_input(const MlpModel& m, const Vector& x,
                                                     double act_tol) {
    std::vector<StageStats> out;
    DenseMatrix prefix = m.layers.front().weight;
    Vector h = matvec(m.layers.front().weight, x);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += m.layers.front().bias[i];
    out.push_back(stats_of(prefix));

    for (std::size_t l = 1; l < m.layers.size(); ++l) {
        std::vector<std::size_t> off;
        for (std::size_t i = 0; i < h.size(); ++i)
            if (h[i] <= act_tol) off.push_back(i);
        zero_rows_in_place(prefix, nullptr, off);
        out.push_back(stats_of(prefix));
        for (double& v : h) v = std::max(v, 0.0);

        prefix = matmul(m.layers[l].weight, prefix);
        h = matvec(m.layers[l].weight, h);
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += m.layers[l].bias[i];
        out.push_back(stats_of(prefix));
    }
    return out;
}

}  // namespace detail

// Median spectra of the exact linearization prefixes over a batch of inputs.
// Rows follow the forward order: layer 1 affine, layer 1 relu, layer 2
// affine, ... final layer affine; each (layer, stage) emits the four stats.
// threads caps the number of worker threads; results do not depend on it.
inline SpectrumReport layerwise_report(const MlpModel& m, const std::vector<Vector>& inputs,
                                       std::size_t threads = 1, double act_tol = kActTol) {
    validate_model(m);
    if (inputs.empty()) throw InvalidInput("layerwise_report: no inputs");
    const std::size_t num_stages = 2 * m.layers.size() - 1;
    std::vector<std::vector<detail::StageStats>> per_input(inputs.size());

    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, inputs.size()));
    if (workers == 1) {
        for (std::size_t i = 0; i < inputs.size(); ++i)
            per_input[i] = detail::stage_stats_for_input(m, inputs[i], act_tol);
    } else {
        std::vector<std::thread> pool;
        std::exception_ptr first_error;
        std::mutex guard;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w]() {
                try {
                    for (std::size_t i = w; i < inputs.size(); i += workers)
                        per_input[i] = detail::stage_stats_for_input(m, inputs[i], act_tol);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(guard);
                    if (!first_error) first_error = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (first_error) std::rethrow_exception(first_error);
    }

    SpectrumReport report;
    const char* stat_names[4] = {"sigma_max", "sigma_min_nonzero", "num_nonzero", "cond"};
    for (std::size_t s = 0; s < num_stages; ++s) {
        const std::size_t layer = s / 2 + 1;
        const char* stage = s % 2 == 0 ? "affine" : "relu";
        for (int which = 0; which < 4; ++which) {
            std::vector<double> samples(inputs.size());
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                const detail::StageStats& st = per_input[i][s];
                samples[i] = which == 0   ? st.sigma_max
                             : which == 1 ? st.sigma_min_nonzero
                             : which == 2 ? st.num_nonzero
                                          : st.cond;
            }
            SpectrumRow row;
            row.layer_index = layer;
            row.stage = stage;
            row.stat = stat_names[which];
            row.value = detail::median(std::move(samples));
            row.n_samples = inputs.size();
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

}  // namespace relu_preimage

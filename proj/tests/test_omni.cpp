#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "relu_preimage/omni.hpp"
#include "test_support.hpp"

namespace rp = relu_preimage;
using testsupport::random_matrix;

namespace {

rp::DenseMatrix from_rows(const std::vector<rp::Vector>& rows) {
    rp::DenseMatrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
    return m;
}

rp::DenseMatrix stack(const rp::DenseMatrix& a, const rp::DenseMatrix& b) {
    REQUIRE(a.cols == b.cols);
    rp::DenseMatrix m(a.rows + b.rows, a.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) m(i, j) = a(i, j);
    for (std::size_t i = 0; i < b.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j) m(a.rows + i, j) = b(i, j);
    return m;
}

// Ground-truth check on a declared-omni matrix: every sampled direction must
// see at least one row on its positive side.
void check_every_halfspace_hit(const rp::DenseMatrix& a, std::mt19937_64& g, int samples) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int s = 0; s < samples; ++s) {
        rp::Vector d(a.cols);
        double nrm = 0.0;
        for (double& v : d) {
            v = gauss(g);
            nrm += v * v;
        }
        nrm = std::sqrt(nrm);
        if (nrm == 0.0) continue;
        double best = -1.0;
        for (std::size_t i = 0; i < a.rows; ++i) {
            double ip = 0.0;
            for (std::size_t j = 0; j < a.cols; ++j) ip += a(i, j) * d[j] / nrm;
            best = std::max(best, ip);
        }
        REQUIRE(best > 0.0);
    }
}

}  // namespace

TEST_CASE("triangle of rows surrounds the origin", "[omni]") {
    const rp::DenseMatrix a = from_rows({{1, 0}, {0, 1}, {-1, -1}});
    const auto hull = rp::is_omnidirectional_hull(a);
    REQUIRE(hull.is_omni);
    REQUIRE(hull.witness.has_value());
    const rp::Vector& w = *hull.witness;
    REQUIRE(w.size() == 3);
    double sum = 0.0;
    rp::Vector combo(2, 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(w[i] >= -1e-9);
        sum += w[i];
        for (std::size_t j = 0; j < 2; ++j) combo[j] += w[i] * a(i, j);
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-8));
    REQUIRE(rp::norm_inf(combo) <= 1e-6);

    REQUIRE(rp::is_omnidirectional_cone(a).is_omni);
    const auto st = rp::is_omnidirectional_stiemke(a);
    REQUIRE(st.is_omni);
    REQUIRE(st.witness.has_value());
    rp::Vector combined(2, 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE((*st.witness)[i] >= rp::kPosFloor - 1e-12);
        for (std::size_t j = 0; j < 2; ++j) combined[j] += (*st.witness)[i] * a(i, j);
    }
    REQUIRE(rp::norm_inf(combined) <= 1e-6);
}

TEST_CASE("too few rows can never be omnidirectional", "[omni]") {
    const rp::DenseMatrix a = from_rows({{1, 0}, {0, 1}});
    REQUIRE_FALSE(rp::is_omnidirectional_hull(a).is_omni);
    const auto cone = rp::is_omnidirectional_cone(a);
    REQUIRE_FALSE(cone.is_omni);
    REQUIRE(cone.witness.has_value());
    const rp::Vector& d = *cone.witness;
    REQUIRE(rp::norm_inf(d) > 1e-7);
    const rp::Vector ad = rp::matvec(a, d);
    for (double v : ad) REQUIRE(v <= 1e-7);
}

TEST_CASE("one-dimensional rows on both sides of zero", "[omni]") {
    const rp::DenseMatrix a = from_rows({{1}, {-1}});
    REQUIRE(rp::is_omnidirectional_hull(a).is_omni);
    REQUIRE(rp::is_omnidirectional_cone(a).is_omni);
    REQUIRE(rp::is_omnidirectional_stiemke(a).is_omni);
}

TEST_CASE("strict multipliers exist without interiority", "[omni]") {
    // x-axis pair: Stiemke multipliers exist, yet direction (0, 1) kills both
    // rows, so the set is not omnidirectional. The dual test is weaker.
    const rp::DenseMatrix a = from_rows({{1, 0}, {-1, 0}});
    REQUIRE(rp::is_omnidirectional_stiemke(a).is_omni);
    REQUIRE_FALSE(rp::is_omnidirectional_cone(a).is_omni);
    REQUIRE_FALSE(rp::is_omnidirectional_hull(a).is_omni);
}

TEST_CASE("origin on the hull boundary is the documented disagreement", "[omni]") {
    // 0 = (1,0)/2 + (-1,0)/2 puts it on the hull's edge: the hull LP accepts,
    // the cone test sees the escape direction (0,-1). Callers resolve this in
    // the cone's favor.
    const rp::DenseMatrix a = from_rows({{1, 0}, {-1, 0}, {0, 1}});
    REQUIRE(rp::is_omnidirectional_hull(a).is_omni);
    const auto cone = rp::is_omnidirectional_cone(a);
    REQUIRE_FALSE(cone.is_omni);
    REQUIRE(cone.witness.has_value());
    const rp::Vector ad = rp::matvec(a, *cone.witness);
    for (double v : ad) REQUIRE(v <= 1e-7);
}

TEST_CASE("zero rows are dropped and never certify anything", "[omni]") {
    rp::DenseMatrix a(2, 1);
    a(0, 0) = 1.0;
    a(1, 0) = 1e-17;  // numerically a zero row next to a unit row
    REQUIRE_FALSE(rp::is_omnidirectional_hull(a).is_omni);
    REQUIRE_FALSE(rp::is_omnidirectional_cone(a).is_omni);

    const rp::DenseMatrix zeros(3, 2);
    REQUIRE_FALSE(rp::is_omnidirectional_hull(zeros).is_omni);
    const auto cone = rp::is_omnidirectional_cone(zeros);
    REQUIRE_FALSE(cone.is_omni);
    REQUIRE(cone.witness.has_value());
}

TEST_CASE("degenerate inputs are rejected", "[omni]") {
    REQUIRE_THROWS_AS(rp::is_omnidirectional_hull(rp::DenseMatrix(2, 0)), rp::InvalidInput);
    rp::DenseMatrix bad(1, 2);
    bad(0, 0) = std::nan("");
    REQUIRE_THROWS_AS(rp::is_omnidirectional_cone(bad), rp::InvalidInput);
}

TEST_CASE("point membership requires every hyperplane to pass through it", "[omni]") {
    const rp::DenseMatrix a = from_rows({{1, 0}, {0, 1}, {-1, -1}});
    const rp::Vector zero_b(3, 0.0);
    REQUIRE(rp::is_omnidirectional_for_point(a, zero_b, {0.0, 0.0}));

    // shifted copy: hyperplanes meet at (1, 0) instead
    const rp::Vector b = {-1.0, 0.0, 1.0};
    REQUIRE(rp::is_omnidirectional_for_point(a, b, {1.0, 0.0}));
    REQUIRE_FALSE(rp::is_omnidirectional_for_point(a, b, {0.0, 0.0}));

    // rows meet at the point but do not surround the origin
    const rp::DenseMatrix half = from_rows({{1, 0}, {0, 1}});
    REQUIRE_FALSE(rp::is_omnidirectional_for_point(half, {0.0, 0.0}, {0.0, 0.0}));
}

TEST_CASE("mirrored full-rank rows are always omnidirectional", "[omni][property]") {
    std::mt19937_64 g(501);
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(g() % 6);
        const rp::DenseMatrix f = random_matrix(g, n, n);
        rp::DenseMatrix neg = f;
        for (double& v : neg.entries) v = -v;
        const rp::DenseMatrix a = stack(f, neg);
        REQUIRE(rp::is_omnidirectional_hull(a).is_omni);
        REQUIRE(rp::is_omnidirectional_cone(a).is_omni);
        REQUIRE(rp::is_omnidirectional_stiemke(a).is_omni);
    }
}

TEST_CASE("row count below dimension blocks omnidirectionality", "[omni][property]") {
    std::mt19937_64 g(502);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(g() % 8);
        const std::size_t m = 1 + static_cast<std::size_t>(g() % n);  // m <= n
        const rp::DenseMatrix a = random_matrix(g, m, n);
        REQUIRE_FALSE(rp::is_omnidirectional_hull(a).is_omni);
        REQUIRE_FALSE(rp::is_omnidirectional_cone(a).is_omni);
    }
}

TEST_CASE("appending rows preserves omnidirectionality", "[omni][property]") {
    std::mt19937_64 g(503);
    int found = 0;
    while (found < 60) {
        const std::size_t n = 1 + static_cast<std::size_t>(g() % 4);
        const rp::DenseMatrix a = random_matrix(g, n + 1 + g() % 4, n);
        if (!rp::is_omnidirectional_cone(a).is_omni) continue;
        ++found;
        const rp::DenseMatrix extra = random_matrix(g, 1 + g() % 3, n);
        const rp::DenseMatrix bigger = stack(a, extra);
        REQUIRE(rp::is_omnidirectional_cone(bigger).is_omni);
        REQUIRE(rp::is_omnidirectional_hull(bigger).is_omni);
    }
}

TEST_CASE("hull and cone verdicts agree on random matrices", "[omni][property]") {
    std::mt19937_64 g(504);
    std::size_t disagreements = 0, omni_count = 0;
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(g() % 8);
        const std::size_t m = 1 + static_cast<std::size_t>(g() % 40);
        const rp::DenseMatrix a = random_matrix(g, m, n);
        const auto hull = rp::is_omnidirectional_hull(a);
        const auto cone = rp::is_omnidirectional_cone(a);
        if (hull.is_omni != cone.is_omni) ++disagreements;
        if (cone.is_omni) ++omni_count;
    }
    REQUIRE(disagreements == 0);  // Gaussian rows are never boundary-degenerate
    REQUIRE(omni_count > 50);
}

TEST_CASE("declared omni sets hit every sampled halfspace", "[omni][oracle]") {
    std::mt19937_64 g(505);
    int found = 0;
    while (found < 5) {
        const std::size_t n = 2 + static_cast<std::size_t>(g() % 3);
        const rp::DenseMatrix a = random_matrix(g, 2 * n + 2, n);
        if (!rp::is_omnidirectional_cone(a).is_omni) continue;
        REQUIRE(rp::is_omnidirectional_hull(a).is_omni);
        ++found;
        check_every_halfspace_hit(a, g, 10000);
    }
}

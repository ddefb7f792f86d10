#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "reghal/basis.hpp"
#include "reghal/rng.hpp"

using namespace reghal;

namespace {

Vec from(std::initializer_list<double> v) {
    Vec out(static_cast<long>(v.size()));
    long i = 0;
    for (const double x : v) out(i++) = x;
    return out;
}

// independent nearest-rank oracle: sorted scan for the first rank i with
// i/n >= k/max_knots, compared by exact cross-multiplication
std::vector<double> knot_oracle(std::vector<double> column, int max_knots) {
    std::sort(column.begin(), column.end());
    const long n = static_cast<long>(column.size());
    std::vector<double> out;
    for (long k = 1; k <= max_knots; ++k) {
        for (long i = 1; i <= n; ++i) {
            if (i * max_knots >= k * n) {
                const double q = column[i - 1];
                if (out.empty() || q > out.back()) out.push_back(q);
                break;
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("select_knots nearest-rank examples") {
    CHECK(select_knots(from({1, 2, 3, 4}), 2) == std::vector<double>{2, 4});
    CHECK(select_knots(from({5, 5, 5, 5}), 3) == std::vector<double>{5});
    CHECK_THROWS_AS(select_knots(Vec(), 2), InvalidInput);
    CHECK_THROWS_AS(select_knots(from({1.0}), 0), InvalidInput);
}

TEST_CASE("select_knots matches the sort-and-index oracle on a uniform sample") {
    Rng rng(42);
    Vec column(400);
    for (long i = 0; i < 400; ++i) column(i) = rng.uniform(0.0, 1.0);
    const auto got = select_knots(column, 20);
    const auto expected =
        knot_oracle(std::vector<double>(column.data(), column.data() + 400), 20);
    CHECK(got.size() == 20);
    CHECK(got == expected);
}

TEST_CASE("enumerate_basis counts") {
    KnotGrid two{{{0.5}, {0.3}}};
    CHECK(enumerate_basis(2, two, 2, 0).size() == 3);

    KnotGrid three{{{0.5}, {0.3}, {0.1}}};
    CHECK(enumerate_basis(3, three, 1, 0).size() == 3);
}

TEST_CASE("enumerate_basis matches the combinatorial oracle") {
    KnotGrid grid{{{0.1, 0.9}, {0.2, 0.8}, {0.3, 0.7}}};
    const auto basis = enumerate_basis(3, grid, 2, 1);
    CHECK(basis.size() == 6 + 3 * 4);

    // exhaustive enumeration, order-independent comparison
    std::vector<BasisFunction> expected;
    for (int v = 0; v < 3; ++v)
        for (const double k : grid.knots[v]) expected.push_back({{v}, {k}, 1});
    for (int v1 = 0; v1 < 3; ++v1)
        for (int v2 = v1 + 1; v2 < 3; ++v2)
            for (const double k1 : grid.knots[v1])
                for (const double k2 : grid.knots[v2])
                    expected.push_back({{v1, v2}, {k1, k2}, 1});
    std::sort(expected.begin(), expected.end());
    REQUIRE(expected.size() == basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) CHECK(basis[j] == expected[j]);
}

TEST_CASE("enumerate_basis ordering is deterministic") {
    KnotGrid grid{{{0.1, 0.9}, {0.2, 0.8}}};
    const auto a = enumerate_basis(2, grid, 2, 0);
    const auto b = enumerate_basis(2, grid, 2, 0);
    REQUIRE(a.size() == b.size());
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
    CHECK(std::is_sorted(a.begin(), a.end()));
}

TEST_CASE("evaluate_design spec examples") {
    Mat X(1, 2);
    X << 0.7, 3.0;

    CHECK(evaluate_design({{{0}, {0.5}, 0}}, X).values(0, 0) == 1.0);
    CHECK(evaluate_design({{{0}, {0.5}, 1}}, X).values(0, 0) == doctest::Approx(0.2));

    Mat X2(1, 2);
    X2 << 2.0, 3.0;
    CHECK(evaluate_design({{{0, 1}, {0.0, 0.0}, 1}}, X2).values(0, 0) == doctest::Approx(6.0));

    CHECK_THROWS_AS(evaluate_design({{{5}, {0.0}, 0}}, X), InvalidInput);
}

TEST_CASE("single-variable terms are monotone in each coordinate") {
    Rng rng(7);
    KnotGrid grid{{{-0.5, 0.0, 0.5}, {-0.2, 0.4}}};
    const auto basis = enumerate_basis(2, grid, 1, 1);
    for (int trial = 0; trial < 200; ++trial) {
        Mat X(2, 2);
        X(0, 0) = rng.uniform(-1, 1);
        X(0, 1) = rng.uniform(-1, 1);
        X(1, 0) = X(0, 0) + rng.uniform(0, 1);
        X(1, 1) = X(0, 1) + rng.uniform(0, 1);
        const Mat vals = evaluate_design(basis, X).values;
        for (long j = 0; j < vals.cols(); ++j) CHECK(vals(1, j) >= vals(0, j));
    }
}

TEST_CASE("re-evaluating the design from column_basis is bit-exact") {
    Rng rng(11);
    Mat X(50, 3);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-2, 2);
    const KnotGrid grid = make_knot_grid(X, 5);
    const auto basis = enumerate_basis(3, grid, 2, 1);
    const DesignMatrix d1 = evaluate_design(basis, X);
    const DesignMatrix d2 = evaluate_design(d1.column_basis, X);
    CHECK((d1.values.array() == d2.values.array()).all());
    // order-0 entries in {0,1}; order-1 entries nonnegative
    const DesignMatrix d0 = evaluate_design(enumerate_basis(3, grid, 2, 0), X);
    CHECK(((d0.values.array() == 0.0) || (d0.values.array() == 1.0)).all());
    CHECK((d1.values.array() >= 0.0).all());
}

TEST_CASE("treatment basis includes the indicator main effect and interactions") {
    KnotGrid grid{{{0.5}, {0.25}}};
    const auto basis = enumerate_treatment_basis(grid, 1);
    // 2 mains + 1 pairwise + 1 treatment + 2 treatment interactions
    CHECK(basis.size() == 6);
    int treatment_mains = 0, treatment_inters = 0;
    for (const auto& b : basis) {
        if (b.vars == std::vector<int>{2}) {
            ++treatment_mains;
            CHECK(b.order == 0);
            CHECK(b.knots[0] == 0.0);
        }
        if (b.vars.size() == 2 && b.vars[1] == 2) ++treatment_inters;
    }
    CHECK(treatment_mains == 1);
    CHECK(treatment_inters == 2);

    // on binary treatment data the interaction's A part acts as 1{A > 0}
    Mat X(2, 3);
    X << 1.0, 0.5, 1.0,
         1.0, 0.5, 0.0;
    const Mat vals = evaluate_design(basis, X).values;
    for (std::size_t j = 0; j < basis.size(); ++j) {
        if (basis[j].vars.size() == 2 && basis[j].vars[1] == 2) {
            const double expected = basis[j].vars[0] == 0 ? 0.5 : 0.25;  // max(w - knot, 0) * 1
            CHECK(vals(0, j) == doctest::Approx(expected));
            CHECK(vals(1, j) == 0.0);
        }
    }
}

#include "reghal/basis.hpp"

#include <algorithm>

namespace reghal {

std::vector<double> select_knots(const Vec& column, int max_knots) {
    const long n = column.size();
    if (n == 0) throw InvalidInput("select_knots: empty column");
    if (max_knots < 1) throw InvalidInput("select_knots: max_knots must be >= 1");

    std::vector<double> sorted(column.data(), column.data() + n);
    std::sort(sorted.begin(), sorted.end());

    std::vector<double> knots;
    knots.reserve(max_knots);
    for (long k = 1; k <= max_knots; ++k) {
        // lower nearest-rank quantile at level k/max_knots
        const long idx = (k * n + max_knots - 1) / max_knots;  // ceil(k*n/max), 1-based
        const double q = sorted[idx - 1];
        if (knots.empty() || q > knots.back()) knots.push_back(q);
    }
    return knots;
}

KnotGrid make_knot_grid(const Mat& X, int max_knots) {
    KnotGrid grid;
    grid.knots.resize(X.cols());
    for (int v = 0; v < X.cols(); ++v) grid.knots[v] = select_knots(X.col(v), max_knots);
    return grid;
}

namespace {

void sort_canonical(std::vector<BasisFunction>& basis) {
    std::sort(basis.begin(), basis.end());
}

}  // namespace

std::vector<BasisFunction> enumerate_basis(int n_vars, const KnotGrid& grid,
                                           int max_interaction, int order) {
    if (max_interaction != 1 && max_interaction != 2)
        throw InvalidInput("enumerate_basis: max_interaction must be 1 or 2");

    std::vector<BasisFunction> basis;
    for (int v = 0; v < n_vars; ++v)
        for (const double k : grid.knots[v]) basis.push_back({{v}, {k}, order});

    if (max_interaction == 2) {
        for (int v1 = 0; v1 < n_vars; ++v1)
            for (int v2 = v1 + 1; v2 < n_vars; ++v2)
                for (const double k1 : grid.knots[v1])
                    for (const double k2 : grid.knots[v2])
                        basis.push_back({{v1, v2}, {k1, k2}, order});
    }
    sort_canonical(basis);
    return basis;
}

std::vector<BasisFunction> enumerate_treatment_basis(const KnotGrid& grid, int order) {
    const int d = grid.n_vars();
    std::vector<BasisFunction> basis = enumerate_basis(d, grid, 2, order);
    // Binary treatment at column d: one indicator main effect plus
    // interactions with every covariate main effect. On {0,1} data the
    // order-1 form max(A - 0, 0) coincides with 1{A > 0}.
    basis.push_back({{d}, {0.0}, 0});
    for (int v = 0; v < d; ++v)
        for (const double k : grid.knots[v]) basis.push_back({{v, d}, {k, 0.0}, order});
    sort_canonical(basis);
    return basis;
}

DesignMatrix evaluate_design(const std::vector<BasisFunction>& basis, const Mat& X) {
    const long n = X.rows();
    const int d = static_cast<int>(X.cols());
    for (const auto& b : basis) {
        if (b.vars.empty() || b.vars.size() > 2)
            throw InvalidInput("evaluate_design: basis must have 1 or 2 variables");
        for (const int v : b.vars)
            if (v < 0 || v >= d) throw InvalidInput("evaluate_design: variable index out of bounds");
    }

    DesignMatrix design;
    design.column_basis = basis;
    design.values.resize(n, static_cast<long>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) {
        const BasisFunction& b = basis[j];
        if (b.vars.size() == 1) {
            const auto col = X.col(b.vars[0]);
            const double knot = b.knots[0];
            for (long i = 0; i < n; ++i) {
                const double z = col(i);
                design.values(i, j) =
                    b.order == 0 ? (z > knot ? 1.0 : 0.0) : (z > knot ? z - knot : 0.0);
            }
        } else {
            const auto c1 = X.col(b.vars[0]);
            const auto c2 = X.col(b.vars[1]);
            const double k1 = b.knots[0], k2 = b.knots[1];
            for (long i = 0; i < n; ++i) {
                double v;
                if (b.order == 0) {
                    v = (c1(i) > k1 && c2(i) > k2) ? 1.0 : 0.0;
                } else {
                    const double d1 = c1(i) - k1, d2 = c2(i) - k2;
                    v = (d1 > 0.0 && d2 > 0.0) ? d1 * d2 : 0.0;
                }
                design.values(i, j) = v;
            }
        }
    }
    return design;
}

Vec evaluate_row(const std::vector<BasisFunction>& basis, const Vec& x) {
    Vec out(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) out(j) = basis[j].eval(x.data());
    return out;
}

}  // namespace reghal

#pragma once

#include <vector>

#include "reghal/types.hpp"

namespace reghal {

/// One HAL basis term: a product over `vars` of either indicators
/// 1{x_v > knot_v} (order 0) or ReLU splines max(x_v - knot_v, 0) (order 1).
struct BasisFunction {
    std::vector<int> vars;      // sorted, size 1 or 2, no duplicates
    std::vector<double> knots;  // one knot per variable
    int order = 0;              // 0 = indicator, 1 = first-order spline

    bool operator==(const BasisFunction& o) const {
        return order == o.order && vars == o.vars && knots == o.knots;
    }
    bool operator<(const BasisFunction& o) const {
        if (vars != o.vars) return vars < o.vars;
        if (knots != o.knots) return knots < o.knots;
        return order < o.order;
    }

    double eval(const double* x) const {
        double v = 1.0;
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const double z = x[vars[k]];
            if (order == 0) {
                if (!(z > knots[k])) return 0.0;
            } else {
                const double d = z - knots[k];
                if (!(d > 0.0)) return 0.0;
                v *= d;
            }
        }
        return v;
    }
};

/// Per-variable sorted unique knot values, all taken from observed data.
struct KnotGrid {
    std::vector<std::vector<double>> knots;  // knots[v] strictly increasing
    int n_vars() const { return static_cast<int>(knots.size()); }
};

struct DesignMatrix {
    Mat values;                              // n x p
    std::vector<BasisFunction> column_basis; // length p
    int cols() const { return static_cast<int>(column_basis.size()); }
    long rows() const { return values.rows(); }
};

/// Empirical quantiles of `column` at levels k/max_knots (k = 1..max_knots)
/// under the lower nearest-rank convention, deduplicated.
std::vector<double> select_knots(const Vec& column, int max_knots);

/// Knot grid over the columns of X, max_knots quantile knots per variable.
KnotGrid make_knot_grid(const Mat& X, int max_knots);

/// All main-effect terms (one per variable x knot) plus, when
/// max_interaction = 2, all pairwise products of main-effect terms across
/// distinct variables. Canonical ordering: lexicographic by vars then knots.
std::vector<BasisFunction> enumerate_basis(int n_vars, const KnotGrid& grid,
                                           int max_interaction, int order);

/// Basis over (W, A) for treatment-response problems: covariate terms from
/// `enumerate_basis` over the grid plus one indicator 1{A > 0} for the binary
/// treatment at column index n_vars, and its interactions with every
/// covariate main effect. Same canonical ordering.
std::vector<BasisFunction> enumerate_treatment_basis(const KnotGrid& grid, int order);

DesignMatrix evaluate_design(const std::vector<BasisFunction>& basis, const Mat& X);

/// Single-row evaluation used by model prediction.
Vec evaluate_row(const std::vector<BasisFunction>& basis, const Vec& x);

}  // namespace reghal

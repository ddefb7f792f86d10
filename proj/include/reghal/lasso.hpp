#pragma once

#include <cstdint>
#include <vector>

#include "reghal/types.hpp"

namespace reghal {

struct LassoFit {
    double intercept = 0.0;
    Vec beta;            // original scale
    bool converged = true;
    int sweeps = 0;
};

/// A solved penalty path. Lambdas are strictly decreasing; every fit
/// satisfies the KKT conditions at its lambda (standardized scale).
struct LassoPath {
    Vec lambdas;
    std::vector<LassoFit> fits;
    std::vector<std::vector<int>> active_sets;  // nonzero coefficient indices
    Vec cv_error;                               // filled by cv_select
    int cv_index = -1;

    int size() const { return static_cast<int>(lambdas.size()); }
};

struct SolveOptions {
    double tol = 1e-9;           // max coefficient change, standardized scale
    int max_sweeps = 10000;
    std::vector<double>* objective_trace = nullptr;  // per-sweep, tests only
};

/// Coordinate-descent solve of
///   (1/n) * NLL(intercept, beta) + lambda * ||beta||_1
/// with an unpenalized intercept. Columns are centered and scaled to unit
/// sample SD internally (constant columns get coefficient 0); returned
/// coefficients are on the original scale.
LassoFit solve_lasso(const Mat& X, const Vec& y, const Family& family, double lambda,
                     const LassoFit* warm_start = nullptr, const SolveOptions& opts = {});

/// Geometric sequence from lambda_max (smallest lambda with an all-zero
/// solution, from the null-model gradient) down to ratio * lambda_max.
/// Degenerates to {0} when lambda_max is 0 (constant response).
Vec make_lambda_path(const Mat& X, const Vec& y, const Family& family,
                     int n_lambda, double ratio);

/// Fit every lambda in `lambdas` with warm starts.
LassoPath solve_path(const Mat& X, const Vec& y, const Family& family, const Vec& lambdas);

/// K-fold cross-validation over the path. Fold assignment is a seeded
/// permutation; the selected index minimizes pooled validation deviance.
LassoPath cv_select(const Mat& X, const Vec& y, const Family& family, const Vec& lambdas,
                    int folds, std::uint64_t seed);

/// Family deviance of predictions; binomial probabilities are clipped to
/// [1e-10, 1 - 1e-10]. Used for CV loss and tests.
double deviance(const Vec& y, const Vec& linear_pred, const Family& family);

/// Gradient of the smooth part (1/n * NLL) with respect to the standardized
/// coefficients at `fit`; used by KKT checks.
Vec standardized_gradient(const Mat& X, const Vec& y, const Family& family, const LassoFit& fit);

/// Max KKT violation of `fit` at `lambda` (0 when conditions hold exactly).
double kkt_violation(const Mat& X, const Vec& y, const Family& family,
                     const LassoFit& fit, double lambda);

}  // namespace reghal

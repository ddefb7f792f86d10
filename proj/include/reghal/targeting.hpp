#pragma once

#include <functional>

#include "reghal/eic.hpp"

namespace reghal {

/// Given the current coefficient vector, return one EicApprox per target
/// coordinate (scores recomputed at that vector).
using EicProvider = std::function<std::vector<EicApprox>(const Vec&)>;

struct TargetingResult {
    Vec beta;                 // final coefficient vector (layout is the caller's)
    double intercept = 0.0;   // refit intercept where applicable (relaxed fits)
    int iterations = 0;
    bool converged = false;
    Vec final_eic_mean;       // one entry per target
    std::vector<double> trace;            // |P_n D*| (1d) or ||d||_2/sqrt(|S|) (multi)
    std::vector<double> threshold_trace;  // stopping threshold per iteration
};

struct TargetingOptions {
    double step = 1e-4;
    int max_iter = 5000;
    bool keep_trace = true;
};

/// One-dimensional update loop: beta <- beta + step * sign(P_n D*) * alpha,
/// scores recomputed every iteration, until |P_n D*| < se / (sqrt(n) log n).
TargetingResult target_1d(const Vec& beta0, const EicProvider& provider,
                          const TargetingOptions& opts);

/// Universal least-favorable-path update over a grid of targets:
/// d(s) = P_n D*_s, update = sum_s d(s)/||d||_2 * alpha_s, stop when
/// ||d||_2 / sqrt(|S|) < median_s se(D*_s) / (sqrt(n) log n).
TargetingResult target_multi(const Vec& beta0, const EicProvider& provider,
                             const TargetingOptions& opts);

/// Unpenalized maximum-likelihood refit on a fixed design (IRLS for
/// binomial/poisson); singular systems take the minimum-norm step.
/// Non-convergence after max_iter is flagged, not thrown.
TargetingResult relaxed_fit(const Mat& X, const Vec& y, const Family& family,
                            int max_iter = 100);

struct DirectAteResult {
    Vec beta;
    Vec alpha;       // penalized expansion of the clever covariate
    double epsilon = 0.0;
    Vec fluct_covariate;  // alpha . phi(x_i), the constructed covariate
};

/// Single-fluctuation variant: expand the clever covariate H in the basis
/// columns (lasso, unpenalized intercept discarded), then one offset
/// regression of Y - Q on the constructed covariate gives the step size.
DirectAteResult target_direct_ate(const Vec& beta0, const Mat& basis_values, const Vec& H,
                                  const Vec& residual0, double penalty);

}  // namespace reghal

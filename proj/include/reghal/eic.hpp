#pragma once

#include <cstdint>

#include "reghal/working_model.hpp"

namespace reghal {

/// n x p matrix of per-observation derivatives of the log likelihood (or
/// negative loss) with respect to the model coefficients, evaluated at
/// `beta_at`. For hazard models column 0 is the intercept score.
struct ScoreMatrix {
    Mat values;
    Vec beta_at;
    long rows() const { return values.rows(); }
    long cols() const { return values.cols(); }
};

enum class EicLabel { projection_weak, projection_cv, delta };

/// One approximated influence-curve direction: values[i] = alpha . S_i.
struct EicApprox {
    Vec alpha;
    Vec values;
    EicLabel label = EicLabel::projection_weak;
    int target_id = 0;
    double target_time = 0.0;

    double mean() const { return values.mean(); }
    /// Sample SD of the centered values.
    double se() const {
        const long n = values.size();
        if (n < 2) return 0.0;
        const double m = values.mean();
        return std::sqrt((values.array() - m).square().sum() / double(n - 1));
    }
};

/// Gaussian squared-error loss scores: S_ij = 2 (Y_i - Q(x_i)) phi_j(x_i).
ScoreMatrix score_matrix_gaussian(const WorkingModel& model, const Mat& design_values,
                                  const Vec& y);

/// L1-penalized least-squares projection of D_bar on the score columns with
/// an unpenalized intercept (fit, then discarded from alpha). cv mode picks
/// the penalty by 10-fold cross-validation.
enum class ProjectionMode { fixed, cv };
EicApprox projection_eic(const ScoreMatrix& scores, const Vec& D_bar, double penalty,
                         ProjectionMode mode = ProjectionMode::fixed, std::uint64_t seed = 0,
                         const Vec* warm_alpha = nullptr);

/// Delta-method direction: alpha solves (S'S/n + eta I) alpha = dpsi_dbeta
/// through a symmetric positive-definite factorization.
EicApprox delta_eic(const ScoreMatrix& scores, const Vec& dpsi_dbeta, double eta);

/// Classical ATE efficient influence curve at (Q, g, psi):
///   H(A,W) (Y - Q(A,W)) + Q(1,W) - Q(0,W) - psi,  H = A/g - (1-A)/(1-g).
Vec nonparametric_eic_ate(const Vec& H, const Vec& residual, const Vec& plugin_contrast,
                          double psi);

struct WaldCi {
    double lower = 0.0, upper = 0.0, se = 0.0;
};

/// Wald interval psi +- z * se with se^2 = mean((eic - mean(eic))^2) / n.
/// EIC values are centered empirically before the variance is formed.
WaldCi wald_ci(double psi, const Vec& eic_values, double level = 0.95);

}  // namespace reghal

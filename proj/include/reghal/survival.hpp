#pragma once

#include "reghal/targeting.hpp"

namespace reghal {

/// Right-censored observations: follow-up time and event indicator.
struct SurvData {
    Vec times;            // > 0
    Eigen::VectorXi events;  // 1 = failure observed, 0 = censored
    long n() const { return times.size(); }
};

/// Working model for a piecewise-constant intensity
///   lambda(t) = exp(beta0 + sum_j beta_j 1{t > q_j}).
/// Coefficient layout for targeting is theta = (beta0, beta...).
struct HazardModel {
    WorkingModel wm;  // family poisson, basis = order-0 step functions of time

    const std::vector<double> knots() const {
        std::vector<double> q;
        q.reserve(wm.basis.size());
        for (const auto& b : wm.basis) q.push_back(b.knots[0]);
        return q;
    }
    Vec theta() const {
        Vec t(wm.beta.size() + 1);
        t(0) = wm.intercept;
        if (wm.beta.size() > 0) t.tail(wm.beta.size()) = wm.beta;
        return t;
    }
    void set_theta(const Vec& t) {
        wm.intercept = t(0);
        wm.beta = t.tail(t.size() - 1);
    }
};

/// Exact integrator for a step hazard: cumulative hazard and survival.
class PiecewiseHazard {
public:
    PiecewiseHazard(const std::vector<double>& knots, const Vec& theta);
    explicit PiecewiseHazard(const HazardModel& model)
        : PiecewiseHazard(model.knots(), model.theta()) {}

    double cumulative(double t) const;
    double survival(double t) const { return std::exp(-cumulative(t)); }
    double rate_at(double t) const;
    int segment_of(double t) const;
    const Vec& segment_rates() const { return rates_; }
    const std::vector<double>& knots() const { return knots_; }

private:
    std::vector<double> knots_;
    Vec rates_;        // length knots + 1
    Vec cum_at_knot_;  // cumulative hazard at each knot
};

/// Repeated-data expansion of a step-hazard likelihood: one row per
/// (subject, at-risk inter-knot interval), exposure = interval length,
/// outcome = event indicator in the interval.
struct RepeatedData {
    Mat X;             // rows x p, staircase indicator design
    Vec y;
    Vec exposure;
    std::vector<int> subject;  // row -> subject index
};
RepeatedData build_repeated_data(const SurvData& data, const std::vector<double>& knots);

/// Poisson intensity HAL fit. Knots are quantiles of the observed times with
/// the given event flag (failures for the failure hazard, censorings for the
/// censoring hazard).
struct IntensityFit {
    HazardModel model;
    LassoPath path;
    std::vector<double> all_knots;
    std::vector<BasisFunction> all_basis;
};
IntensityFit fit_intensity_hal(const SurvData& data, int n_knots, bool censoring,
                               std::uint64_t seed, int n_lambda = 100, double ratio = 1e-4,
                               int cv_folds = 10);

double survival_from_hazard(const HazardModel& model, double t);

/// Hazard-loss scores, exact over the piecewise-constant segments:
/// S_i = delta_i X(t_i) - integral_0^{t_i} exp(X(u)'theta) X(u) du,
/// with X(u) = (1, 1{u > q_1}, ..., 1{u > q_p}). Column 0 is the intercept.
ScoreMatrix score_matrix_hazard(const HazardModel& model, const Vec& times,
                                const Eigen::VectorXi& events);

/// Inverse-censoring-weighted initial gradient on the grid:
/// g_i(s) = 1{delta_i = 1, t_i > s} / P(C > t_i). Throws on positivity
/// failure (censoring survival below 1e-12).
Mat initial_gradient(const SurvData& data, const HazardModel& censor_model,
                     const std::vector<double>& grid);

/// Closed-form dS(s)/dtheta mapped through the ridge-regularized inverse
/// empirical Fisher information.
Vec delta_gamma_survival(const HazardModel& model, const ScoreMatrix& scores, double s,
                         double eta);

/// Level-quantile of max_j |Z_j| over Monte-Carlo draws from N(0, R) where R
/// is the empirical correlation of the (centered) EIC columns. Zero-variance
/// columns are dropped from the max.
double simultaneous_quantile(const Mat& centered_eic, double level, int draws,
                             std::uint64_t seed);

enum class SurvTargeting { relaxed, projection, delta };
const char* targeting_name(SurvTargeting t);

struct SurvConfig {
    SurvTargeting targeting = SurvTargeting::projection;
    WorkingModelRule rule = WorkingModelRule::cv;
    int grid_size = 20;
    int failure_knots = 100;
    int censor_knots = 50;
    double proj_lambda = 1e-5;
    double ridge_eta = 1e-6;
    double step = 1e-3;
    int max_iter = 5000;
    int band_draws = 10000;
    std::uint64_t seed = 1;
};

struct SurvPointCi {
    WaldCi proj, proj_cv, delta;
};

struct SurvCurveResult {
    std::vector<double> grid;
    Vec estimates;                 // S(s), in (0,1], non-increasing
    std::vector<SurvPointCi> cis;  // pointwise per grid point
    Vec band_lower, band_upper;
    double band_z = 0.0;
    std::string targeting;
    int iterations = 0;
    bool converged = true;
};

/// Shared hazard fits for running several targeting variants on one dataset.
class SurvivalPipeline {
public:
    SurvivalPipeline(const SurvData& data, const SurvConfig& config);
    SurvCurveResult run(SurvTargeting targeting) const;
    const HazardModel& failure_model() const { return failure_model_; }
    const HazardModel& censor_model() const { return censor_.model; }
    const std::vector<double>& grid() const { return grid_; }

private:
    const SurvData& data_;
    SurvConfig config_;
    IntensityFit failure_;
    IntensityFit censor_;
    HazardModel failure_model_;  // per rule, zero-padded CV coefficients
    std::vector<double> grid_;
    Mat gradient_;               // n x |grid| initial gradient
};

SurvCurveResult estimate_survival_curve(const SurvData& data, const SurvConfig& config);

/// Default grid: `size` equally spaced quantiles of the observed event times,
/// strictly inside (min, max), deduplicated.
std::vector<double> default_time_grid(const SurvData& data, int size);

}  // namespace reghal

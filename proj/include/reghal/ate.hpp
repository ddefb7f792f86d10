#pragma once

#include <map>
#include <optional>
#include <string>

#include "reghal/targeting.hpp"

namespace reghal {

/// Point-treatment dataset: W (n x d), binary A, real Y.
struct AteData {
    Mat W;
    Vec A;
    Vec Y;
    long n() const { return Y.size(); }
    int d() const { return static_cast<int>(W.cols()); }
};

enum class AteTargeting { relaxed, projection, delta, direct, standard };

const char* targeting_name(AteTargeting t);

struct AteConfig {
    AteTargeting targeting = AteTargeting::projection;
    WorkingModelRule rule = WorkingModelRule::cv;
    double proj_lambda = 1e-5;
    double ridge_eta = 1e-6;
    double step = 1e-4;
    int max_iter = 5000;
    int n_lambda = 100;
    double lambda_ratio = 1e-4;
    int cv_folds = 10;
    int basis_order = 1;
    int max_knots = 0;  // 0 -> max(n/20, 1)
    double trunc_lo = 0.01, trunc_hi = 0.99;  // standard TMLE only
    std::uint64_t seed = 1;
};

enum class CiVariant { np, proj, proj_cv, delta };

struct AteResult {
    double psi = 0.0;
    std::map<CiVariant, WaldCi> cis;
    std::string targeting;
    std::string working_model_rule;
    int iterations = 0;
    bool converged = true;
    int model_size = 0;
    double lambda_cv = 0.0;
};

/// Empirical mean of Q(1, W_i) - Q(0, W_i) under the working model.
double psi_plugin(const WorkingModel& model, const Mat& W);

/// Component j = empirical mean of phi_j(1, W) - phi_j(0, W); the gradient of
/// psi_plugin in the coefficients.
Vec ate_partials(const WorkingModel& model, const Mat& W);

/// H_i = A_i / g_i - (1 - A_i) / (1 - g_i); g must lie strictly in (0,1).
Vec clever_covariate(const Vec& g_hat, const Vec& A);

/// Shared initial stage (basis, outcome path, working model, propensity fit)
/// so several targeting variants can run on one dataset without refitting.
/// The ladder estimators target inside other working models through
/// `make_context` / `target_in_context`.
class AtePipeline {
public:
    AtePipeline(const AteData& data, const AteConfig& config);

    /// A working model with its design evaluated at the observed treatment
    /// and under both arms. Model coefficients are the targeting start.
    struct ModelContext {
        WorkingModel model;
        Mat design, design_a1, design_a0;
    };
    struct RunOutput {
        WorkingModel model;
        int iterations = 0;
        bool converged = true;
    };

    ModelContext make_context(const WorkingModel& m) const;
    RunOutput target_in_context(const ModelContext& ctx, AteTargeting targeting) const;
    AteResult result_in_context(const ModelContext& ctx, const RunOutput& run,
                                const std::string& label) const;

    AteResult run(AteTargeting targeting) const;
    AteResult run_standard_tmle() const;

    const WorkingModel& working_model() const { return context_.model; }
    const Vec& propensity() const { return g_hat_; }
    const Vec& clever() const { return H_; }
    const LassoPath& outcome_path() const { return path_; }
    const std::vector<BasisFunction>& full_basis() const { return full_basis_; }
    const AteConfig& config() const { return config_; }
    const AteData& data() const { return data_; }

private:
    const AteData& data_;
    AteConfig config_;
    std::vector<BasisFunction> full_basis_;
    LassoPath path_;
    ModelContext context_;  // per config_.rule, coefficients zero-padded CV
    Vec g_hat_;             // untruncated fitted propensity
    Vec H_;                 // clever covariate at fitted g
};

AteResult estimate_ate(const AteData& data, const AteConfig& config);
AteResult standard_tmle(const AteData& data, const AteConfig& config);

}  // namespace reghal

#include "reghal/ate.hpp"

#include <algorithm>
#include <cmath>

#include "reghal/rng.hpp"

namespace reghal {

const char* targeting_name(AteTargeting t) {
    switch (t) {
        case AteTargeting::relaxed: return "relaxed";
        case AteTargeting::projection: return "projection";
        case AteTargeting::delta: return "delta";
        case AteTargeting::direct: return "direct";
        case AteTargeting::standard: return "standard";
    }
    return "?";
}

double psi_plugin(const WorkingModel& model, const Mat& W) {
    const long n = W.rows();
    const int d = static_cast<int>(W.cols());
    Mat X(n, d + 1);
    X.leftCols(d) = W;
    X.col(d).setOnes();
    const Mat phi1 = evaluate_design(model.basis, X).values;
    X.col(d).setZero();
    const Mat phi0 = evaluate_design(model.basis, X).values;
    if (model.size() == 0) return 0.0;
    return ((phi1 - phi0) * model.beta).mean();
}

Vec ate_partials(const WorkingModel& model, const Mat& W) {
    const long n = W.rows();
    const int d = static_cast<int>(W.cols());
    Mat X(n, d + 1);
    X.leftCols(d) = W;
    X.col(d).setOnes();
    const Mat phi1 = evaluate_design(model.basis, X).values;
    X.col(d).setZero();
    const Mat phi0 = evaluate_design(model.basis, X).values;
    return (phi1 - phi0).colwise().mean();
}

Vec clever_covariate(const Vec& g_hat, const Vec& A) {
    if (g_hat.size() != A.size()) throw InvalidInput("clever_covariate: length mismatch");
    if ((g_hat.array() <= 0.0).any() || (g_hat.array() >= 1.0).any())
        throw InvalidInput("clever_covariate: propensity must lie strictly in (0,1)");
    return (A.array() / g_hat.array() - (1.0 - A.array()) / (1.0 - g_hat.array())).matrix();
}

namespace {

Mat bind_design(const AteData& data) {
    Mat X(data.n(), data.d() + 1);
    X.leftCols(data.d()) = data.W;
    X.col(data.d()) = data.A;
    return X;
}

int default_knots(long n, int configured) {
    if (configured > 0) return configured;
    return static_cast<int>(std::max<long>(n / 20, 1));
}

}  // namespace

AtePipeline::AtePipeline(const AteData& data, const AteConfig& config)
    : data_(data), config_(config) {
    const long n = data.n();
    if (n < 2) throw EstimationError("estimate_ate: need at least 2 observations");
    const double amin = data.A.minCoeff(), amax = data.A.maxCoeff();
    if (amin == amax) throw EstimationError("estimate_ate: degenerate treatment arm");

    const int knots = default_knots(n, config.max_knots);
    const KnotGrid grid = make_knot_grid(data.W, knots);

    // outcome fit on (W, A)
    full_basis_ = enumerate_treatment_basis(grid, config.basis_order);
    {
        const Mat design = evaluate_design(full_basis_, bind_design(data)).values;
        const Vec lambdas = make_lambda_path(design, data.Y, Family::gaussian(),
                                             config.n_lambda, config.lambda_ratio);
        path_ = cv_select(design, data.Y, Family::gaussian(), lambdas, config.cv_folds,
                          derive_seed(config.seed, "cv-outcome", 0));
    }
    WorkingModel model;
    if (config.rule == WorkingModelRule::cv) {
        model = extract_working_model(path_, full_basis_, path_.cv_index, Family::gaussian());
    } else {
        const int idx = undersmooth_select(path_, UndersmoothRule::offset_10);
        model = extract_undersmoothed_model(path_, full_basis_, idx, Family::gaussian());
        model.meta.selection_rule = "offset-10";
    }
    context_ = make_context(model);

    // propensity fit on W only
    {
        const std::vector<BasisFunction> g_basis = enumerate_basis(data.d(), grid, 2,
                                                                   config.basis_order);
        const Mat g_design = evaluate_design(g_basis, data.W).values;
        const Vec g_lambdas = make_lambda_path(g_design, data.A, Family::binomial(),
                                               config.n_lambda, config.lambda_ratio);
        const LassoPath g_path = cv_select(g_design, data.A, Family::binomial(), g_lambdas,
                                           config.cv_folds,
                                           derive_seed(config.seed, "cv-propensity", 0));
        const LassoFit& g_fit = g_path.fits[g_path.cv_index];
        Vec lp = Vec::Constant(n, g_fit.intercept);
        if (g_fit.beta.size() > 0) lp.noalias() += g_design * g_fit.beta;
        g_hat_ = lp.unaryExpr([](double e) { return expit(std::clamp(e, -30.0, 30.0)); });
        // fitted probabilities can saturate; keep them strictly inside (0,1)
        g_hat_ = g_hat_.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
        H_ = clever_covariate(g_hat_, data.A);
    }
}

AtePipeline::ModelContext AtePipeline::make_context(const WorkingModel& m) const {
    ModelContext ctx;
    ctx.model = m;
    Mat X = bind_design(data_);
    ctx.design = evaluate_design(m.basis, X).values;
    X.col(data_.d()).setOnes();
    ctx.design_a1 = evaluate_design(m.basis, X).values;
    X.col(data_.d()).setZero();
    ctx.design_a0 = evaluate_design(m.basis, X).values;
    return ctx;
}

AtePipeline::RunOutput AtePipeline::target_in_context(const ModelContext& ctx,
                                                      AteTargeting targeting) const {
    RunOutput out;
    out.model = ctx.model;

    switch (targeting) {
        case AteTargeting::relaxed: {
            const TargetingResult fit = relaxed_fit(ctx.design, data_.Y, Family::gaussian());
            out.model.intercept = fit.intercept;
            out.model.beta = fit.beta;
            out.iterations = fit.iterations;
            out.converged = fit.converged;
            break;
        }
        case AteTargeting::projection: {
            const Vec D_bar = (H_.array() * data_.Y.array()).matrix();
            Vec warm;
            WorkingModel scratch = ctx.model;
            const EicProvider provider = [&](const Vec& beta) {
                scratch.beta = beta;
                const ScoreMatrix scores = score_matrix_gaussian(scratch, ctx.design, data_.Y);
                EicApprox eic = projection_eic(scores, D_bar, config_.proj_lambda,
                                               ProjectionMode::fixed, 0,
                                               warm.size() ? &warm : nullptr);
                warm = eic.alpha;
                return std::vector<EicApprox>{std::move(eic)};
            };
            TargetingOptions opts;
            opts.step = config_.step;
            opts.max_iter = config_.max_iter;
            const TargetingResult fit = target_1d(ctx.model.beta, provider, opts);
            out.model.beta = fit.beta;
            out.iterations = fit.iterations;
            out.converged = fit.converged;
            break;
        }
        case AteTargeting::delta: {
            const Vec dpsi = ctx.model.size() > 0
                                 ? Vec((ctx.design_a1 - ctx.design_a0).colwise().mean())
                                 : Vec();
            WorkingModel scratch = ctx.model;
            const EicProvider provider = [&](const Vec& beta) {
                scratch.beta = beta;
                const ScoreMatrix scores = score_matrix_gaussian(scratch, ctx.design, data_.Y);
                return std::vector<EicApprox>{delta_eic(scores, dpsi, config_.ridge_eta)};
            };
            TargetingOptions opts;
            opts.step = config_.step;
            opts.max_iter = config_.max_iter;
            const TargetingResult fit = target_1d(ctx.model.beta, provider, opts);
            out.model.beta = fit.beta;
            out.iterations = fit.iterations;
            out.converged = fit.converged;
            break;
        }
        case AteTargeting::direct: {
            const Vec residual0 = data_.Y - ctx.model.linear(ctx.design);
            const DirectAteResult fit = target_direct_ate(ctx.model.beta, ctx.design, H_,
                                                          residual0, config_.proj_lambda);
            out.model.beta = fit.beta;
            out.iterations = 1;
            break;
        }
        case AteTargeting::standard:
            throw InvalidInput("target_in_context: use run_standard_tmle");
    }
    return out;
}

AteResult AtePipeline::result_in_context(const ModelContext& ctx, const RunOutput& run,
                                         const std::string& label) const {
    const WorkingModel& updated = run.model;
    AteResult res;
    res.targeting = label;
    res.working_model_rule = config_.rule == WorkingModelRule::cv ? "cv" : "undersmoothed";
    res.iterations = run.iterations;
    res.converged = run.converged;
    res.model_size = updated.size();
    res.lambda_cv = path_.lambdas(path_.cv_index);

    const Vec contrast = updated.size() > 0
                             ? Vec((ctx.design_a1 - ctx.design_a0) * updated.beta)
                             : Vec(Vec::Zero(data_.n()));
    res.psi = contrast.mean();

    const Vec residual = data_.Y - updated.linear(ctx.design);
    const Vec np = nonparametric_eic_ate(H_, residual, contrast, res.psi);
    res.cis[CiVariant::np] = wald_ci(res.psi, np);

    const ScoreMatrix scores = score_matrix_gaussian(updated, ctx.design, data_.Y);
    const Vec D_bar = (H_.array() * data_.Y.array()).matrix();
    const EicApprox proj = projection_eic(scores, D_bar, config_.proj_lambda);
    res.cis[CiVariant::proj] = wald_ci(res.psi, proj.values);
    const EicApprox proj_cv = projection_eic(scores, D_bar, 0.0, ProjectionMode::cv,
                                             derive_seed(config_.seed, "cv-projection", 0));
    res.cis[CiVariant::proj_cv] = wald_ci(res.psi, proj_cv.values);
    const Vec dpsi = updated.size() > 0
                         ? Vec((ctx.design_a1 - ctx.design_a0).colwise().mean())
                         : Vec();
    const EicApprox delta = delta_eic(scores, dpsi, config_.ridge_eta);
    res.cis[CiVariant::delta] = wald_ci(res.psi, delta.values);
    return res;
}

AteResult AtePipeline::run(AteTargeting targeting) const {
    if (targeting == AteTargeting::standard) return run_standard_tmle();
    const RunOutput out = target_in_context(context_, targeting);
    return result_in_context(context_, out, targeting_name(targeting));
}

AteResult AtePipeline::run_standard_tmle() const {
    const double lo = config_.trunc_lo, hi = config_.trunc_hi;
    if (!(lo > 0.0 && lo < hi && hi < 1.0))
        throw InvalidInput("standard_tmle: truncation bounds must satisfy 0 < lo < hi < 1");
    const Vec g_trunc = g_hat_.cwiseMax(lo).cwiseMin(hi);
    const Vec H = clever_covariate(g_trunc, data_.A);

    // single linear fluctuation with offset Q and covariate H
    const Vec residual0 = data_.Y - context_.model.linear(context_.design);
    const double denom = H.squaredNorm();
    const double epsilon = denom > 0.0 ? H.dot(residual0) / denom : 0.0;

    const Vec H1 = (1.0 / g_trunc.array()).matrix();
    const Vec H0 = (-1.0 / (1.0 - g_trunc.array())).matrix();
    const Vec q1 = context_.model.linear(context_.design_a1) + epsilon * H1;
    const Vec q0 = context_.model.linear(context_.design_a0) + epsilon * H0;
    const Vec contrast = q1 - q0;

    AteResult res;
    res.targeting = "standard";
    res.working_model_rule = config_.rule == WorkingModelRule::cv ? "cv" : "undersmoothed";
    res.iterations = 1;
    res.converged = true;
    res.model_size = context_.model.size();
    res.lambda_cv = path_.lambdas(path_.cv_index);
    res.psi = contrast.mean();

    const Vec residual = residual0 - epsilon * H;
    const Vec np = nonparametric_eic_ate(H, residual, contrast, res.psi);
    res.cis[CiVariant::np] = wald_ci(res.psi, np);
    return res;
}

AteResult estimate_ate(const AteData& data, const AteConfig& config) {
    AtePipeline pipeline(data, config);
    return pipeline.run(config.targeting);
}

AteResult standard_tmle(const AteData& data, const AteConfig& config) {
    AtePipeline pipeline(data, config);
    return pipeline.run_standard_tmle();
}

}  // namespace reghal

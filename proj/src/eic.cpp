#include "reghal/eic.hpp"

#include <Eigen/Cholesky>

namespace reghal {

ScoreMatrix score_matrix_gaussian(const WorkingModel& model, const Mat& design_values,
                                  const Vec& y) {
    if (model.family.tag != Family::Tag::gaussian)
        throw InvalidInput("score_matrix_gaussian: model family must be gaussian");
    ScoreMatrix s;
    s.beta_at = model.beta;
    const Vec resid2 = 2.0 * (y - model.linear(design_values)).array();
    s.values = resid2.asDiagonal() * design_values;
    return s;
}

EicApprox projection_eic(const ScoreMatrix& scores, const Vec& D_bar, double penalty,
                         ProjectionMode mode, std::uint64_t seed, const Vec* warm_alpha) {
    if (scores.rows() != D_bar.size())
        throw InvalidInput("projection_eic: row count mismatch");
    if (penalty < 0.0) throw InvalidInput("projection_eic: negative penalty");

    EicApprox out;
    out.label = mode == ProjectionMode::cv ? EicLabel::projection_cv : EicLabel::projection_weak;
    if (scores.cols() == 0) {
        out.alpha = Vec();
        out.values = Vec::Zero(scores.rows());
        return out;
    }
    if (mode == ProjectionMode::cv) {
        const Vec lambdas = make_lambda_path(scores.values, D_bar, Family::gaussian(), 100, 1e-4);
        const LassoPath path =
            cv_select(scores.values, D_bar, Family::gaussian(), lambdas, 10, seed);
        out.alpha = path.fits[path.cv_index].beta;
    } else {
        LassoFit warm;
        const LassoFit* warm_ptr = nullptr;
        if (warm_alpha && warm_alpha->size() == scores.cols()) {
            warm.beta = *warm_alpha;
            warm.intercept = 0.0;
            warm_ptr = &warm;
        }
        out.alpha = solve_lasso(scores.values, D_bar, Family::gaussian(), penalty, warm_ptr).beta;
    }
    out.values = scores.values * out.alpha;
    return out;
}

EicApprox delta_eic(const ScoreMatrix& scores, const Vec& dpsi_dbeta, double eta) {
    if (dpsi_dbeta.size() != scores.cols())
        throw InvalidInput("delta_eic: gradient length mismatch");
    if (!(eta > 0.0)) throw InvalidInput("delta_eic: eta must be positive");
    if (!scores.values.allFinite() || !dpsi_dbeta.allFinite())
        throw InvalidInput("delta_eic: non-finite entries");

    const long n = scores.rows();
    Mat fisher = (scores.values.transpose() * scores.values) / double(n);
    fisher.diagonal().array() += eta;

    EicApprox out;
    out.label = EicLabel::delta;
    Eigen::LLT<Mat> llt(fisher);
    if (llt.info() == Eigen::Success) {
        out.alpha = llt.solve(dpsi_dbeta);
    } else {
        out.alpha = Eigen::LDLT<Mat>(fisher).solve(dpsi_dbeta);
    }
    out.values = scores.values * out.alpha;
    return out;
}

Vec nonparametric_eic_ate(const Vec& H, const Vec& residual, const Vec& plugin_contrast,
                          double psi) {
    return (H.array() * residual.array() + plugin_contrast.array() - psi).matrix();
}

WaldCi wald_ci(double psi, const Vec& eic_values, double level) {
    if (eic_values.size() == 0) throw InvalidInput("wald_ci: empty EIC values");
    if (!(level > 0.0 && level < 1.0)) throw InvalidInput("wald_ci: level must lie in (0,1)");
    const long n = eic_values.size();
    const double m = eic_values.mean();
    const double var = (eic_values.array() - m).square().sum() / double(n);
    WaldCi ci;
    ci.se = std::sqrt(var / double(n));
    const double z = normal_quantile(0.5 * (1.0 + level));
    ci.lower = psi - z * ci.se;
    ci.upper = psi + z * ci.se;
    return ci;
}

}  // namespace reghal

#include "reghal/survival.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "reghal/rng.hpp"

namespace reghal {

const char* targeting_name(SurvTargeting t) {
    switch (t) {
        case SurvTargeting::relaxed: return "relaxed";
        case SurvTargeting::projection: return "projection";
        case SurvTargeting::delta: return "delta";
    }
    return "?";
}

PiecewiseHazard::PiecewiseHazard(const std::vector<double>& knots, const Vec& theta)
    : knots_(knots) {
    const std::size_t p = knots.size();
    if (theta.size() != static_cast<long>(p) + 1)
        throw InvalidInput("PiecewiseHazard: theta length must be #knots + 1");
    rates_.resize(p + 1);
    cum_at_knot_.resize(p + 1);  // cum_at_knot_(l) = cumulative hazard at knot l (1-based); (0) = 0
    double log_rate = theta(0);
    rates_(0) = std::exp(log_rate);
    cum_at_knot_(0) = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        const double prev_knot = j > 0 ? knots_[j - 1] : 0.0;
        cum_at_knot_(j + 1) = cum_at_knot_(j) + rates_(j) * (knots_[j] - prev_knot);
        log_rate += theta(j + 1);
        rates_(j + 1) = std::exp(log_rate);
    }
}

int PiecewiseHazard::segment_of(double t) const {
    // number of knots strictly below t
    return static_cast<int>(std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
}

double PiecewiseHazard::cumulative(double t) const {
    if (t <= 0.0) return 0.0;
    const int seg = segment_of(t);
    const double start = seg > 0 ? knots_[seg - 1] : 0.0;
    return cum_at_knot_(seg) + rates_(seg) * (t - start);
}

double PiecewiseHazard::rate_at(double t) const { return rates_(segment_of(t)); }

RepeatedData build_repeated_data(const SurvData& data, const std::vector<double>& knots) {
    const long n = data.n();
    const int p = static_cast<int>(knots.size());
    long total_rows = 0;
    std::vector<int> segs(n);
    for (long i = 0; i < n; ++i) {
        const double t = data.times(i);
        segs[i] = static_cast<int>(std::lower_bound(knots.begin(), knots.end(), t) - knots.begin());
        total_rows += segs[i] + 1;
    }
    RepeatedData rep;
    rep.X = Mat::Zero(total_rows, p);
    rep.y.resize(total_rows);
    rep.exposure.resize(total_rows);
    rep.subject.resize(total_rows);
    long r = 0;
    for (long i = 0; i < n; ++i) {
        const double t = data.times(i);
        for (int seg = 0; seg <= segs[i]; ++seg) {
            const double start = seg > 0 ? knots[seg - 1] : 0.0;
            const double end = seg < segs[i] ? knots[seg] : t;
            rep.X.row(r).head(seg).setOnes();
            rep.y(r) = (seg == segs[i] && data.events(i) == 1) ? 1.0 : 0.0;
            rep.exposure(r) = end - start;
            rep.subject[r] = static_cast<int>(i);
            ++r;
        }
    }
    return rep;
}

IntensityFit fit_intensity_hal(const SurvData& data, int n_knots, bool censoring,
                               std::uint64_t seed, int n_lambda, double ratio, int cv_folds) {
    const long n = data.n();
    if ((data.times.array() <= 0.0).any() || !data.times.allFinite())
        throw InvalidInput("fit_intensity_hal: times must be finite and positive");

    std::vector<double> event_times;
    SurvData working = data;
    for (long i = 0; i < n; ++i) {
        const int flag = censoring ? 1 - data.events(i) : data.events(i);
        working.events(i) = flag;
        if (flag == 1) event_times.push_back(data.times(i));
    }
    if (event_times.empty())
        throw EstimationError("fit_intensity_hal: no events to fit the hazard");

    IntensityFit fit;
    fit.all_knots = select_knots(
        Eigen::Map<const Vec>(event_times.data(), static_cast<long>(event_times.size())),
        n_knots);
    for (const double q : fit.all_knots) fit.all_basis.push_back({{0}, {q}, 0});

    const RepeatedData rep = build_repeated_data(working, fit.all_knots);
    const Family fam = Family::poisson(rep.exposure);
    const Vec lambdas = make_lambda_path(rep.X, rep.y, fam, n_lambda, ratio);
    fit.path = cv_select(rep.X, rep.y, fam, lambdas, cv_folds, seed);
    fit.model.wm = extract_working_model(fit.path, fit.all_basis, fit.path.cv_index,
                                         Family::poisson());
    return fit;
}

double survival_from_hazard(const HazardModel& model, double t) {
    if (t < 0.0) throw InvalidInput("survival_from_hazard: negative time");
    return PiecewiseHazard(model).survival(t);
}

ScoreMatrix score_matrix_hazard(const HazardModel& model, const Vec& times,
                                const Eigen::VectorXi& events) {
    for (const auto& b : model.wm.basis)
        if (b.order != 0 || b.vars != std::vector<int>{0})
            throw InvalidInput("score_matrix_hazard: basis must be order-0 step functions of time");
    if ((times.array() < 0.0).any())
        throw InvalidInput("score_matrix_hazard: negative time");

    const PiecewiseHazard pw(model);
    const auto& knots = pw.knots();
    const long n = times.size();
    const int p = static_cast<int>(knots.size());

    ScoreMatrix s;
    s.beta_at = model.theta();
    s.values.resize(n, p + 1);
    for (long i = 0; i < n; ++i) {
        const double t = times(i);
        const double d = events(i) == 1 ? 1.0 : 0.0;
        const double cum_t = pw.cumulative(t);
        s.values(i, 0) = d - cum_t;
        for (int j = 0; j < p; ++j) {
            const double ind = t > knots[j] ? 1.0 : 0.0;
            const double cum_from_knot = ind > 0.0 ? cum_t - pw.cumulative(knots[j]) : 0.0;
            s.values(i, j + 1) = d * ind - cum_from_knot;
        }
    }
    return s;
}

Mat initial_gradient(const SurvData& data, const HazardModel& censor_model,
                     const std::vector<double>& grid) {
    const long n = data.n();
    const PiecewiseHazard pw(censor_model);
    Mat g = Mat::Zero(n, static_cast<long>(grid.size()));
    for (long i = 0; i < n; ++i) {
        if (data.events(i) != 1) continue;
        const double surv_c = pw.survival(data.times(i));
        if (surv_c < 1e-12)
            throw EstimationError("initial_gradient: censoring survival underflow (positivity)");
        for (std::size_t s = 0; s < grid.size(); ++s)
            if (data.times(i) > grid[s]) g(i, s) = 1.0 / surv_c;
    }
    return g;
}

Vec delta_gamma_survival(const HazardModel& model, const ScoreMatrix& scores, double s,
                         double eta) {
    if (!(s > 0.0)) throw InvalidInput("delta_gamma_survival: s must be positive");
    const PiecewiseHazard pw(model);
    const auto& knots = pw.knots();
    const double surv = pw.survival(s);
    const double cum_s = pw.cumulative(s);
    Vec dpsi(static_cast<long>(knots.size()) + 1);
    dpsi(0) = -surv * cum_s;
    for (std::size_t j = 0; j < knots.size(); ++j)
        dpsi(j + 1) = s > knots[j] ? -surv * (cum_s - pw.cumulative(knots[j])) : 0.0;
    return delta_eic(scores, dpsi, eta).alpha;
}

double simultaneous_quantile(const Mat& centered_eic, double level, int draws,
                             std::uint64_t seed) {
    if (centered_eic.cols() < 1) throw InvalidInput("simultaneous_quantile: need m >= 1");
    if (draws < 1000) throw InvalidInput("simultaneous_quantile: need at least 1000 draws");

    const long n = centered_eic.rows();
    std::vector<long> keep;
    Vec sd(centered_eic.cols());
    for (long j = 0; j < centered_eic.cols(); ++j) {
        sd(j) = std::sqrt(centered_eic.col(j).squaredNorm() / double(n));
        if (sd(j) > 1e-12)
            keep.push_back(j);
        else
            std::cerr << "simultaneous_quantile: dropping zero-variance column " << j << "\n";
    }
    if (keep.empty()) return normal_quantile(0.5 * (1.0 + level));

    const long m = static_cast<long>(keep.size());
    Mat corr(m, m);
    for (long a = 0; a < m; ++a)
        for (long b = 0; b <= a; ++b) {
            const double c = centered_eic.col(keep[a]).dot(centered_eic.col(keep[b])) /
                             (double(n) * sd(keep[a]) * sd(keep[b]));
            corr(a, b) = c;
            corr(b, a) = c;
        }

    Eigen::SelfAdjointEigenSolver<Mat> eig(corr);
    const Vec scale = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Mat L = eig.eigenvectors() * scale.asDiagonal();

    Rng rng(seed);
    std::vector<double> maxima(draws);
    Vec g(m);
    for (int d = 0; d < draws; ++d) {
        for (long j = 0; j < m; ++j) g(j) = rng.normal();
        maxima[d] = (L * g).cwiseAbs().maxCoeff();
    }
    std::sort(maxima.begin(), maxima.end());
    const long idx = std::min<long>(draws - 1,
                                    static_cast<long>(std::ceil(level * draws)) - 1);
    return maxima[std::max<long>(idx, 0)];
}

std::vector<double> default_time_grid(const SurvData& data, int size) {
    std::vector<double> event_times;
    for (long i = 0; i < data.n(); ++i)
        if (data.events(i) == 1) event_times.push_back(data.times(i));
    if (event_times.size() < 3)
        throw EstimationError("default_time_grid: not enough events for a grid");
    std::sort(event_times.begin(), event_times.end());
    const double tmin = event_times.front(), tmax = event_times.back();
    const long ne = static_cast<long>(event_times.size());
    std::vector<double> grid;
    for (int k = 1; k <= size; ++k) {
        const long idx = (static_cast<long>(k) * ne + size) / (size + 1);  // ceil(k*ne/(size+1))
        const double q = event_times[std::min(idx > 0 ? idx - 1 : 0, ne - 1)];
        if (q > tmin && q < tmax && (grid.empty() || q > grid.back())) grid.push_back(q);
    }
    return grid;
}

SurvivalPipeline::SurvivalPipeline(const SurvData& data, const SurvConfig& config)
    : data_(data),
      config_(config),
      failure_(fit_intensity_hal(data, config.failure_knots, false,
                                 derive_seed(config.seed, "cv-failure", 0))),
      censor_(fit_intensity_hal(data, config.censor_knots, true,
                                derive_seed(config.seed, "cv-censor", 0))) {
    if (config_.rule == WorkingModelRule::cv) {
        failure_model_ = failure_.model;
    } else {
        const int idx = undersmooth_select(failure_.path, UndersmoothRule::l1_multiplier_1_61);
        failure_model_.wm = extract_undersmoothed_model(failure_.path, failure_.all_basis, idx,
                                                        Family::poisson());
        failure_model_.wm.meta.selection_rule = "l1-multiplier-1.61";
    }
    grid_ = default_time_grid(data, config.grid_size);
    gradient_ = initial_gradient(data, censor_.model, grid_);
}

namespace {

struct PointEics {
    std::vector<EicApprox> eics;
};

/// Shared-factorization delta directions for every grid point.
std::vector<EicApprox> delta_eics_all(const HazardModel& model, const ScoreMatrix& scores,
                                      const std::vector<double>& grid, double eta) {
    const long n = scores.rows();
    Mat fisher = (scores.values.transpose() * scores.values) / double(n);
    fisher.diagonal().array() += eta;
    Eigen::LLT<Mat> llt(fisher);
    const bool ok = llt.info() == Eigen::Success;
    Eigen::LDLT<Mat> ldlt;
    if (!ok) ldlt.compute(fisher);

    const PiecewiseHazard pw(model);
    const auto& knots = pw.knots();
    std::vector<EicApprox> eics(grid.size());
    for (std::size_t s = 0; s < grid.size(); ++s) {
        const double surv = pw.survival(grid[s]);
        const double cum_s = pw.cumulative(grid[s]);
        Vec dpsi(static_cast<long>(knots.size()) + 1);
        dpsi(0) = -surv * cum_s;
        for (std::size_t j = 0; j < knots.size(); ++j)
            dpsi(j + 1) = grid[s] > knots[j] ? -surv * (cum_s - pw.cumulative(knots[j])) : 0.0;
        EicApprox e;
        e.label = EicLabel::delta;
        e.alpha = ok ? Vec(llt.solve(dpsi)) : Vec(ldlt.solve(dpsi));
        e.values = scores.values * e.alpha;
        e.target_id = static_cast<int>(s);
        e.target_time = grid[s];
        eics[s] = std::move(e);
    }
    return eics;
}

}  // namespace

SurvCurveResult SurvivalPipeline::run(SurvTargeting targeting) const {
    HazardModel model = failure_model_;
    int iterations = 0;
    bool converged = true;

    if (targeting == SurvTargeting::relaxed) {
        const RepeatedData rep = build_repeated_data(data_, model.knots());
        const TargetingResult fit =
            relaxed_fit(rep.X, rep.y, Family::poisson(rep.exposure));
        Vec theta(model.wm.size() + 1);
        theta(0) = fit.intercept;
        theta.tail(model.wm.size()) = fit.beta;
        model.set_theta(theta);
        iterations = fit.iterations;
        converged = fit.converged;
    } else {
        TargetingOptions opts;
        opts.step = config_.step;
        opts.max_iter = config_.max_iter;
        HazardModel current = model;
        std::vector<Vec> warm(grid_.size());
        const EicProvider provider = [&](const Vec& theta) {
            current.set_theta(theta);
            const ScoreMatrix scores = score_matrix_hazard(current, data_.times, data_.events);
            if (targeting == SurvTargeting::delta)
                return delta_eics_all(current, scores, grid_, config_.ridge_eta);
            std::vector<EicApprox> eics(grid_.size());
            for (std::size_t s = 0; s < grid_.size(); ++s) {
                eics[s] = projection_eic(scores, gradient_.col(s), config_.proj_lambda,
                                         ProjectionMode::fixed, 0,
                                         warm[s].size() ? &warm[s] : nullptr);
                warm[s] = eics[s].alpha;
                eics[s].target_id = static_cast<int>(s);
                eics[s].target_time = grid_[s];
            }
            return eics;
        };
        const TargetingResult fit = target_multi(model.theta(), provider, opts);
        model.set_theta(fit.beta);
        iterations = fit.iterations;
        converged = fit.converged;
    }

    SurvCurveResult res;
    res.grid = grid_;
    res.targeting = targeting_name(targeting);
    res.iterations = iterations;
    res.converged = converged;

    const PiecewiseHazard pw(model);
    res.estimates.resize(static_cast<long>(grid_.size()));
    for (std::size_t s = 0; s < grid_.size(); ++s) res.estimates(s) = pw.survival(grid_[s]);
    for (long s = 0; s + 1 < res.estimates.size(); ++s)
        if (res.estimates(s + 1) > res.estimates(s))
            throw EstimationError("survival estimates must be non-increasing");

    // pointwise intervals from each EIC approximation at the final fit
    const ScoreMatrix scores = score_matrix_hazard(model, data_.times, data_.events);
    const std::vector<EicApprox> deltas = delta_eics_all(model, scores, grid_,
                                                         config_.ridge_eta);
    res.cis.resize(grid_.size());
    Mat band_matrix(data_.n(), static_cast<long>(grid_.size()));
    for (std::size_t s = 0; s < grid_.size(); ++s) {
        const EicApprox proj = projection_eic(scores, gradient_.col(s), config_.proj_lambda);
        const EicApprox proj_cv =
            projection_eic(scores, gradient_.col(s), 0.0, ProjectionMode::cv,
                           derive_seed(config_.seed, "cv-proj-point", s));
        res.cis[s].proj = wald_ci(res.estimates(s), proj.values);
        res.cis[s].proj_cv = wald_ci(res.estimates(s), proj_cv.values);
        res.cis[s].delta = wald_ci(res.estimates(s), deltas[s].values);
        const Vec& band_values =
            targeting == SurvTargeting::delta ? deltas[s].values : proj.values;
        band_matrix.col(s) = band_values.array() - band_values.mean();
    }

    res.band_z = simultaneous_quantile(band_matrix, 0.95, config_.band_draws,
                                       derive_seed(config_.seed, "band", 0));
    res.band_lower.resize(res.estimates.size());
    res.band_upper.resize(res.estimates.size());
    for (long s = 0; s < res.estimates.size(); ++s) {
        const double se = std::sqrt(band_matrix.col(s).squaredNorm() / double(data_.n())) /
                          std::sqrt(double(data_.n()));
        res.band_lower(s) = res.estimates(s) - res.band_z * se;
        res.band_upper(s) = res.estimates(s) + res.band_z * se;
    }
    return res;
}

SurvCurveResult estimate_survival_curve(const SurvData& data, const SurvConfig& config) {
    SurvivalPipeline pipeline(data, config);
    return pipeline.run(config.targeting);
}

}  // namespace reghal

#include "reghal/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "reghal/rng.hpp"

namespace reghal {

namespace {

constexpr double kEtaClamp = 30.0;
constexpr double kProbClip = 1e-10;
constexpr double kKktAddTol = 1e-9;  // violator screening threshold

double soft_threshold(double z, double lambda) {
    if (z > lambda) return z - lambda;
    if (z < -lambda) return z + lambda;
    return 0.0;
}

struct Standardized {
    Mat Xs;  // centered columns at unit sample SD (denominator n)
    Vec mean, scale;
    std::vector<char> constant;
};

Standardized standardize(const Mat& X) {
    const long n = X.rows(), p = X.cols();
    Standardized s;
    s.Xs = X;
    s.mean.resize(p);
    s.scale.resize(p);
    s.constant.assign(static_cast<std::size_t>(p), 0);
    for (long j = 0; j < p; ++j) {
        const double m = n > 0 ? s.Xs.col(j).mean() : 0.0;
        s.Xs.col(j).array() -= m;
        const double sd = std::sqrt(s.Xs.col(j).squaredNorm() / double(n));
        s.mean(j) = m;
        if (sd < 1e-12) {
            s.constant[j] = 1;
            s.scale(j) = 1.0;
            s.Xs.col(j).setZero();
        } else {
            s.scale(j) = sd;
            s.Xs.col(j) /= sd;
        }
    }
    return s;
}

class CdSolver {
public:
    CdSolver(const Mat& X, const Vec& y, const Family& fam, const SolveOptions& opts)
        : std_(standardize(X)),
          y_(y),
          fam_(fam),
          opts_(opts),
          n_(X.rows()),
          p_(X.cols()),
          b_(Vec::Zero(X.cols())) {
        if (!y.allFinite()) throw InvalidInput("solve_lasso: non-finite response");
        if (fam.tag == Family::Tag::poisson && fam.exposure.size() > 0 &&
            fam.exposure.size() != n_)
            throw InvalidInput("solve_lasso: exposure length mismatch");
        reset_null();
    }

    void reset_null() {
        b_.setZero();
        switch (fam_.tag) {
            case Family::Tag::gaussian:
                a_ = y_.mean();
                break;
            case Family::Tag::binomial: {
                const double pbar = std::clamp(y_.mean(), kProbClip, 1.0 - kProbClip);
                a_ = std::log(pbar / (1.0 - pbar));
                break;
            }
            case Family::Tag::poisson: {
                const double denom = exposure_sum();
                const double ybar = y_.sum();
                a_ = std::log(std::max(ybar, 1e-12) / denom);
                break;
            }
        }
        if (fam_.tag == Family::Tag::gaussian)
            r_ = y_.array() - a_;
        else
            eta_ = Vec::Constant(n_, a_);
    }

    void set_warm(const LassoFit& warm) {
        if (warm.beta.size() != p_) throw InvalidInput("solve_lasso: warm start size mismatch");
        for (long j = 0; j < p_; ++j)
            b_(j) = std_.constant[j] ? 0.0 : warm.beta(j) * std_.scale(j);
        if (fam_.tag == Family::Tag::gaussian) {
            a_ = y_.mean();
            r_ = y_.array() - a_;
            r_.noalias() -= std_.Xs * b_;
        } else {
            double shift = warm.intercept;
            for (long j = 0; j < p_; ++j)
                if (!std_.constant[j]) shift += warm.beta(j) * std_.mean(j);
            a_ = shift;
            eta_ = Vec::Constant(n_, a_);
            eta_.noalias() += std_.Xs * b_;
        }
    }

    /// |gradient| of the null model; lambda_max is its max over columns.
    Vec null_gradient() {
        reset_null();
        return family_gradient().cwiseAbs();
    }

    LassoFit solve(double lambda) {
        sweeps_ = 0;
        converged_ = true;
        working_.clear();
        in_working_.assign(static_cast<std::size_t>(p_), 0);
        for (long j = 0; j < p_; ++j)
            if (b_(j) != 0.0) add_working(j);

        while (true) {
            if (fam_.tag == Family::Tag::gaussian)
                cd_gaussian(lambda);
            else
                irls(lambda);
            // full KKT scan; grow the working set until no violations remain
            const Vec g = family_gradient();
            bool added = false;
            for (long j = 0; j < p_; ++j) {
                if (in_working_[j] || std_.constant[j]) continue;
                if (std::fabs(g(j)) > lambda + kKktAddTol) {
                    add_working(j);
                    added = true;
                }
            }
            if (!added) break;
            if (sweeps_ >= opts_.max_sweeps) {
                converged_ = false;
                break;
            }
        }
        return current_fit();
    }

    LassoFit current_fit() const {
        LassoFit fit;
        fit.beta.resize(p_);
        double a = a_;
        for (long j = 0; j < p_; ++j) {
            const double bj = std_.constant[j] ? 0.0 : b_(j) / std_.scale(j);
            fit.beta(j) = bj;
            a -= b_(j) * std_.mean(j) / std_.scale(j);
        }
        fit.intercept = a;
        fit.converged = converged_;
        fit.sweeps = sweeps_;
        return fit;
    }

private:
    double exposure_sum() const {
        return fam_.exposure.size() > 0 ? fam_.exposure.sum() : double(n_);
    }

    void add_working(long j) {
        in_working_[j] = 1;
        working_.insert(std::upper_bound(working_.begin(), working_.end(), j), j);
    }

    void mean_response(Vec& mu, Vec& w) const {
        mu.resize(n_);
        w.resize(n_);
        switch (fam_.tag) {
            case Family::Tag::gaussian:
                break;
            case Family::Tag::binomial:
                for (long i = 0; i < n_; ++i) {
                    const double e = std::clamp(eta_(i), -kEtaClamp, kEtaClamp);
                    const double p = expit(e);
                    mu(i) = p;
                    w(i) = std::max(p * (1.0 - p), 1e-6);
                }
                break;
            case Family::Tag::poisson:
                for (long i = 0; i < n_; ++i) {
                    const double e = std::clamp(eta_(i), -kEtaClamp, kEtaClamp);
                    const double t = fam_.exposure.size() > 0 ? fam_.exposure(i) : 1.0;
                    mu(i) = t * std::exp(e);
                    w(i) = std::max(mu(i), 1e-10);
                }
                break;
        }
    }

    Vec family_gradient() const {
        if (fam_.tag == Family::Tag::gaussian) return std_.Xs.transpose() * (-r_ / double(n_));
        Vec mu, w;
        mean_response(mu, w);
        return std_.Xs.transpose() * ((mu - y_) / double(n_));
    }

    void trace_objective(double lambda) {
        if (!opts_.objective_trace) return;
        double nll = 0.0;
        if (fam_.tag == Family::Tag::gaussian) {
            nll = 0.5 * r_.squaredNorm() / double(n_);
        } else if (fam_.tag == Family::Tag::binomial) {
            for (long i = 0; i < n_; ++i) {
                const double e = eta_(i);
                nll += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) -
                       y_(i) * e;
            }
            nll /= double(n_);
        } else {
            for (long i = 0; i < n_; ++i) {
                const double t = fam_.exposure.size() > 0 ? fam_.exposure(i) : 1.0;
                nll += t * std::exp(std::clamp(eta_(i), -kEtaClamp, kEtaClamp)) - y_(i) * eta_(i);
            }
            nll /= double(n_);
        }
        opts_.objective_trace->push_back(nll + lambda * b_.lpNorm<1>());
    }

    void cd_gaussian(double lambda) {
        while (sweeps_ < opts_.max_sweeps) {
            ++sweeps_;
            double maxd = 0.0;
            for (const long j : working_) {
                if (std_.constant[j]) continue;
                const double zj = b_(j) + std_.Xs.col(j).dot(r_) / double(n_);
                const double bn = soft_threshold(zj, lambda);
                const double diff = bn - b_(j);
                if (diff != 0.0) {
                    r_.noalias() -= std_.Xs.col(j) * diff;
                    b_(j) = bn;
                    maxd = std::max(maxd, std::fabs(diff));
                }
            }
            trace_objective(lambda);
            if (maxd < opts_.tol) return;
        }
        converged_ = false;
    }

    void irls(double lambda) {
        constexpr int kMaxOuter = 50;
        Vec mu, w;
        for (int outer = 0; outer < kMaxOuter; ++outer) {
            mean_response(mu, w);
            // working response z = eta + (y - mu)/w; rw = z - a - Xs b
            Vec rw = (y_ - mu).cwiseQuotient(w);
            const Vec z = eta_ + rw;
            const double wsum = w.sum();
            Vec wxx(working_.size());
            for (std::size_t k = 0; k < working_.size(); ++k) {
                const long j = working_[k];
                wxx(k) = std_.Xs.col(j).cwiseAbs2().dot(w) / double(n_);
            }
            double outer_maxd = 0.0;
            while (sweeps_ < opts_.max_sweeps) {
                ++sweeps_;
                double maxd = 0.0;
                const double da = w.dot(rw) / wsum;
                if (da != 0.0) {
                    a_ += da;
                    rw.array() -= da;
                    maxd = std::fabs(da);
                }
                for (std::size_t k = 0; k < working_.size(); ++k) {
                    const long j = working_[k];
                    if (std_.constant[j] || wxx(k) <= 0.0) continue;
                    const double num =
                        std_.Xs.col(j).dot(w.cwiseProduct(rw)) / double(n_) + wxx(k) * b_(j);
                    const double bn = soft_threshold(num, lambda) / wxx(k);
                    const double diff = bn - b_(j);
                    if (diff != 0.0) {
                        rw.noalias() -= std_.Xs.col(j) * diff;
                        b_(j) = bn;
                        maxd = std::max(maxd, std::fabs(diff));
                    }
                }
                outer_maxd = std::max(outer_maxd, maxd);
                if (maxd < opts_.tol) break;
            }
            // eta = a + Xs b = z - rw, both maintained incrementally above
            eta_ = z - rw;
            trace_objective(lambda);
            if (outer_maxd < opts_.tol) return;
            if (sweeps_ >= opts_.max_sweeps) {
                converged_ = false;
                return;
            }
        }
        converged_ = false;
    }

    Standardized std_;
    Vec y_;
    Family fam_;
    SolveOptions opts_;
    long n_, p_;
    Vec b_;          // standardized-scale coefficients
    double a_ = 0.0; // intercept on the centered-column scale
    Vec r_;          // gaussian residual
    Vec eta_;        // glm linear predictor
    std::vector<long> working_;
    std::vector<char> in_working_;
    int sweeps_ = 0;
    bool converged_ = true;
};

}  // namespace

LassoFit solve_lasso(const Mat& X, const Vec& y, const Family& family, double lambda,
                     const LassoFit* warm_start, const SolveOptions& opts) {
    if (X.rows() != y.size()) throw InvalidInput("solve_lasso: row count mismatch");
    if (lambda < 0.0) throw InvalidInput("solve_lasso: negative lambda");
    CdSolver solver(X, y, family, opts);
    if (warm_start) solver.set_warm(*warm_start);
    return solver.solve(lambda);
}

Vec make_lambda_path(const Mat& X, const Vec& y, const Family& family, int n_lambda,
                     double ratio) {
    if (n_lambda < 2) throw InvalidInput("make_lambda_path: n_lambda must be >= 2");
    if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidInput("make_lambda_path: ratio in (0,1)");
    double lambda_max = 0.0;
    if (X.cols() > 0) {
        CdSolver solver(X, y, family, SolveOptions{});
        lambda_max = solver.null_gradient().maxCoeff();
    }
    if (lambda_max < 1e-12) {
        Vec degenerate(1);
        degenerate(0) = 0.0;
        return degenerate;
    }
    Vec lambdas(n_lambda);
    const double log_max = std::log(lambda_max);
    const double log_min = std::log(lambda_max * ratio);
    for (int k = 0; k < n_lambda; ++k)
        lambdas(k) = std::exp(log_max + (log_min - log_max) * double(k) / double(n_lambda - 1));
    return lambdas;
}

LassoPath solve_path(const Mat& X, const Vec& y, const Family& family, const Vec& lambdas) {
    LassoPath path;
    path.lambdas = lambdas;
    path.fits.reserve(lambdas.size());
    path.active_sets.reserve(lambdas.size());
    CdSolver solver(X, y, family, SolveOptions{});
    for (long k = 0; k < lambdas.size(); ++k) {
        LassoFit fit = solver.solve(lambdas(k));
        std::vector<int> active;
        for (long j = 0; j < fit.beta.size(); ++j)
            if (fit.beta(j) != 0.0) active.push_back(static_cast<int>(j));
        path.active_sets.push_back(std::move(active));
        path.fits.push_back(std::move(fit));
    }
    return path;
}

double deviance(const Vec& y, const Vec& linear_pred, const Family& family) {
    double dev = 0.0;
    switch (family.tag) {
        case Family::Tag::gaussian:
            dev = (y - linear_pred).squaredNorm();
            break;
        case Family::Tag::binomial:
            for (long i = 0; i < y.size(); ++i) {
                const double p = std::clamp(expit(linear_pred(i)), kProbClip, 1.0 - kProbClip);
                dev += -2.0 * (y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p));
            }
            break;
        case Family::Tag::poisson:
            // 2*[y log(y/mu) - (y - mu)], with the y = 0 limit 2*mu
            for (long i = 0; i < y.size(); ++i) {
                const double t = family.exposure.size() > 0 ? family.exposure(i) : 1.0;
                const double mu = t * std::exp(std::clamp(linear_pred(i), -kEtaClamp, kEtaClamp));
                dev += 2.0 * (y(i) > 0.0 ? y(i) * std::log(y(i) / mu) - (y(i) - mu) : mu);
            }
            break;
    }
    return dev;
}

LassoPath cv_select(const Mat& X, const Vec& y, const Family& family, const Vec& lambdas,
                    int folds, std::uint64_t seed) {
    if (folds < 2) throw InvalidInput("cv_select: folds must be >= 2");
    const long n = X.rows();
    LassoPath path = solve_path(X, y, family, lambdas);
    if (lambdas.size() == 1) {  // degenerate path, nothing to select
        path.cv_error = Vec::Zero(1);
        path.cv_index = 0;
        return path;
    }

    // seeded permutation; observation perm[i] goes to fold i % folds
    std::vector<long> perm(n);
    for (long i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (long i = n - 1; i > 0; --i) {
        const long j = static_cast<long>(rng.next_u64() % static_cast<std::uint64_t>(i + 1));
        std::swap(perm[i], perm[j]);
    }
    std::vector<int> fold_of(n);
    for (long i = 0; i < n; ++i) fold_of[perm[i]] = static_cast<int>(i % folds);

    Vec total_dev = Vec::Zero(lambdas.size());
    for (int f = 0; f < folds; ++f) {
        std::vector<int> train, valid;
        for (long i = 0; i < n; ++i) (fold_of[i] == f ? valid : train).push_back(int(i));
        Mat Xt = X(train, Eigen::all);
        Vec yt = y(train);
        Family fam_t = family;
        if (family.exposure.size() > 0) fam_t.exposure = family.exposure(train);
        Mat Xv = X(valid, Eigen::all);
        Vec yv = y(valid);
        Family fam_v = family;
        if (family.exposure.size() > 0) fam_v.exposure = family.exposure(valid);

        CdSolver solver(Xt, yt, fam_t, SolveOptions{});
        for (long k = 0; k < lambdas.size(); ++k) {
            const LassoFit fit = solver.solve(lambdas(k));
            Vec lp = Vec::Constant(Xv.rows(), fit.intercept);
            if (fit.beta.size() > 0) lp.noalias() += Xv * fit.beta;
            total_dev(k) += deviance(yv, lp, fam_v);
        }
    }
    path.cv_error = total_dev / double(n);
    int best = 0;
    for (long k = 1; k < lambdas.size(); ++k)
        if (path.cv_error(k) < path.cv_error(best)) best = static_cast<int>(k);
    path.cv_index = best;
    return path;
}

Vec standardized_gradient(const Mat& X, const Vec& y, const Family& family,
                          const LassoFit& fit) {
    const Standardized s = standardize(X);
    const long n = X.rows();
    Vec eta = Vec::Constant(n, fit.intercept);
    if (fit.beta.size() > 0) eta.noalias() += X * fit.beta;
    Vec u(n);
    switch (family.tag) {
        case Family::Tag::gaussian:
            u = (eta - y) / double(n);
            break;
        case Family::Tag::binomial:
            for (long i = 0; i < n; ++i)
                u(i) = (expit(std::clamp(eta(i), -kEtaClamp, kEtaClamp)) - y(i)) / double(n);
            break;
        case Family::Tag::poisson:
            for (long i = 0; i < n; ++i) {
                const double t = family.exposure.size() > 0 ? family.exposure(i) : 1.0;
                u(i) = (t * std::exp(std::clamp(eta(i), -kEtaClamp, kEtaClamp)) - y(i)) / double(n);
            }
            break;
    }
    return s.Xs.transpose() * u;
}

double kkt_violation(const Mat& X, const Vec& y, const Family& family, const LassoFit& fit,
                     double lambda) {
    const Vec g = standardized_gradient(X, y, family, fit);
    const Standardized s = standardize(X);
    double worst = 0.0;
    for (long j = 0; j < X.cols(); ++j) {
        if (s.constant[j]) continue;
        const double b_std = fit.beta(j) * s.scale(j);
        const double v = b_std != 0.0 ? std::fabs(g(j) + lambda * (b_std > 0 ? 1.0 : -1.0))
                                      : std::max(0.0, std::fabs(g(j)) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace reghal

#include "reghal/targeting.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

namespace reghal {

namespace {

double stop_threshold_1d(const EicApprox& eic) {
    const double n = double(eic.values.size());
    return eic.se() / (std::sqrt(n) * std::log(n));
}

double median(std::vector<double> v) {
    const std::size_t m = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + m, v.end());
    double hi = v[m];
    if (v.size() % 2 == 0) {
        const double lo = *std::max_element(v.begin(), v.begin() + m);
        return 0.5 * (lo + hi);
    }
    return hi;
}

}  // namespace

TargetingResult target_1d(const Vec& beta0, const EicProvider& provider,
                          const TargetingOptions& opts) {
    if (!(opts.step > 0.0)) throw InvalidInput("target_1d: step must be positive");
    TargetingResult res;
    res.beta = beta0;
    res.final_eic_mean.resize(1);
    for (int it = 0; it <= opts.max_iter; ++it) {
        const std::vector<EicApprox> eics = provider(res.beta);
        if (eics.size() != 1) throw InvalidInput("target_1d: provider must return one target");
        const EicApprox& eic = eics[0];
        const double d = eic.mean();
        const double threshold = stop_threshold_1d(eic);
        if (opts.keep_trace) {
            res.trace.push_back(std::fabs(d));
            res.threshold_trace.push_back(threshold);
        }
        res.final_eic_mean(0) = d;
        if (std::fabs(d) < threshold) {
            res.converged = true;
            res.iterations = it;
            return res;
        }
        if (it == opts.max_iter) break;
        res.beta += opts.step * (d > 0 ? 1.0 : -1.0) * eic.alpha;
    }
    res.converged = false;
    res.iterations = opts.max_iter;
    return res;
}

TargetingResult target_multi(const Vec& beta0, const EicProvider& provider,
                             const TargetingOptions& opts) {
    if (!(opts.step > 0.0)) throw InvalidInput("target_multi: step must be positive");
    TargetingResult res;
    res.beta = beta0;
    for (int it = 0; it <= opts.max_iter; ++it) {
        const std::vector<EicApprox> eics = provider(res.beta);
        const std::size_t m = eics.size();
        if (m == 0) throw InvalidInput("target_multi: provider returned no targets");
        Vec d(m);
        std::vector<double> ses(m);
        for (std::size_t s = 0; s < m; ++s) {
            d(s) = eics[s].mean();
            ses[s] = eics[s].se();
        }
        const double dnorm = d.norm();
        const double scaled = dnorm / std::sqrt(double(m));
        const double n = double(eics[0].values.size());
        const double threshold = median(ses) / (std::sqrt(n) * std::log(n));
        if (opts.keep_trace) {
            res.trace.push_back(scaled);
            res.threshold_trace.push_back(threshold);
        }
        res.final_eic_mean = d;
        if (scaled < threshold || dnorm == 0.0) {
            res.converged = true;
            res.iterations = it;
            return res;
        }
        if (it == opts.max_iter) break;
        Vec update = Vec::Zero(res.beta.size());
        for (std::size_t s = 0; s < m; ++s) update += (d(s) / dnorm) * eics[s].alpha;
        res.beta += opts.step * update;
    }
    res.converged = false;
    res.iterations = opts.max_iter;
    return res;
}

TargetingResult relaxed_fit(const Mat& X, const Vec& y, const Family& family, int max_iter) {
    const long n = X.rows(), p = X.cols();
    TargetingResult res;
    res.final_eic_mean = Vec::Zero(1);

    Mat D(n, p + 1);
    D.col(0).setOnes();
    if (p > 0) D.rightCols(p) = X;

    auto min_norm_solve = [](const Mat& A, const Vec& b) {
        Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
        return Vec(cod.solve(b));
    };

    if (family.tag == Family::Tag::gaussian) {
        const Vec theta = min_norm_solve(D, y);
        res.intercept = theta(0);
        res.beta = theta.tail(p);
        res.converged = true;
        res.iterations = 1;
        return res;
    }

    // IRLS with minimum-norm weighted least-squares steps
    Vec theta = Vec::Zero(p + 1);
    if (family.tag == Family::Tag::binomial) {
        const double pbar = std::clamp(y.mean(), 1e-10, 1.0 - 1e-10);
        theta(0) = std::log(pbar / (1.0 - pbar));
    } else {
        const double denom = family.exposure.size() > 0 ? family.exposure.sum() : double(n);
        theta(0) = std::log(std::max(y.sum(), 1e-12) / denom);
    }
    bool converged = false;
    int it = 0;
    for (; it < max_iter; ++it) {
        const Vec eta = D * theta;
        Vec mu(n), w(n);
        for (long i = 0; i < n; ++i) {
            const double e = std::clamp(eta(i), -30.0, 30.0);
            if (family.tag == Family::Tag::binomial) {
                const double pr = expit(e);
                mu(i) = pr;
                w(i) = std::max(pr * (1.0 - pr), 1e-10);
            } else {
                const double t = family.exposure.size() > 0 ? family.exposure(i) : 1.0;
                mu(i) = t * std::exp(e);
                w(i) = std::max(mu(i), 1e-10);
            }
        }
        const Vec sw = w.cwiseSqrt();
        const Vec z = eta + (y - mu).cwiseQuotient(w);
        const Vec theta_new = min_norm_solve(sw.asDiagonal() * D, sw.cwiseProduct(z));
        const double delta = (theta_new - theta).cwiseAbs().maxCoeff();
        theta = theta_new;
        if (delta < 1e-10) {
            converged = true;
            ++it;
            break;
        }
    }
    res.intercept = theta(0);
    res.beta = theta.tail(p);
    res.converged = converged;
    res.iterations = it;
    return res;
}

DirectAteResult target_direct_ate(const Vec& beta0, const Mat& basis_values, const Vec& H,
                                  const Vec& residual0, double penalty) {
    DirectAteResult out;
    out.alpha = solve_lasso(basis_values, H, Family::gaussian(), penalty).beta;
    out.fluct_covariate = basis_values * out.alpha;
    const double denom = out.fluct_covariate.squaredNorm();
    out.epsilon = denom > 0.0 ? out.fluct_covariate.dot(residual0) / denom : 0.0;
    out.beta = beta0 + out.epsilon * out.alpha;
    return out;
}

}  // namespace reghal

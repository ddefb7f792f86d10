#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>

#include "reghal/rng.hpp"
#include "reghal/targeting.hpp"

using namespace reghal;

namespace {

EicApprox make_eic(const Vec& alpha, const Vec& values) {
    EicApprox e;
    e.alpha = alpha;
    e.values = values;
    return e;
}

}  // namespace

TEST_CASE("already-converged start makes zero iterations") {
    // tiny mean, large sd: threshold far above |mean|
    Vec values(100);
    for (long i = 0; i < 100; ++i) values(i) = (i % 2 ? 1.0 : -1.0);
    const EicProvider provider = [&](const Vec&) {
        return std::vector<EicApprox>{make_eic(Vec::Ones(2), values)};
    };
    Vec beta0(2);
    beta0 << 0.5, -0.5;
    const TargetingResult res = target_1d(beta0, provider, {});
    CHECK(res.converged);
    CHECK(res.iterations == 0);
    CHECK(res.beta(0) == 0.5);
    CHECK(res.beta(1) == -0.5);
}

TEST_CASE("negative mean flips the update direction") {
    int calls = 0;
    Vec alpha(1);
    alpha << 1.0;
    const EicProvider provider = [&](const Vec&) {
        ++calls;
        Vec values(4);
        if (calls == 1)
            values << -1.0, -1.1, -0.9, -1.0;  // clearly negative mean
        else
            values << 1e-9, -1e-9, 1e-9, -1e-9;  // converged
        return std::vector<EicApprox>{make_eic(alpha, values)};
    };
    TargetingOptions opts;
    opts.step = 0.25;
    const TargetingResult res = target_1d(Vec::Zero(1), provider, opts);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(res.beta(0) == doctest::Approx(-0.25));  // moved along -alpha
}

TEST_CASE("gaussian toy converges to the least-squares solution of the EIC") {
    // one coefficient, scores 2(y - b x) x, alpha = 1: targeting solves
    // P_n 2(y - b x) x = 0, i.e. b = x'y/x'x (the relaxed MLE)
    Rng rng(71);
    const long n = 200;
    Vec x(n), y(n);
    for (long i = 0; i < n; ++i) {
        x(i) = rng.normal();
        y(i) = 0.8 * x(i) + 0.05 * rng.normal();
    }
    const double mle = x.dot(y) / x.squaredNorm();

    const EicProvider provider = [&](const Vec& beta) {
        const Vec values = 2.0 * (y - beta(0) * x).cwiseProduct(x);
        return std::vector<EicApprox>{make_eic(Vec::Ones(1), values)};
    };
    TargetingOptions opts;
    opts.step = 1e-3;
    opts.max_iter = 100000;
    const TargetingResult res = target_1d(Vec::Zero(1), provider, opts);
    CHECK(res.converged);
    // the stopping band around the MLE has width se/(sqrt(n) log n) / (2 x'x/n)
    CHECK(res.beta(0) == doctest::Approx(mle).epsilon(5e-3));
    // trace decreases towards the threshold
    REQUIRE(res.trace.size() >= 2);
    CHECK(res.trace.back() < res.trace.front());
}

TEST_CASE("provider is called once per iteration plus the final check") {
    int calls = 0;
    const EicProvider provider = [&](const Vec&) {
        ++calls;
        Vec values(4);
        if (calls <= 3)
            values << 1.0, 1.1, 0.9, 1.0;
        else
            values << 1e-9, -1e-9, 1e-9, -1e-9;
        return std::vector<EicApprox>{make_eic(Vec::Ones(1), values)};
    };
    const TargetingResult res = target_1d(Vec::Zero(1), provider, {});
    CHECK(res.converged);
    CHECK(res.iterations == 3);
    CHECK(calls == 4);
}

TEST_CASE("max_iter without convergence is flagged, result still returned") {
    const EicProvider provider = [&](const Vec&) {
        Vec values(4);
        values << 1.0, 1.1, 0.9, 1.0;
        return std::vector<EicApprox>{make_eic(Vec::Ones(1), values)};
    };
    TargetingOptions opts;
    opts.max_iter = 5;
    opts.step = 0.01;
    const TargetingResult res = target_1d(Vec::Zero(1), provider, opts);
    CHECK_FALSE(res.converged);
    CHECK(res.iterations == 5);
    CHECK(res.beta(0) == doctest::Approx(0.05));
}

TEST_CASE("target_multi with one target reproduces target_1d iterates") {
    Rng rng(73);
    const long n = 150;
    Vec x(n), y(n);
    for (long i = 0; i < n; ++i) {
        x(i) = rng.normal();
        y(i) = 0.5 * x(i) + 0.2 * rng.normal();
    }
    const auto make_provider = [&]() {
        return [&](const Vec& beta) {
            const Vec values = 2.0 * (y - beta(0) * x).cwiseProduct(x);
            return std::vector<EicApprox>{make_eic(Vec::Ones(1), values)};
        };
    };
    TargetingOptions opts;
    opts.step = 1e-3;
    opts.max_iter = 20000;
    const TargetingResult one = target_1d(Vec::Zero(1), make_provider(), opts);
    const TargetingResult multi = target_multi(Vec::Zero(1), make_provider(), opts);
    CHECK(one.iterations == multi.iterations);
    CHECK(one.beta(0) == multi.beta(0));  // identical iterate sequences
    REQUIRE(one.trace.size() == multi.trace.size());
    for (std::size_t k = 0; k < one.trace.size(); ++k)
        CHECK(one.trace[k] == doctest::Approx(multi.trace[k]).epsilon(1e-12));
}

TEST_CASE("two identical targets aggregate to sqrt(2) times the single direction") {
    Vec alpha(2);
    alpha << 1.0, -2.0;
    Vec values(4);
    values << 1.0, 1.2, 0.8, 1.0;
    int calls = 0;
    const EicProvider provider = [&](const Vec&) {
        ++calls;
        std::vector<EicApprox> eics;
        if (calls == 1) {
            eics.push_back(make_eic(alpha, values));
            eics.push_back(make_eic(alpha, values));
        } else {
            Vec tiny(4);
            tiny << 1e-9, -1e-9, 1e-9, -1e-9;
            eics.push_back(make_eic(alpha, tiny));
            eics.push_back(make_eic(alpha, tiny));
        }
        return eics;
    };
    TargetingOptions opts;
    opts.step = 0.1;
    const TargetingResult res = target_multi(Vec::Zero(2), provider, opts);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    // update = sum_s d/||d|| alpha = 2 * (d / (d sqrt(2))) alpha = sqrt(2) alpha
    CHECK(res.beta(0) == doctest::Approx(0.1 * std::sqrt(2.0) * 1.0).epsilon(1e-12));
    CHECK(res.beta(1) == doctest::Approx(0.1 * std::sqrt(2.0) * -2.0).epsilon(1e-12));
}

TEST_CASE("all-zero means stop immediately") {
    const EicProvider provider = [&](const Vec&) {
        std::vector<EicApprox> eics;
        Vec z = Vec::Zero(4);
        eics.push_back(make_eic(Vec::Ones(1), z));
        eics.push_back(make_eic(Vec::Ones(1), z));
        return eics;
    };
    const TargetingResult res = target_multi(Vec::Zero(1), provider, {});
    CHECK(res.converged);
    CHECK(res.iterations == 0);
}

TEST_CASE("relaxed gaussian fit is least squares; collinear designs take minimum norm") {
    Rng rng(79);
    const long n = 60;
    Mat X(n, 2);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y(i) = 1.0 + X(i, 0) - 2.0 * X(i, 1) + 0.1 * rng.normal();
    }
    const TargetingResult fit = relaxed_fit(X, y, Family::gaussian());
    Mat D(n, 3);
    D.col(0).setOnes();
    D.rightCols(2) = X;
    const Vec ols = D.colPivHouseholderQr().solve(y);
    CHECK(fit.intercept == doctest::Approx(ols(0)).epsilon(1e-8));
    CHECK(fit.beta(0) == doctest::Approx(ols(1)).epsilon(1e-8));
    CHECK(fit.beta(1) == doctest::Approx(ols(2)).epsilon(1e-8));

    // duplicated column: predictions match the pseudo-inverse solution
    Mat Xdup(n, 2);
    Xdup.col(0) = X.col(0);
    Xdup.col(1) = X.col(0);
    const TargetingResult dup = relaxed_fit(Xdup, y, Family::gaussian());
    Mat Ddup(n, 3);
    Ddup.col(0).setOnes();
    Ddup.rightCols(2) = Xdup;
    const Vec pinv_sol = Ddup.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(y);
    const Vec pred = Vec::Constant(n, dup.intercept) + Xdup * dup.beta;
    const Vec pred_oracle = Ddup * pinv_sol;
    CHECK((pred - pred_oracle).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(dup.beta(0) == doctest::Approx(dup.beta(1)).epsilon(1e-8));  // split evenly
}

TEST_CASE("relaxed binomial fit solves the score equations") {
    Rng rng(83);
    const long n = 300;
    Mat X(n, 2);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y(i) = rng.bernoulli(expit(0.5 + X(i, 0)));
    }
    const TargetingResult fit = relaxed_fit(X, y, Family::binomial());
    CHECK(fit.converged);
    Vec eta = Vec::Constant(n, fit.intercept) + X * fit.beta;
    Vec mu = eta.unaryExpr([](double e) { return expit(e); });
    CHECK(std::fabs((y - mu).sum()) < 1e-6);
    CHECK(std::fabs(X.col(0).dot(y - mu)) < 1e-6);
}

TEST_CASE("direct targeting: H orthogonal to the basis leaves beta unchanged") {
    const long n = 8;
    Mat phi(n, 1);
    phi << 1, 1, 1, 1, -1, -1, -1, -1;
    Vec H(n);
    H << 1, -1, 1, -1, 1, -1, 1, -1;  // orthogonal to phi and to the constant
    Vec resid = Vec::Ones(n);
    Vec beta0(1);
    beta0 << 0.4;
    const DirectAteResult res = target_direct_ate(beta0, phi, H, resid, 0.0);
    CHECK(res.alpha(0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(res.epsilon == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
    CHECK(res.beta(0) == doctest::Approx(0.4).epsilon(1e-10));
}

TEST_CASE("direct targeting with H in the span equals the classical fluctuation") {
    Rng rng(89);
    const long n = 100;
    Mat phi(n, 2);
    Vec resid(n);
    for (long i = 0; i < n; ++i) {
        phi(i, 0) = rng.normal();
        phi(i, 1) = rng.normal();
        resid(i) = rng.normal();
    }
    const Vec H = 2.0 * phi.col(0) - phi.col(1);  // exactly in the span
    Vec beta0(2);
    beta0 << 0.1, -0.2;
    const DirectAteResult res = target_direct_ate(beta0, phi, H, resid, 0.0);

    // classical one-covariate fluctuation: epsilon = <H, resid>/<H, H>
    const double eps_classical = H.dot(resid) / H.squaredNorm();
    CHECK(res.epsilon == doctest::Approx(eps_classical).epsilon(1e-6));
    CHECK((res.fluct_covariate - H).cwiseAbs().maxCoeff() < 1e-6);

    // normal-equation identity for the step size
    const double eps_direct =
        res.fluct_covariate.dot(resid) / res.fluct_covariate.squaredNorm();
    CHECK(res.epsilon == doctest::Approx(eps_direct).epsilon(1e-12));
}

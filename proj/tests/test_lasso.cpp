#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/QR>

#include "reghal/lasso.hpp"
#include "reghal/rng.hpp"

using namespace reghal;

namespace {

double soft(double z, double l) { return z > l ? z - l : (z < -l ? z + l : 0.0); }

double penalized_objective(const Mat& X, const Vec& y, double a, const Vec& b, double lambda) {
    const Vec r = y - Vec::Constant(y.size(), a) - X * b;
    return 0.5 * r.squaredNorm() / double(y.size()) + lambda * b.lpNorm<1>();
}

/// Multi-resolution 2-D grid minimizer of the standardized penalized
/// objective; independent of the coordinate-descent path.
std::pair<double, double> grid_oracle_2d(const Mat& Xs, const Vec& y, double lambda) {
    double c1 = 0.0, c2 = 0.0, span = 4.0;
    const double a = y.mean();
    for (int level = 0; level < 8; ++level) {
        double best = std::numeric_limits<double>::infinity();
        double b1 = c1, b2 = c2;
        for (int i = -40; i <= 40; ++i)
            for (int j = -40; j <= 40; ++j) {
                Vec b(2);
                b << c1 + span * i / 40.0, c2 + span * j / 40.0;
                const double obj = penalized_objective(Xs, y, a, b, lambda);
                if (obj < best) {
                    best = obj;
                    b1 = b(0);
                    b2 = b(1);
                }
            }
        c1 = b1;
        c2 = b2;
        span /= 20.0;
    }
    return {c1, c2};
}

Mat standardize_cols(const Mat& X) {
    Mat Xs = X;
    for (long j = 0; j < X.cols(); ++j) {
        Xs.col(j).array() -= Xs.col(j).mean();
        Xs.col(j) /= std::sqrt(Xs.col(j).squaredNorm() / double(X.rows()));
    }
    return Xs;
}

}  // namespace

TEST_CASE("orthonormal soft-thresholding identity") {
    // centered single column with x'x/n = 1
    const long n = 8;
    Mat X(n, 1);
    X << 1, -1, 1, -1, 1, -1, 1, -1;
    Rng rng(3);
    Vec y(n);
    for (long i = 0; i < n; ++i) y(i) = 0.8 * X(i, 0) + 0.1 * rng.normal();
    const double z = X.col(0).dot(y - Vec::Constant(n, y.mean())) / double(n);
    for (const double lambda : {0.0, 0.05, 0.2, 1.0}) {
        const LassoFit fit = solve_lasso(X, y, Family::gaussian(), lambda);
        CHECK(fit.beta(0) == doctest::Approx(soft(z, lambda)).epsilon(1e-9));
    }
}

TEST_CASE("lambda 0 on a full-rank design recovers least squares") {
    Rng rng(5);
    const long n = 60;
    Mat X(n, 3);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        X(i, 2) = rng.normal();
        y(i) = 1.0 + 2.0 * X(i, 0) - X(i, 1) + 0.5 * rng.normal();
    }
    const LassoFit fit = solve_lasso(X, y, Family::gaussian(), 0.0);
    Mat D(n, 4);
    D.col(0).setOnes();
    D.rightCols(3) = X;
    const Vec ols = D.colPivHouseholderQr().solve(y);
    CHECK(fit.intercept == doctest::Approx(ols(0)).epsilon(1e-6));
    for (int j = 0; j < 3; ++j)
        CHECK(fit.beta(j) == doctest::Approx(ols(j + 1)).epsilon(1e-6));
}

TEST_CASE("two correlated columns match the grid-search oracle") {
    Rng rng(9);
    const long n = 80;
    Mat X(n, 2);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        const double u = rng.normal();
        X(i, 0) = u + 0.3 * rng.normal();
        X(i, 1) = u + 0.3 * rng.normal();
        y(i) = 1.2 * X(i, 0) - 0.4 * X(i, 1) + 0.3 * rng.normal();
    }
    const double lambda = 0.1;
    const LassoFit fit = solve_lasso(X, y, Family::gaussian(), lambda);
    const Mat Xs = standardize_cols(X);
    const auto [b1, b2] = grid_oracle_2d(Xs, y, lambda);
    // compare on the standardized scale where the objective is defined
    const double s1 = std::sqrt(X.col(0).squaredNorm() / double(n) -
                                std::pow(X.col(0).mean(), 2));
    const double s2 = std::sqrt(X.col(1).squaredNorm() / double(n) -
                                std::pow(X.col(1).mean(), 2));
    CHECK(fit.beta(0) * s1 == doctest::Approx(b1).epsilon(1e-4));
    CHECK(fit.beta(1) * s2 == doctest::Approx(b2).epsilon(1e-4));
}

TEST_CASE("lambda path is geometric") {
    // construct data with lambda_max very close to 1 by scaling
    Rng rng(13);
    const long n = 50;
    Mat X(n, 2);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
        y(i) = X(i, 0) + rng.normal();
    }
    const Vec path = make_lambda_path(X, y, Family::gaussian(), 3, 0.01);
    CHECK(path.size() == 3);
    CHECK(path(1) == doctest::Approx(path(0) * 0.1).epsilon(1e-12));
    CHECK(path(2) == doctest::Approx(path(0) * 0.01).epsilon(1e-12));
}

TEST_CASE("lambda_max passes the subgradient oracle") {
    Rng rng(17);
    const long n = 100;
    Mat X(n, 4);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < 4; ++j) X(i, j) = rng.normal();
        y(i) = 2.0 * X(i, 1) + rng.normal();
    }
    const Vec path = make_lambda_path(X, y, Family::gaussian(), 100, 1e-4);
    const double lambda_max = path(0);

    // oracle: lambda_max = max_j |x_j'(y - ybar)| / n on standardized columns
    const Mat Xs = standardize_cols(X);
    const double expected = (Xs.transpose() * (y.array() - y.mean()).matrix() / double(n))
                                .cwiseAbs()
                                .maxCoeff();
    CHECK(lambda_max == doctest::Approx(expected).epsilon(1e-10));

    // all-zero exactly at lambda_max, active just below it
    const LassoFit at_max = solve_lasso(X, y, Family::gaussian(), lambda_max);
    CHECK(at_max.beta.cwiseAbs().maxCoeff() == 0.0);
    const LassoFit below = solve_lasso(X, y, Family::gaussian(), 0.99 * lambda_max);
    CHECK(below.beta.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("constant response degenerates to a single lambda") {
    Mat X(10, 2);
    Rng rng(19);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    const Vec y = Vec::Constant(10, 3.25);
    const Vec path = make_lambda_path(X, y, Family::gaussian(), 100, 1e-4);
    REQUIRE(path.size() == 1);
    CHECK(path(0) == 0.0);

    const LassoPath fitted = cv_select(X, y, Family::gaussian(), path, 5, 1);
    CHECK(fitted.cv_index == 0);
    CHECK(fitted.fits[0].beta.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(fitted.fits[0].intercept == doctest::Approx(3.25));
}

TEST_CASE("cross-validated fit recovers a sparse support") {
    Rng rng(23);
    const long n = 200;
    Mat X(n, 10);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < 10; ++j) X(i, j) = rng.normal();
        y(i) = 1.5 * X(i, 2) - 2.0 * X(i, 7) + 0.1 * rng.normal();
    }
    const Vec lambdas = make_lambda_path(X, y, Family::gaussian(), 100, 1e-4);
    const LassoPath path = cv_select(X, y, Family::gaussian(), lambdas, 10, 77);
    const LassoFit& best = path.fits[path.cv_index];
    CHECK(kkt_violation(X, y, Family::gaussian(), best, lambdas(path.cv_index)) < 1e-6);
    CHECK(std::fabs(best.beta(2)) > 0.5);
    CHECK(std::fabs(best.beta(7)) > 0.5);

    // deterministic given the seed
    const LassoPath again = cv_select(X, y, Family::gaussian(), lambdas, 10, 77);
    CHECK(again.cv_index == path.cv_index);
    CHECK((again.fits[again.cv_index].beta - best.beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("KKT conditions hold along the path for all families") {
    Rng rng(29);
    const long n = 120;
    Mat X(n, 6);
    for (long i = 0; i < n; ++i)
        for (int j = 0; j < 6; ++j) X(i, j) = rng.normal();

    SUBCASE("gaussian") {
        Vec y(n);
        for (long i = 0; i < n; ++i) y(i) = X(i, 0) - X(i, 3) + rng.normal();
        const Vec lambdas = make_lambda_path(X, y, Family::gaussian(), 20, 1e-3);
        const LassoPath path = solve_path(X, y, Family::gaussian(), lambdas);
        for (int k = 0; k < path.size(); ++k)
            CHECK(kkt_violation(X, y, Family::gaussian(), path.fits[k], lambdas(k)) < 1e-6);
        CHECK(path.active_sets[0].empty());
    }
    SUBCASE("binomial") {
        Vec y(n);
        for (long i = 0; i < n; ++i) y(i) = rng.bernoulli(expit(X(i, 0) - X(i, 3)));
        const Vec lambdas = make_lambda_path(X, y, Family::binomial(), 20, 1e-3);
        const LassoPath path = solve_path(X, y, Family::binomial(), lambdas);
        for (int k = 0; k < path.size(); ++k)
            CHECK(kkt_violation(X, y, Family::binomial(), path.fits[k], lambdas(k)) < 1e-6);
    }
    SUBCASE("poisson with exposure") {
        Vec expo(n), y(n);
        for (long i = 0; i < n; ++i) {
            expo(i) = rng.uniform(0.5, 2.0);
            const double mu = expo(i) * std::exp(0.5 * X(i, 0) - 0.3 * X(i, 2));
            // crude but deterministic poisson draw via inversion
            double u = rng.uniform01(), p = std::exp(-mu), cdf = p;
            int k = 0;
            while (u > cdf && k < 100) {
                ++k;
                p *= mu / k;
                cdf += p;
            }
            y(i) = k;
        }
        const Family fam = Family::poisson(expo);
        const Vec lambdas = make_lambda_path(X, y, fam, 20, 1e-3);
        const LassoPath path = solve_path(X, y, fam, lambdas);
        for (int k = 0; k < path.size(); ++k)
            CHECK(kkt_violation(X, y, fam, path.fits[k], lambdas(k)) < 1e-6);

        // unpenalized intercept: total fitted events equal total observed
        const LassoFit& last = path.fits[path.size() - 1];
        Vec lp = Vec::Constant(n, last.intercept);
        lp.noalias() += X * last.beta;
        const Vec fitted = (expo.array() * lp.array().exp()).matrix();
        CHECK(fitted.sum() == doctest::Approx(y.sum()).epsilon(1e-6));
    }
}

TEST_CASE("objective is non-increasing across coordinate-descent sweeps") {
    Rng rng(31);
    const long n = 90;
    Mat X(n, 8);
    Vec y(n);
    for (long i = 0; i < n; ++i) {
        for (int j = 0; j < 8; ++j) X(i, j) = rng.normal();
        y(i) = X(i, 0) + 0.5 * X(i, 1) + rng.normal();
    }
    std::vector<double> trace;
    SolveOptions opts;
    opts.objective_trace = &trace;
    solve_lasso(X, y, Family::gaussian(), 0.05, nullptr, opts);
    REQUIRE(trace.size() > 1);
    for (std::size_t k = 1; k < trace.size(); ++k) CHECK(trace[k] <= trace[k - 1] + 1e-12);
}

TEST_CASE("invalid inputs are rejected") {
    Mat X(4, 1);
    X << 1, 2, 3, 4;
    Vec y(4);
    y << 1, 2, std::numeric_limits<double>::quiet_NaN(), 4;
    CHECK_THROWS_AS(solve_lasso(X, y, Family::gaussian(), 0.1), InvalidInput);
    CHECK_THROWS_AS(make_lambda_path(X, y.cwiseAbs(), Family::gaussian(), 1, 0.5), InvalidInput);
    CHECK_THROWS_AS(make_lambda_path(X, y.cwiseAbs(), Family::gaussian(), 10, 1.5), InvalidInput);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "reghal/rng.hpp"
#include "reghal/working_model.hpp"

using namespace reghal;

namespace {

/// Synthetic path over a given basis: hand-written coefficients per lambda.
LassoPath fake_path(const std::vector<Vec>& coefs, const std::vector<double>& lambdas,
                    int cv_index) {
    LassoPath path;
    path.lambdas = Eigen::Map<const Vec>(lambdas.data(), static_cast<long>(lambdas.size()));
    for (const Vec& b : coefs) {
        LassoFit fit;
        fit.intercept = 0.5;
        fit.beta = b;
        path.fits.push_back(fit);
        std::vector<int> active;
        for (long j = 0; j < b.size(); ++j)
            if (b(j) != 0.0) active.push_back(static_cast<int>(j));
        path.active_sets.push_back(active);
    }
    path.cv_index = cv_index;
    return path;
}

std::vector<BasisFunction> toy_basis(int p) {
    std::vector<BasisFunction> basis;
    for (int j = 0; j < p; ++j) basis.push_back({{0}, {double(j) / p}, 1});
    return basis;
}

Vec coef(std::initializer_list<double> v) {
    Vec out(static_cast<long>(v.size()));
    long i = 0;
    for (const double x : v) out(i++) = x;
    return out;
}

}  // namespace

TEST_CASE("extraction keeps nonzero coefficients") {
    const auto path = fake_path({coef({0.0, 1.2, 0.0, -0.3})}, {0.1}, 0);
    const auto model = extract_working_model(path, toy_basis(4), 0, Family::gaussian());
    REQUIRE(model.size() == 2);
    CHECK(model.beta(0) == 1.2);
    CHECK(model.beta(1) == -0.3);
    CHECK(model.basis[0].knots[0] == doctest::Approx(0.25));
}

TEST_CASE("all-zero fit gives an intercept-only model") {
    const auto path = fake_path({coef({0.0, 0.0})}, {0.1}, 0);
    const auto model = extract_working_model(path, toy_basis(2), 0, Family::gaussian());
    CHECK(model.size() == 0);
    CHECK(model.intercept == 0.5);
    Mat X(3, 1);
    X << 0.1, 0.5, 0.9;
    const Mat design = evaluate_design(model.basis, X).values;
    CHECK((model.predict(design).array() == 0.5).all());
}

TEST_CASE("extracted model reproduces full-path predictions at the same lambda") {
    Rng rng(101);
    const int p = 7;
    Vec full = Vec::Zero(p);
    full(1) = 0.7;
    full(4) = -1.1;
    full(6) = 0.2;
    const auto path = fake_path({full}, {0.05}, 0);
    const auto basis = toy_basis(p);
    const auto model = extract_working_model(path, basis, 0, Family::gaussian());
    for (int t = 0; t < 100; ++t) {
        Vec x(1);
        x << rng.uniform(0.0, 1.5);
        double full_pred = path.fits[0].intercept;
        for (int j = 0; j < p; ++j) full_pred += full(j) * basis[j].eval(x.data());
        CHECK(model.predict_row(x) == doctest::Approx(full_pred).epsilon(1e-12));
    }
}

TEST_CASE("undersmooth offset-10 rule") {
    std::vector<Vec> coefs(100, coef({1.0}));
    std::vector<double> lambdas(100);
    for (int k = 0; k < 100; ++k) lambdas[k] = std::pow(0.9, k);

    auto path = fake_path(coefs, lambdas, 40);
    CHECK(undersmooth_select(path, UndersmoothRule::offset_10) == 50);
    path.cv_index = 95;
    CHECK(undersmooth_select(path, UndersmoothRule::offset_10) == 99);
}

TEST_CASE("l1-multiplier rule matches a linear-scan oracle") {
    Rng rng(55);
    std::vector<Vec> coefs;
    std::vector<double> lambdas;
    for (int k = 0; k < 60; ++k) {
        Vec b(3);
        for (int j = 0; j < 3; ++j) b(j) = 0.05 * k * rng.uniform(0.5, 1.0);
        coefs.push_back(b);
        lambdas.push_back(std::pow(0.95, k));
    }
    const int cv = 20;
    const auto path = fake_path(coefs, lambdas, cv);
    const int got = undersmooth_select(path, UndersmoothRule::l1_multiplier_1_61);

    const double target = 1.61 * coefs[cv].lpNorm<1>();
    int expected = cv;
    double gap = std::numeric_limits<double>::infinity();
    for (int k = cv; k < 60; ++k) {
        const double g = std::fabs(coefs[k].lpNorm<1>() - target);
        if (g < gap) {
            gap = g;
            expected = k;
        }
    }
    CHECK(got == expected);
}

TEST_CASE("nested sequence unions active sets") {
    // active sets along the path below cv: {0}, {0,1}, {0,2}
    const auto path = fake_path({coef({1.0, 0.0, 0.0}), coef({1.0, 0.5, 0.0}),
                                 coef({0.8, 0.0, -0.2})},
                                {0.3, 0.2, 0.1}, 0);
    const auto models = build_nested_sequence(path, toy_basis(3), 5, Family::gaussian());
    REQUIRE(models.size() == 3);  // path exhausted before 5
    CHECK(models[0].size() == 1);
    CHECK(models[1].size() == 2);
    CHECK(models[2].size() == 3);
    // coefficients are the zero-padded CV fit
    CHECK(models[2].beta(0) == 1.0);
    CHECK(models[2].beta(1) == 0.0);
    CHECK(models[2].beta(2) == 0.0);
}

TEST_CASE("identical active sets give identical nested models") {
    const auto path = fake_path({coef({1.0, -1.0}), coef({0.9, -0.8}), coef({0.7, -0.5})},
                                {0.3, 0.2, 0.1}, 0);
    const auto models = build_nested_sequence(path, toy_basis(2), 3, Family::gaussian());
    REQUIRE(models.size() == 3);
    for (const auto& m : models) {
        CHECK(m.size() == 2);
        CHECK(m.beta(0) == 1.0);
        CHECK(m.beta(1) == -1.0);
    }
}

TEST_CASE("nesting holds on randomized paths") {
    Rng rng(77);
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<Vec> coefs;
        std::vector<double> lambdas;
        const int p = 8, K = 12;
        for (int k = 0; k < K; ++k) {
            Vec b = Vec::Zero(p);
            for (int j = 0; j < p; ++j)
                if (rng.uniform01() < 0.3) b(j) = rng.normal();
            coefs.push_back(b);
            lambdas.push_back(std::pow(0.9, k));
        }
        const auto path = fake_path(coefs, lambdas, static_cast<int>(rng.next_u64() % 4));
        const auto models = build_nested_sequence(path, toy_basis(p), 6, Family::gaussian());
        for (std::size_t j = 0; j + 1 < models.size(); ++j) {
            for (const auto& b : models[j].basis) {
                const bool found = std::find(models[j + 1].basis.begin(),
                                             models[j + 1].basis.end(),
                                             b) != models[j + 1].basis.end();
                CHECK(found);
            }
        }
    }
}

TEST_CASE("zero_pad carries coefficients and preserves predictions exactly") {
    const auto path = fake_path({coef({1.5, 0.0}), coef({1.5, 0.25})}, {0.2, 0.1}, 0);
    const auto models = build_nested_sequence(path, toy_basis(2), 2, Family::gaussian());
    REQUIRE(models.size() == 2);

    Vec small(1);
    small << 1.5;
    const Vec padded = zero_pad(small, models[0], models[1]);
    REQUIRE(padded.size() == 2);
    CHECK(padded(0) == 1.5);
    CHECK(padded(1) == 0.0);

    // prediction equality, bit level
    Rng rng(31);
    WorkingModel large = models[1];
    large.beta = padded;
    WorkingModel smallm = models[0];
    smallm.beta = small;
    for (int t = 0; t < 100; ++t) {
        Vec x(1);
        x << rng.uniform(-1.0, 2.0);
        CHECK(smallm.predict_row(x) == large.predict_row(x));
    }

    // equal models: identity
    const Vec same = zero_pad(small, models[0], models[0]);
    CHECK(same(0) == 1.5);

    // non-nested: error
    WorkingModel other = models[0];
    other.basis[0].knots[0] = 0.77;
    CHECK_THROWS_AS(zero_pad(small, other, models[1]), InvalidInput);
}

TEST_CASE("json round trip") {
    WorkingModel model;
    model.family = Family::gaussian();
    model.intercept = 0.25;
    model.basis = {{{0, 1}, {0.5, -0.25}, 1}, {{2}, {0.125}, 0}};
    model.beta = coef({1.5, -2.25});
    model.meta.lambda = 0.01;
    model.meta.lambda_index = 42;
    model.meta.selection_rule = "cv";

    const WorkingModel back = working_model_from_json(to_json(model));
    CHECK(back.intercept == model.intercept);
    CHECK(back.beta(0) == model.beta(0));
    CHECK(back.beta(1) == model.beta(1));
    REQUIRE(back.basis.size() == 2);
    CHECK(back.basis[0] == model.basis[0]);
    CHECK(back.basis[1] == model.basis[1]);
    CHECK(back.meta.selection_rule == "cv");
    CHECK(back.family.tag == Family::Tag::gaussian);
}

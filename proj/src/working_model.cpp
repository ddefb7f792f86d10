#include "reghal/working_model.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

namespace reghal {

Vec WorkingModel::predict(const Mat& design_values) const {
    Vec lp = linear(design_values);
    switch (family.tag) {
        case Family::Tag::gaussian:
            return lp;
        case Family::Tag::binomial:
            return lp.unaryExpr([](double e) { return expit(e); });
        case Family::Tag::poisson:
            return lp.array().exp().matrix();
    }
    return lp;
}

double WorkingModel::predict_row(const Vec& x) const {
    double lp = intercept;
    for (std::size_t j = 0; j < basis.size(); ++j) lp += beta(j) * basis[j].eval(x.data());
    switch (family.tag) {
        case Family::Tag::gaussian: return lp;
        case Family::Tag::binomial: return expit(lp);
        case Family::Tag::poisson: return std::exp(lp);
    }
    return lp;
}

WorkingModel extract_working_model(const LassoPath& path, const std::vector<BasisFunction>& basis,
                                   int lambda_index, const Family& family) {
    if (lambda_index < 0 || lambda_index >= path.size())
        throw InvalidInput("extract_working_model: lambda index out of range");
    const LassoFit& fit = path.fits[lambda_index];
    WorkingModel model;
    model.family = Family{family.tag, {}};
    model.intercept = fit.intercept;
    const auto& active = path.active_sets[lambda_index];
    model.basis.reserve(active.size());
    model.beta.resize(static_cast<long>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) {
        model.basis.push_back(basis[active[k]]);
        model.beta(k) = fit.beta(active[k]);
    }
    model.meta.lambda = path.lambdas(lambda_index);
    model.meta.lambda_index = lambda_index;
    model.meta.selection_rule = lambda_index == path.cv_index ? "cv" : "fixed-index";
    return model;
}

int undersmooth_select(const LassoPath& path, UndersmoothRule rule) {
    if (path.cv_index < 0) throw InvalidInput("undersmooth_select: path has no CV index");
    if (rule == UndersmoothRule::offset_10)
        return std::min(path.cv_index + 10, path.size() - 1);

    const double target = 1.61 * path.fits[path.cv_index].beta.lpNorm<1>();
    int best = path.cv_index;
    double best_gap = std::numeric_limits<double>::infinity();
    for (int k = path.cv_index; k < path.size(); ++k) {
        const double gap = std::fabs(path.fits[k].beta.lpNorm<1>() - target);
        if (gap < best_gap) {
            best_gap = gap;
            best = k;
        }
    }
    return best;
}

namespace {

/// Union model: CV-active basis plus additions, coefficients from the CV fit.
WorkingModel union_model(const LassoPath& path, const std::vector<BasisFunction>& basis,
                         const std::vector<int>& column_ids, const Family& family,
                         const std::string& rule) {
    const LassoFit& cv_fit = path.fits[path.cv_index];
    WorkingModel model;
    model.family = Family{family.tag, {}};
    model.intercept = cv_fit.intercept;
    model.basis.reserve(column_ids.size());
    model.beta.resize(static_cast<long>(column_ids.size()));
    for (std::size_t k = 0; k < column_ids.size(); ++k) {
        model.basis.push_back(basis[column_ids[k]]);
        model.beta(k) = cv_fit.beta(column_ids[k]);
    }
    model.meta.lambda = path.lambdas(path.cv_index);
    model.meta.lambda_index = path.cv_index;
    model.meta.selection_rule = rule;
    return model;
}

}  // namespace

WorkingModel extract_undersmoothed_model(const LassoPath& path,
                                         const std::vector<BasisFunction>& basis,
                                         int lambda_index, const Family& family) {
    if (path.cv_index < 0) throw InvalidInput("extract_undersmoothed_model: no CV index");
    std::vector<int> ids = path.active_sets[path.cv_index];
    std::vector<char> seen(basis.size(), 0);
    for (const int j : ids) seen[j] = 1;
    for (const int j : path.active_sets[lambda_index])
        if (!seen[j]) {
            seen[j] = 1;
            ids.push_back(j);
        }
    return union_model(path, basis, ids, family, "undersmoothed");
}

std::vector<WorkingModel> build_nested_sequence(const LassoPath& path,
                                                const std::vector<BasisFunction>& basis,
                                                int max_models, const Family& family) {
    if (max_models < 1) throw InvalidInput("build_nested_sequence: max_models must be >= 1");
    if (path.cv_index < 0) throw InvalidInput("build_nested_sequence: path has no CV index");

    std::vector<WorkingModel> models;
    std::vector<int> ids = path.active_sets[path.cv_index];
    std::vector<char> seen(basis.size(), 0);
    for (const int j : ids) seen[j] = 1;
    models.push_back(union_model(path, basis, ids, family, "nested-1"));

    for (int j = 1; j < max_models; ++j) {
        const int idx = path.cv_index + j;
        if (idx >= path.size()) break;  // path exhausted, shorter ladder
        for (const int col : path.active_sets[idx])
            if (!seen[col]) {
                seen[col] = 1;
                ids.push_back(col);
            }
        models.push_back(union_model(path, basis, ids, family,
                                     "nested-" + std::to_string(j + 1)));
    }
    return models;
}

Vec zero_pad(const Vec& beta_small, const WorkingModel& model_small,
             const WorkingModel& model_large) {
    if (beta_small.size() != model_small.size())
        throw InvalidInput("zero_pad: coefficient length mismatch");
    std::map<BasisFunction, long> position;
    for (long k = 0; k < model_large.size(); ++k) position[model_large.basis[k]] = k;
    Vec out = Vec::Zero(model_large.size());
    for (long k = 0; k < model_small.size(); ++k) {
        const auto it = position.find(model_small.basis[k]);
        if (it == position.end()) throw InvalidInput("zero_pad: bases are not nested");
        out(it->second) = beta_small(k);
    }
    return out;
}

std::string to_json(const WorkingModel& model) {
    nlohmann::json j;
    j["family"] = model.family.name();
    j["intercept"] = model.intercept;
    j["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& b : model.basis)
        terms.push_back({{"vars", b.vars}, {"knots", b.knots}, {"order", b.order}});
    j["basis"] = terms;
    j["meta"] = {{"lambda", model.meta.lambda},
                 {"lambda_index", model.meta.lambda_index},
                 {"selection_rule", model.meta.selection_rule}};
    return j.dump(2);
}

WorkingModel working_model_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    WorkingModel model;
    const std::string fam = j.at("family").get<std::string>();
    if (fam == "gaussian") model.family = Family::gaussian();
    else if (fam == "binomial") model.family = Family::binomial();
    else if (fam == "poisson") model.family = Family::poisson();
    else throw InvalidInput("working_model_from_json: unknown family " + fam);
    model.intercept = j.at("intercept").get<double>();
    const auto beta = j.at("beta").get<std::vector<double>>();
    model.beta = Eigen::Map<const Vec>(beta.data(), static_cast<long>(beta.size()));
    for (const auto& term : j.at("basis")) {
        BasisFunction b;
        b.vars = term.at("vars").get<std::vector<int>>();
        b.knots = term.at("knots").get<std::vector<double>>();
        b.order = term.at("order").get<int>();
        model.basis.push_back(std::move(b));
    }
    if (model.beta.size() != model.size())
        throw InvalidInput("working_model_from_json: beta/basis length mismatch");
    if (j.contains("meta")) {
        model.meta.lambda = j["meta"].value("lambda", 0.0);
        model.meta.lambda_index = j["meta"].value("lambda_index", -1);
        model.meta.selection_rule = j["meta"].value("selection_rule", "");
    }
    return model;
}

}  // namespace reghal

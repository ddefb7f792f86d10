#pragma once

#include <string>
#include <vector>

#include "reghal/basis.hpp"
#include "reghal/lasso.hpp"
#include "reghal/types.hpp"

namespace reghal {

/// Finite-dimensional model spanned by an active HAL basis:
///   link(E[Y|x]) = intercept + sum_j beta_j * phi_j(x).
/// The object every targeting step mutates (through its coefficients).
struct WorkingModel {
    std::vector<BasisFunction> basis;
    double intercept = 0.0;
    Vec beta;
    Family family = Family::gaussian();

    struct Meta {
        double lambda = 0.0;
        int lambda_index = -1;
        std::string selection_rule;  // "cv", "offset-10", "l1-multiplier-1.61", ...
    } meta;

    int size() const { return static_cast<int>(basis.size()); }

    /// Linear predictor on a design evaluated for this basis (columns match).
    Vec linear(const Mat& design_values) const {
        Vec lp = Vec::Constant(design_values.rows(), intercept);
        if (beta.size() > 0) lp += design_values * beta;
        return lp;
    }
    /// Mean-scale prediction (identity / expit / exp by family).
    Vec predict(const Mat& design_values) const;
    double predict_row(const Vec& x) const;
};

enum class UndersmoothRule { offset_10, l1_multiplier_1_61 };
enum class WorkingModelRule { cv, undersmoothed };

/// Basis and coefficients with nonzero fit at path index `lambda_index`.
/// An all-zero fit yields a valid intercept-only model.
WorkingModel extract_working_model(const LassoPath& path, const std::vector<BasisFunction>& basis,
                                   int lambda_index, const Family& family);

/// Path index of the undersmoothed fit:
///  - offset_10: ten lambdas below the CV choice, or the last available;
///  - l1_multiplier_1_61: ||beta||_1 closest to 1.61 * ||beta_cv||_1 among
///    indices at or past the CV index.
int undersmooth_select(const LassoPath& path, UndersmoothRule rule);

/// Model spanned by the CV active set united with the active set at
/// `lambda_index`, coefficients initialized from the CV fit (zero-padded).
WorkingModel extract_undersmoothed_model(const LassoPath& path,
                                         const std::vector<BasisFunction>& basis,
                                         int lambda_index, const Family& family);

/// Nested sequence M_1 = CV model, M_j = M_{j-1} plus the new active basis at
/// the j-th lambda below the CV index. Coefficients are the zero-padded CV
/// fit. Shorter than max_models when the path runs out.
std::vector<WorkingModel> build_nested_sequence(const LassoPath& path,
                                                const std::vector<BasisFunction>& basis,
                                                int max_models, const Family& family);

/// Carry coefficients from a nested submodel into `model_large` by basis
/// identity; new positions get zero. Predictions are preserved exactly.
Vec zero_pad(const Vec& beta_small, const WorkingModel& model_small,
             const WorkingModel& model_large);

std::string to_json(const WorkingModel& model);
WorkingModel working_model_from_json(const std::string& text);

}  // namespace reghal

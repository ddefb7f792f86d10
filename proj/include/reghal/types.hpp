#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace reghal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Thrown when an input violates a documented precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an estimation step cannot produce a result
/// (degenerate data, positivity failure, missing events, ...).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loss family for the penalized solvers. Poisson optionally carries a
/// per-row exposure (multiplicative, enters as a log offset).
struct Family {
    enum class Tag { gaussian, binomial, poisson };
    Tag tag = Tag::gaussian;
    Vec exposure;  // poisson only; empty means unit exposure

    static Family gaussian() { return Family{Tag::gaussian, {}}; }
    static Family binomial() { return Family{Tag::binomial, {}}; }
    static Family poisson(Vec exposure = {}) {
        if (exposure.size() > 0 && (exposure.array() <= 0.0).any())
            throw InvalidInput("poisson exposures must be positive");
        return Family{Tag::poisson, std::move(exposure)};
    }

    const char* name() const {
        switch (tag) {
            case Tag::gaussian: return "gaussian";
            case Tag::binomial: return "binomial";
            case Tag::poisson: return "poisson";
        }
        return "?";
    }
};

/// Inverse standard normal CDF (Wichura's PPND16). Accurate to ~1e-15.
double normal_quantile(double p);

/// Standard normal CDF.
double normal_cdf(double x);

inline double expit(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace reghal

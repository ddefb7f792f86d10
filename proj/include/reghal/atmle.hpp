#pragma once

#include "reghal/ate.hpp"

namespace reghal {

struct LadderEntry {
    double psi = 0.0;
    WaldCi ci;             // nonparametric-EIC interval, used by the selector
    int iterations = 0;
    bool converged = true;
    int basis_count = 0;
};

struct ModelLadderResult {
    std::vector<LadderEntry> ladder;
    int j_star = 1;  // 1-based selected index
    std::string selection_rule;
    double psi() const { return ladder[j_star - 1].psi; }
    const WaldCi& ci() const { return ladder[j_star - 1].ci; }
};

/// Scan j = 2..K; return j-1 at the first j where the estimate rises while
/// the lower bound falls, or the estimate falls while the upper bound rises;
/// otherwise K. Ties do not trigger a violation.
int plateau_select(const std::vector<double>& psis,
                   const std::vector<std::pair<double, double>>& cis);

struct AtmleConfig {
    AteConfig base;
    int max_models = 20;
    AteTargeting targeting = AteTargeting::projection;
};

/// Cold-start ladder: target independently in each nested model from the
/// zero-padded CV coefficients, then apply the plateau selector.
ModelLadderResult atmle_estimate(const AteData& data, const AtmleConfig& config);

/// Bridged ladder: warm-start each model from the previous targeted solution
/// and stop at the first plateau violation.
ModelLadderResult bridged_atmle(const AteData& data, const AtmleConfig& config);

}  // namespace reghal

#include "reghal/atmle.hpp"

#include <iostream>

namespace reghal {

int plateau_select(const std::vector<double>& psis,
                   const std::vector<std::pair<double, double>>& cis) {
    if (psis.empty() || psis.size() != cis.size())
        throw InvalidInput("plateau_select: psis and cis must have equal nonzero length");
    const int K = static_cast<int>(psis.size());
    for (int j = 2; j <= K; ++j) {
        const double psi = psis[j - 1], psi_prev = psis[j - 2];
        const double L = cis[j - 1].first, L_prev = cis[j - 2].first;
        const double U = cis[j - 1].second, U_prev = cis[j - 2].second;
        if (psi > psi_prev && L < L_prev) return j - 1;  // estimate up, lower bound down
        if (psi < psi_prev && U > U_prev) return j - 1;  // estimate down, upper bound up
    }
    return K;
}

namespace {

// The selector consumes the nonparametric-EIC interval only; skip the
// projection/delta interval variants on ladder models.
LadderEntry entry_for(const AtePipeline& pipeline, const AtePipeline::ModelContext& ctx,
                      const AtePipeline::RunOutput& run) {
    const WorkingModel& m = run.model;
    const Vec contrast = m.size() > 0 ? Vec((ctx.design_a1 - ctx.design_a0) * m.beta)
                                      : Vec(Vec::Zero(pipeline.data().n()));
    LadderEntry e;
    e.psi = contrast.mean();
    const Vec residual = pipeline.data().Y - m.linear(ctx.design);
    e.ci = wald_ci(e.psi, nonparametric_eic_ate(pipeline.clever(), residual, contrast, e.psi));
    e.iterations = run.iterations;
    e.converged = run.converged;
    e.basis_count = m.size();
    return e;
}

}  // namespace

ModelLadderResult atmle_estimate(const AteData& data, const AtmleConfig& config) {
    AtePipeline pipeline(data, config.base);
    const std::vector<WorkingModel> models = build_nested_sequence(
        pipeline.outcome_path(), pipeline.full_basis(), config.max_models, Family::gaussian());

    ModelLadderResult result;
    result.selection_rule = "plateau";
    for (std::size_t j = 0; j < models.size(); ++j) {
        try {
            const auto ctx = pipeline.make_context(models[j]);
            const auto run = pipeline.target_in_context(ctx, config.targeting);
            result.ladder.push_back(entry_for(pipeline, ctx, run));
        } catch (const std::exception& e) {
            // truncate the ladder at the last successful model
            std::cerr << "atmle: model " << (j + 1) << " failed: " << e.what() << "\n";
            break;
        }
    }
    if (result.ladder.empty()) throw EstimationError("atmle_estimate: no model succeeded");

    std::vector<double> psis;
    std::vector<std::pair<double, double>> cis;
    for (const auto& e : result.ladder) {
        psis.push_back(e.psi);
        cis.emplace_back(e.ci.lower, e.ci.upper);
    }
    result.j_star = plateau_select(psis, cis);
    return result;
}

ModelLadderResult bridged_atmle(const AteData& data, const AtmleConfig& config) {
    AtePipeline pipeline(data, config.base);
    const std::vector<WorkingModel> models = build_nested_sequence(
        pipeline.outcome_path(), pipeline.full_basis(), config.max_models, Family::gaussian());

    ModelLadderResult result;
    result.selection_rule = "bridged-plateau";
    WorkingModel previous;
    for (std::size_t j = 0; j < models.size(); ++j) {
        WorkingModel start = models[j];
        if (j > 0) start.beta = zero_pad(previous.beta, previous, models[j]);
        AtePipeline::RunOutput run;
        try {
            const auto ctx_start = [&] {
                auto c = pipeline.make_context(models[j]);
                c.model = start;
                return c;
            }();
            run = pipeline.target_in_context(ctx_start, config.targeting);
            result.ladder.push_back(entry_for(pipeline, ctx_start, run));
        } catch (const std::exception& e) {
            std::cerr << "bridged atmle: model " << (j + 1) << " failed: " << e.what() << "\n";
            break;
        }
        previous = run.model;

        if (result.ladder.size() >= 2) {
            const auto& cur = result.ladder.back();
            const auto& prev = result.ladder[result.ladder.size() - 2];
            const bool violation =
                (cur.psi > prev.psi && cur.ci.lower < prev.ci.lower) ||
                (cur.psi < prev.psi && cur.ci.upper > prev.ci.upper);
            if (violation) {  // early stop, j* = j-1
                result.j_star = static_cast<int>(result.ladder.size()) - 1;
                return result;
            }
        }
    }
    if (result.ladder.empty()) throw EstimationError("bridged_atmle: no model succeeded");
    result.j_star = static_cast<int>(result.ladder.size());
    return result;
}

}  // namespace reghal

#pragma once

#include <functional>
#include <optional>

#include "reghal/ate.hpp"
#include "reghal/atmle.hpp"
#include "reghal/survival.hpp"

namespace reghal {

enum class DgpTag { ate_dgp1, ate_dgp2, survival_beta };

struct DgpSpec {
    DgpTag tag = DgpTag::ate_dgp1;
    long n = 500;
    std::uint64_t seed = 1;
};

AteData gen_dgp1(long n, std::uint64_t seed);
AteData gen_dgp2(long n, std::uint64_t seed);
SurvData gen_surv(long n, std::uint64_t seed);

/// DGP 1 has a closed-form truth; DGP 2 is a cached 1e7-draw Monte-Carlo
/// value under a fixed oracle seed.
double true_ate(DgpTag tag);
double true_survival(double t);

/// One row of the raw results table (one per estimator x target).
struct ResultRow {
    int rep = 0;
    std::string estimator;
    long n = 0;
    std::string targeting;
    std::string target_id;       // "ate" or the grid time
    double psi_hat = 0.0;
    double truth = 0.0;
    std::optional<double> se_np, se_proj, se_proj_cv, se_delta;
    int iterations = 0;
    bool converged = true;
    std::optional<int> selected_j;
    double time_ms = 0.0;
};

struct FailureRecord {
    int rep = 0;
    std::string estimator;
    std::string message;
};

struct RawResults {
    std::vector<ResultRow> rows;
    std::vector<FailureRecord> failures;
};

/// An estimator to run per replication: name + callable producing its result
/// rows (the factory bakes in the dataset and derived seed). Used by the CLI
/// and injectable in tests.
struct EstimatorSpec {
    std::string name;
    std::string targeting;
    std::function<std::vector<ResultRow>(int rep)> run;
};

struct RepConfig {
    DgpSpec dgp;
    int reps = 1;
    int threads = 1;
    std::uint64_t base_seed = 1;
};

/// Replication engine. Dataset r comes from derive_seed(base, "data", r);
/// estimator internals from derive_seed(base, "est", r). Results are
/// identical for any thread count; failures never abort the study.
RawResults run_replications(const RepConfig& config,
                            const std::function<std::vector<EstimatorSpec>(
                                const AteData*, const SurvData*, std::uint64_t)>& make_estimators);

struct SummaryRow {
    std::string estimator;
    long n = 0;
    std::string targeting;
    int reps = 0;
    double abs_bias = 0.0, std_err = 0.0, mse = 0.0;
    std::optional<double> cov_np, width_np;
    std::optional<double> cov_proj, width_proj;
    std::optional<double> cov_proj_cv, width_proj_cv;
    std::optional<double> cov_delta, width_delta;
    double oracle_cov = 0.0, oracle_width = 0.0;
    std::optional<double> mean_selected_j;
    std::optional<int> modal_selected_j;
};

/// Per-(estimator, n, targeting) metrics. Survival metrics are computed per
/// grid point and then averaged across the grid. Abs_Bias is the bias of the
/// mean, |mean(psi_hat) - truth|.
std::vector<SummaryRow> summarize(const RawResults& raw);

std::string raw_csv(const RawResults& raw);
RawResults parse_raw_csv(const std::string& text);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_table(const std::vector<SummaryRow>& rows);

/// Ready-made estimator sets used by the CLI.
std::vector<EstimatorSpec> ate_estimators(const AteData& data, const AteConfig& base,
                                          const std::vector<AteTargeting>& targetings,
                                          double truth, std::uint64_t est_seed);
std::vector<EstimatorSpec> survival_estimators(const SurvData& data, const SurvConfig& base,
                                               const std::vector<SurvTargeting>& targetings,
                                               std::uint64_t est_seed);
std::vector<EstimatorSpec> atmle_estimators(const AteData& data, const AtmleConfig& base,
                                            const std::vector<AteTargeting>& targetings,
                                            double truth, std::uint64_t est_seed);

}  // namespace reghal

#include "reghal/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "reghal/rng.hpp"
#include "reghal/simstudy.hpp"

namespace reghal {

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw EstimationError("cannot write " + path);
    out << content;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw EstimationError("cannot read " + path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw EstimationError("empty csv: " + path);
    return rows;
}

AteData read_ate_csv(const std::string& path) {
    const auto rows = read_csv(path);
    const auto& header = rows[0];
    int a_col = -1, y_col = -1;
    std::vector<std::pair<int, int>> w_cols;  // (w index, column)
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h == "A" || h == "a") a_col = static_cast<int>(c);
        else if (h == "Y" || h == "y") y_col = static_cast<int>(c);
        else if ((h.size() > 1) && (h[0] == 'W' || h[0] == 'w'))
            w_cols.emplace_back(std::stoi(h.substr(1)), static_cast<int>(c));
    }
    if (a_col < 0 || y_col < 0 || w_cols.empty())
        throw EstimationError("csv must have header W1..Wd, A, Y");
    std::sort(w_cols.begin(), w_cols.end());
    const long n = static_cast<long>(rows.size()) - 1;
    AteData data;
    data.W.resize(n, static_cast<long>(w_cols.size()));
    data.A.resize(n);
    data.Y.resize(n);
    for (long i = 0; i < n; ++i) {
        const auto& row = rows[i + 1];
        for (std::size_t k = 0; k < w_cols.size(); ++k)
            data.W(i, static_cast<long>(k)) = std::stod(row.at(w_cols[k].second));
        data.A(i) = std::stod(row.at(a_col));
        data.Y(i) = std::stod(row.at(y_col));
    }
    return data;
}

SurvData read_surv_csv(const std::string& path) {
    const auto rows = read_csv(path);
    const auto& header = rows[0];
    int t_col = -1, e_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "time") t_col = static_cast<int>(c);
        if (header[c] == "event") e_col = static_cast<int>(c);
    }
    if (t_col < 0 || e_col < 0) throw EstimationError("csv must have header time,event");
    const long n = static_cast<long>(rows.size()) - 1;
    SurvData data;
    data.times.resize(n);
    data.events.resize(n);
    for (long i = 0; i < n; ++i) {
        data.times(i) = std::stod(rows[i + 1].at(t_col));
        data.events(i) = std::stoi(rows[i + 1].at(e_col));
    }
    return data;
}

std::string fmtd(double v, const char* spec = "%.12g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

AteTargeting parse_ate_targeting(const std::string& s) {
    if (s == "relaxed") return AteTargeting::relaxed;
    if (s == "projection") return AteTargeting::projection;
    if (s == "delta") return AteTargeting::delta;
    if (s == "direct") return AteTargeting::direct;
    if (s == "standard") return AteTargeting::standard;
    throw InvalidInput("unknown targeting: " + s);
}

SurvTargeting parse_surv_targeting(const std::string& s) {
    if (s == "relaxed") return SurvTargeting::relaxed;
    if (s == "projection") return SurvTargeting::projection;
    if (s == "delta") return SurvTargeting::delta;
    throw InvalidInput("unknown survival targeting: " + s);
}

struct CommonOpts {
    long n = 500;
    int reps = 10;
    std::uint64_t seed = 1;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    std::string out = "study";
    std::vector<std::string> targeting;
};

void add_common(CLI::App* sub, CommonOpts& o) {
    sub->add_option("--n", o.n, "sample size per replication")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--reps", o.reps, "number of replications")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--seed", o.seed, "base seed; all randomness derives from it")
        ->capture_default_str();
    sub->add_option("--threads", o.threads, "replication-level parallelism")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--out", o.out, "output path prefix")->capture_default_str();
    sub->set_config("--config");
}

void add_ate_tuning(CLI::App* sub, AteConfig& c) {
    sub->add_option("--proj-lambda", c.proj_lambda, "projection lasso penalty")
        ->capture_default_str();
    sub->add_option("--ridge-eta", c.ridge_eta, "ridge added to the empirical Fisher")
        ->capture_default_str();
    sub->add_option("--step", c.step, "targeting gradient step size")->capture_default_str();
    sub->add_option("--max-iter", c.max_iter, "targeting iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--knots", c.max_knots, "quantile knots per covariate (0 = n/20)")
        ->capture_default_str();
    sub->add_option("--order", c.basis_order, "basis order (0 indicator, 1 spline)")
        ->check(CLI::Range(0, 1))
        ->capture_default_str();
    sub->add_option("--trunc-lo", c.trunc_lo, "standard-TMLE propensity floor")
        ->capture_default_str();
    sub->add_option("--trunc-hi", c.trunc_hi, "standard-TMLE propensity cap")
        ->capture_default_str();
}

std::string meta_json(const std::string& command, const std::vector<std::string>& targeting,
                      const CommonOpts& common, double proj_lambda, double ridge_eta,
                      double step, int max_iter) {
    std::ostringstream out;
    out << "{\n  \"command\": \"" << command << "\",\n  \"n\": " << common.n
        << ",\n  \"reps\": " << common.reps << ",\n  \"seed\": " << common.seed
        << ",\n  \"targeting\": [";
    for (std::size_t i = 0; i < targeting.size(); ++i)
        out << (i ? ", " : "") << '"' << targeting[i] << '"';
    out << "],\n  \"proj_lambda\": " << fmtd(proj_lambda)
        << ",\n  \"ridge_eta\": " << fmtd(ridge_eta) << ",\n  \"step\": " << fmtd(step)
        << ",\n  \"max_iter\": " << max_iter
        << ",\n  \"abs_bias_definition\": \"bias-of-mean\""
        << ",\n  \"eic_centering\": \"empirical (centered before variance)\""
        << ",\n  \"np_eic_propensity\": \"untruncated\"\n}\n";
    return out.str();
}

int finish_study(const RawResults& raw, const std::string& out_prefix,
                 const std::string& meta) {
    const auto summary = summarize(raw);
    write_file(out_prefix + "_raw.csv", raw_csv(raw));
    write_file(out_prefix + "_summary.csv", summary_csv(summary));
    const std::string table = summary_table(summary);
    write_file(out_prefix + "_summary.txt", table);
    write_file(out_prefix + "_meta.json", meta);
    std::cout << table;
    if (!raw.failures.empty()) {
        std::cerr << raw.failures.size() << " replication failure(s):\n";
        for (const auto& f : raw.failures)
            std::cerr << "  rep " << f.rep << " " << f.estimator << ": " << f.message << "\n";
        return 3;
    }
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Regularized TMLE in HAL working models: estimators and simulation studies"};
    app.require_subcommand(1);

    // --- simulate-ate ------------------------------------------------------
    auto* sim_ate = app.add_subcommand("simulate-ate", "ATE simulation study");
    CommonOpts ate_common;
    AteConfig ate_config;
    int ate_dgp = 1;
    std::string ate_rule = "cv";
    ate_common.targeting = {"relaxed", "projection", "delta"};
    add_common(sim_ate, ate_common);
    sim_ate->add_option("--dgp", ate_dgp, "data generating process")
        ->check(CLI::Range(1, 2))
        ->capture_default_str();
    sim_ate->add_option("--targeting", ate_common.targeting, "targeting variants")
        ->check(CLI::IsMember({"relaxed", "projection", "delta", "direct", "standard"}))
        ->capture_default_str();
    sim_ate->add_option("--working-model", ate_rule, "working-model rule")
        ->check(CLI::IsMember({"cv", "undersmoothed"}))
        ->capture_default_str();
    add_ate_tuning(sim_ate, ate_config);

    // --- simulate-survival -------------------------------------------------
    auto* sim_surv = app.add_subcommand("simulate-survival", "survival-curve simulation study");
    CommonOpts surv_common;
    surv_common.targeting = {"relaxed", "projection", "delta"};
    SurvConfig surv_config;
    std::string surv_rule = "cv";
    add_common(sim_surv, surv_common);
    sim_surv->add_option("--targeting", surv_common.targeting, "targeting variants")
        ->check(CLI::IsMember({"relaxed", "projection", "delta"}))
        ->capture_default_str();
    sim_surv->add_option("--working-model", surv_rule, "working-model rule")
        ->check(CLI::IsMember({"cv", "undersmoothed"}))
        ->capture_default_str();
    sim_surv->add_option("--grid-size", surv_config.grid_size, "time-grid size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_surv->add_option("--proj-lambda", surv_config.proj_lambda, "projection lasso penalty")
        ->capture_default_str();
    sim_surv->add_option("--ridge-eta", surv_config.ridge_eta, "ridge on the empirical Fisher")
        ->capture_default_str();
    sim_surv->add_option("--step", surv_config.step, "targeting gradient step size")
        ->capture_default_str();
    sim_surv->add_option("--max-iter", surv_config.max_iter, "targeting iteration cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sim_surv->add_option("--band-draws", surv_config.band_draws, "simultaneous-band draws")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();

    // --- simulate-atmle ----------------------------------------------------
    auto* sim_atmle = app.add_subcommand("simulate-atmle", "adaptive-TMLE simulation study");
    CommonOpts atmle_common;
    atmle_common.targeting = {"relaxed", "projection", "delta"};
    AtmleConfig atmle_config;
    int atmle_dgp = 1;
    add_common(sim_atmle, atmle_common);
    sim_atmle->add_option("--dgp", atmle_dgp, "data generating process")
        ->check(CLI::Range(1, 2))
        ->capture_default_str();
    sim_atmle->add_option("--targeting", atmle_common.targeting, "targeting variants")
        ->check(CLI::IsMember({"relaxed", "projection", "delta"}))
        ->capture_default_str();
    sim_atmle->add_option("--max-models", atmle_config.max_models, "nested ladder length")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    add_ate_tuning(sim_atmle, atmle_config.base);

    // --- estimate-ate ------------------------------------------------------
    auto* est_ate = app.add_subcommand("estimate-ate", "estimate the ATE from a csv");
    std::string est_ate_csv;
    std::vector<std::string> est_ate_targeting = {"projection"};
    std::string est_ate_rule = "cv";
    std::uint64_t est_ate_seed = 1;
    std::string est_ate_model_out, est_ate_out;
    AteConfig est_ate_config;
    est_ate->add_option("csv", est_ate_csv, "input csv with header W1..Wd,A,Y")->required();
    est_ate->add_option("--targeting", est_ate_targeting, "targeting variants")
        ->check(CLI::IsMember({"relaxed", "projection", "delta", "direct", "standard"}))
        ->capture_default_str();
    est_ate->add_option("--working-model", est_ate_rule, "working-model rule")
        ->check(CLI::IsMember({"cv", "undersmoothed"}))
        ->capture_default_str();
    est_ate->add_option("--seed", est_ate_seed, "seed for CV folds")->capture_default_str();
    est_ate->add_option("--model-out", est_ate_model_out, "write the working model as JSON");
    est_ate->add_option("--out", est_ate_out, "write results csv");
    add_ate_tuning(est_ate, est_ate_config);
    est_ate->set_config("--config");

    // --- estimate-survival -------------------------------------------------
    auto* est_surv = app.add_subcommand("estimate-survival",
                                        "estimate a survival curve from a csv");
    std::string est_surv_csv, est_surv_out, est_surv_targeting = "projection";
    std::string est_surv_rule = "cv";
    SurvConfig est_surv_config;
    est_surv->add_option("csv", est_surv_csv, "input csv with header time,event")->required();
    est_surv->add_option("--targeting", est_surv_targeting, "targeting variant")
        ->check(CLI::IsMember({"relaxed", "projection", "delta"}))
        ->capture_default_str();
    est_surv->add_option("--working-model", est_surv_rule, "working-model rule")
        ->check(CLI::IsMember({"cv", "undersmoothed"}))
        ->capture_default_str();
    est_surv->add_option("--grid-size", est_surv_config.grid_size, "time-grid size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    est_surv->add_option("--seed", est_surv_config.seed, "seed")->capture_default_str();
    est_surv->add_option("--proj-lambda", est_surv_config.proj_lambda, "projection penalty")
        ->capture_default_str();
    est_surv->add_option("--ridge-eta", est_surv_config.ridge_eta, "Fisher ridge")
        ->capture_default_str();
    est_surv->add_option("--step", est_surv_config.step, "step size")->capture_default_str();
    est_surv->add_option("--max-iter", est_surv_config.max_iter, "iteration cap")
        ->capture_default_str();
    est_surv->add_option("--band-draws", est_surv_config.band_draws, "band draws")
        ->capture_default_str();
    est_surv->add_option("--out", est_surv_out, "write per-grid-point csv");
    est_surv->set_config("--config");

    // --- summarize ---------------------------------------------------------
    auto* summ = app.add_subcommand("summarize", "summarize a raw results csv");
    std::string summ_csv_path, summ_out;
    summ->add_option("csv", summ_csv_path, "raw results csv from simulate-*")->required();
    summ->add_option("--out", summ_out, "write summary csv");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim_ate->parsed()) {
            ate_config.rule = ate_rule == "cv" ? WorkingModelRule::cv
                                               : WorkingModelRule::undersmoothed;
            std::vector<AteTargeting> targetings;
            for (const auto& t : ate_common.targeting) targetings.push_back(parse_ate_targeting(t));
            const DgpTag tag = ate_dgp == 1 ? DgpTag::ate_dgp1 : DgpTag::ate_dgp2;
            const double truth = true_ate(tag);
            RepConfig rep{{tag, ate_common.n, 0}, ate_common.reps, ate_common.threads,
                          ate_common.seed};
            const RawResults raw = run_replications(
                rep, [&](const AteData* ate, const SurvData*, std::uint64_t est_seed) {
                    return ate_estimators(*ate, ate_config, targetings, truth, est_seed);
                });
            return finish_study(raw, ate_common.out,
                                meta_json("simulate-ate", ate_common.targeting, ate_common,
                                          ate_config.proj_lambda, ate_config.ridge_eta,
                                          ate_config.step, ate_config.max_iter));
        }

        if (sim_surv->parsed()) {
            surv_config.rule = surv_rule == "cv" ? WorkingModelRule::cv
                                                 : WorkingModelRule::undersmoothed;
            std::vector<SurvTargeting> targetings;
            for (const auto& t : surv_common.targeting)
                targetings.push_back(parse_surv_targeting(t));
            RepConfig rep{{DgpTag::survival_beta, surv_common.n, 0}, surv_common.reps,
                          surv_common.threads, surv_common.seed};
            const RawResults raw = run_replications(
                rep, [&](const AteData*, const SurvData* surv, std::uint64_t est_seed) {
                    return survival_estimators(*surv, surv_config, targetings, est_seed);
                });
            return finish_study(raw, surv_common.out,
                                meta_json("simulate-survival", surv_common.targeting,
                                          surv_common, surv_config.proj_lambda,
                                          surv_config.ridge_eta, surv_config.step,
                                          surv_config.max_iter));
        }

        if (sim_atmle->parsed()) {
            std::vector<AteTargeting> targetings;
            for (const auto& t : atmle_common.targeting)
                targetings.push_back(parse_ate_targeting(t));
            const DgpTag tag = atmle_dgp == 1 ? DgpTag::ate_dgp1 : DgpTag::ate_dgp2;
            const double truth = true_ate(tag);
            RepConfig rep{{tag, atmle_common.n, 0}, atmle_common.reps, atmle_common.threads,
                          atmle_common.seed};
            const RawResults raw = run_replications(
                rep, [&](const AteData* ate, const SurvData*, std::uint64_t est_seed) {
                    return atmle_estimators(*ate, atmle_config, targetings, truth, est_seed);
                });
            return finish_study(raw, atmle_common.out,
                                meta_json("simulate-atmle", atmle_common.targeting,
                                          atmle_common, atmle_config.base.proj_lambda,
                                          atmle_config.base.ridge_eta, atmle_config.base.step,
                                          atmle_config.base.max_iter));
        }

        if (est_ate->parsed()) {
            est_ate_config.rule = est_ate_rule == "cv" ? WorkingModelRule::cv
                                                       : WorkingModelRule::undersmoothed;
            est_ate_config.seed = est_ate_seed;
            const AteData data = read_ate_csv(est_ate_csv);
            AtePipeline pipeline(data, est_ate_config);
            std::ostringstream csv;
            csv << "targeting,psi,np_lo,np_hi,se_np,proj_lo,proj_hi,se_proj,proj_cv_lo,"
                   "proj_cv_hi,se_proj_cv,delta_lo,delta_hi,se_delta,iterations,converged\n";
            for (const auto& t : est_ate_targeting) {
                const AteResult res = pipeline.run(parse_ate_targeting(t));
                auto ci = [&](CiVariant v) -> std::string {
                    const auto it = res.cis.find(v);
                    if (it == res.cis.end()) return ",,";
                    return fmtd(it->second.lower) + "," + fmtd(it->second.upper) + "," +
                           fmtd(it->second.se);
                };
                csv << t << ',' << fmtd(res.psi) << ',' << ci(CiVariant::np) << ','
                    << ci(CiVariant::proj) << ',' << ci(CiVariant::proj_cv) << ','
                    << ci(CiVariant::delta) << ',' << res.iterations << ','
                    << (res.converged ? 1 : 0) << '\n';
                std::cout << t << ": psi = " << fmtd(res.psi);
                if (res.cis.count(CiVariant::np))
                    std::cout << "  95% CI (np) [" << fmtd(res.cis.at(CiVariant::np).lower)
                              << ", " << fmtd(res.cis.at(CiVariant::np).upper) << "]";
                std::cout << "\n";
            }
            if (!est_ate_out.empty()) write_file(est_ate_out, csv.str());
            if (!est_ate_model_out.empty())
                write_file(est_ate_model_out, to_json(pipeline.working_model()));
            return 0;
        }

        if (est_surv->parsed()) {
            est_surv_config.rule = est_surv_rule == "cv" ? WorkingModelRule::cv
                                                         : WorkingModelRule::undersmoothed;
            est_surv_config.targeting = parse_surv_targeting(est_surv_targeting);
            const SurvData data = read_surv_csv(est_surv_csv);
            const SurvCurveResult res = estimate_survival_curve(data, est_surv_config);
            std::ostringstream csv;
            csv << "s,S_hat,proj_lo,proj_hi,proj_cv_lo,proj_cv_hi,delta_lo,delta_hi,"
                   "band_lo,band_hi\n";
            for (std::size_t s = 0; s < res.grid.size(); ++s) {
                csv << fmtd(res.grid[s]) << ',' << fmtd(res.estimates(s)) << ','
                    << fmtd(res.cis[s].proj.lower) << ',' << fmtd(res.cis[s].proj.upper) << ','
                    << fmtd(res.cis[s].proj_cv.lower) << ',' << fmtd(res.cis[s].proj_cv.upper)
                    << ',' << fmtd(res.cis[s].delta.lower) << ',' << fmtd(res.cis[s].delta.upper)
                    << ',' << fmtd(res.band_lower(s)) << ',' << fmtd(res.band_upper(s)) << '\n';
            }
            std::cout << "targeting " << res.targeting << ", " << res.iterations
                      << " iterations, band z = " << fmtd(res.band_z) << "\n";
            if (!est_surv_out.empty()) write_file(est_surv_out, csv.str());
            else std::cout << csv.str();
            return 0;
        }

        if (summ->parsed()) {
            std::ifstream in(summ_csv_path);
            if (!in) throw EstimationError("cannot read " + summ_csv_path);
            std::stringstream buf;
            buf << in.rdbuf();
            const RawResults raw = parse_raw_csv(buf.str());
            const auto summary = summarize(raw);
            std::cout << summary_table(summary);
            if (!summ_out.empty()) write_file(summ_out, summary_csv(summary));
            return 0;
        }
    } catch (const InvalidInput& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "estimation failed: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

}  // namespace reghal

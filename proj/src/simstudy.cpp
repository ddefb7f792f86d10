#include "reghal/simstudy.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "reghal/rng.hpp"

namespace reghal {

AteData gen_dgp1(long n, std::uint64_t seed) {
    Rng rng(seed);
    AteData data;
    data.W.resize(n, 3);
    data.A.resize(n);
    data.Y.resize(n);
    for (long i = 0; i < n; ++i) {
        const double w1 = rng.uniform(-1.0, 1.0);
        const double w2 = rng.uniform(-1.0, 1.0);
        const double w3 = rng.uniform(-1.0, 1.0);
        const int a = rng.bernoulli(expit(-0.25 * w1 + 0.7 * w2));
        const double u = rng.normal();
        data.W(i, 0) = w1;
        data.W(i, 1) = w2;
        data.W(i, 2) = w3;
        data.A(i) = a;
        data.Y(i) = 1.9 + 1.5 * a + (2.5 * w1 + 0.7 * w2) * a + 1.5 * std::sin(w1 + w2) +
                    0.3 * std::fabs(w1) + 0.9 * w1 * w1 + 1.4 * w2 + 2.1 * w3 + u;
    }
    return data;
}

AteData gen_dgp2(long n, std::uint64_t seed) {
    Rng rng(seed);
    AteData data;
    data.W.resize(n, 3);
    data.A.resize(n);
    data.Y.resize(n);
    for (long i = 0; i < n; ++i) {
        const double w1 = std::round(rng.uniform(-1.0, 1.0) * 10.0) / 10.0;
        const double w2 = std::round(rng.uniform(-1.0, 1.0) * 10.0) / 10.0;
        const double w3 = std::round(rng.uniform(-1.0, 1.0) * 10.0) / 10.0;
        const int a = rng.bernoulli(expit(-0.25 * w1 + 5.0 * w2));
        const double u = rng.normal();
        data.W(i, 0) = w1;
        data.W(i, 1) = w2;
        data.W(i, 2) = w3;
        data.A(i) = a;
        data.Y(i) = 1.9 + 1.5 * a + (2.5 * w1 + 0.7 * w2) * a + 1.5 * std::sin(w1 + w2) +
                    0.3 * std::fabs(w1) + 0.9 * w1 * w1 + 1.4 * w2 + 2.1 * w3 + u;
    }
    return data;
}

SurvData gen_surv(long n, std::uint64_t seed) {
    Rng rng(seed);
    SurvData data;
    data.times.resize(n);
    data.events.resize(n);
    for (long i = 0; i < n; ++i) {
        const double t_star = rng.beta22();
        const double c = rng.uniform(0.0, 1.2);
        data.times(i) = std::min(t_star, c);
        data.events(i) = t_star <= c ? 1 : 0;
    }
    return data;
}

double true_ate(DgpTag tag) {
    switch (tag) {
        case DgpTag::ate_dgp1:
            return 1.5;  // E[1.5 + 2.5 W1 + 0.7 W2] with zero-mean W
        case DgpTag::ate_dgp2: {
            // Monte-Carlo oracle under a fixed seed, cached after the first call.
            static const double value = [] {
                Rng rng(0x5eed0a7eull);
                const long draws = 10'000'000;
                double sum = 0.0;
                for (long i = 0; i < draws; ++i) {
                    const double w1 = std::round(rng.uniform(-1.0, 1.0) * 10.0) / 10.0;
                    const double w2 = std::round(rng.uniform(-1.0, 1.0) * 10.0) / 10.0;
                    sum += 1.5 + 2.5 * w1 + 0.7 * w2;
                }
                return sum / double(draws);
            }();
            return value;
        }
        case DgpTag::survival_beta:
            throw InvalidInput("true_ate: survival DGP has no ATE");
    }
    return 0.0;
}

double true_survival(double t) {
    if (t < 0.0 || t > 1.0) throw InvalidInput("true_survival: t must lie in [0,1]");
    return 1.0 - (3.0 * t * t - 2.0 * t * t * t);
}

RawResults run_replications(const RepConfig& config,
                            const std::function<std::vector<EstimatorSpec>(
                                const AteData*, const SurvData*, std::uint64_t)>& make_estimators) {
    if (config.reps < 1) throw InvalidInput("run_replications: reps must be >= 1");
    const int threads = std::max(1, config.threads);

    std::vector<std::vector<ResultRow>> rows_by_rep(config.reps);
    std::vector<std::vector<FailureRecord>> failures_by_rep(config.reps);

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int r = next.fetch_add(1);
            if (r >= config.reps) return;
            const std::uint64_t data_seed = derive_seed(config.base_seed, "data", r);
            const std::uint64_t est_seed = derive_seed(config.base_seed, "est", r);

            AteData ate_data;
            SurvData surv_data;
            const AteData* ate_ptr = nullptr;
            const SurvData* surv_ptr = nullptr;
            switch (config.dgp.tag) {
                case DgpTag::ate_dgp1:
                    ate_data = gen_dgp1(config.dgp.n, data_seed);
                    ate_ptr = &ate_data;
                    break;
                case DgpTag::ate_dgp2:
                    ate_data = gen_dgp2(config.dgp.n, data_seed);
                    ate_ptr = &ate_data;
                    break;
                case DgpTag::survival_beta:
                    surv_data = gen_surv(config.dgp.n, data_seed);
                    surv_ptr = &surv_data;
                    break;
            }

            const std::vector<EstimatorSpec> estimators =
                make_estimators(ate_ptr, surv_ptr, est_seed);
            for (const EstimatorSpec& spec : estimators) {
                const auto start = std::chrono::steady_clock::now();
                try {
                    std::vector<ResultRow> rows = spec.run(r);
                    const double ms = std::chrono::duration<double, std::milli>(
                                          std::chrono::steady_clock::now() - start)
                                          .count();
                    for (ResultRow& row : rows) {
                        row.rep = r;
                        row.n = config.dgp.n;
                        row.time_ms = ms;
                        rows_by_rep[r].push_back(std::move(row));
                    }
                } catch (const std::exception& e) {
                    failures_by_rep[r].push_back({r, spec.name, e.what()});
                }
            }
        }
    };

    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RawResults out;
    for (int r = 0; r < config.reps; ++r) {
        for (auto& row : rows_by_rep[r]) out.rows.push_back(std::move(row));
        for (auto& f : failures_by_rep[r]) out.failures.push_back(std::move(f));
    }
    return out;
}

namespace {

std::string fmt(double v, const char* spec = "%.12g") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

double sample_sd(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= double(n);
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / double(n - 1));
}

struct TargetCell {
    std::vector<double> psi, truth;
    std::vector<std::optional<double>> se_np, se_proj, se_proj_cv, se_delta;
};

}  // namespace

std::vector<SummaryRow> summarize(const RawResults& raw) {
    using Key = std::tuple<std::string, long, std::string>;
    std::vector<Key> order;
    std::map<Key, std::map<std::string, TargetCell>> groups;
    std::map<Key, std::vector<int>> selected;
    std::map<Key, std::map<int, char>> reps_seen;

    for (const ResultRow& row : raw.rows) {
        const Key key{row.estimator, row.n, row.targeting};
        if (groups.find(key) == groups.end()) order.push_back(key);
        TargetCell& cell = groups[key][row.target_id];
        cell.psi.push_back(row.psi_hat);
        cell.truth.push_back(row.truth);
        cell.se_np.push_back(row.se_np);
        cell.se_proj.push_back(row.se_proj);
        cell.se_proj_cv.push_back(row.se_proj_cv);
        cell.se_delta.push_back(row.se_delta);
        if (row.selected_j) selected[key].push_back(*row.selected_j);
        reps_seen[key][row.rep] = 1;
    }

    const double z = normal_quantile(0.975);
    std::vector<SummaryRow> rows;
    for (const Key& key : order) {
        SummaryRow s;
        s.estimator = std::get<0>(key);
        s.n = std::get<1>(key);
        s.targeting = std::get<2>(key);
        s.reps = static_cast<int>(reps_seen[key].size());

        double bias_acc = 0.0, sd_acc = 0.0, mse_acc = 0.0;
        double orc_cov = 0.0, orc_width = 0.0;
        struct CovAcc {
            double cov = 0.0, width = 0.0;
            long count = 0;
        } acc_np, acc_proj, acc_proj_cv, acc_delta;

        const auto& cells = groups[key];
        for (const auto& [target, cell] : cells) {
            const std::size_t m = cell.psi.size();
            double mean_psi = 0.0;
            for (const double p : cell.psi) mean_psi += p;
            mean_psi /= double(m);
            const double truth = cell.truth.front();
            bias_acc += std::fabs(mean_psi - truth);
            const double sd = sample_sd(cell.psi);
            sd_acc += sd;
            double mse = 0.0;
            for (const double p : cell.psi) mse += (p - truth) * (p - truth);
            mse_acc += mse / double(m);

            for (std::size_t r = 0; r < m; ++r) {
                const double err = std::fabs(cell.psi[r] - truth);
                orc_cov += err <= z * sd ? 1.0 : 0.0;
                orc_width += 2.0 * z * sd;
                auto tally = [&](CovAcc& acc, const std::optional<double>& se) {
                    if (!se) return;
                    acc.cov += err <= z * *se ? 1.0 : 0.0;
                    acc.width += 2.0 * z * *se;
                    ++acc.count;
                };
                tally(acc_np, cell.se_np[r]);
                tally(acc_proj, cell.se_proj[r]);
                tally(acc_proj_cv, cell.se_proj_cv[r]);
                tally(acc_delta, cell.se_delta[r]);
            }
        }
        const double n_targets = double(cells.size());
        long total_rows = 0;
        for (const auto& [target, cell] : cells) total_rows += long(cell.psi.size());

        s.abs_bias = bias_acc / n_targets;
        s.std_err = sd_acc / n_targets;
        s.mse = mse_acc / n_targets;
        s.oracle_cov = 100.0 * orc_cov / double(total_rows);
        s.oracle_width = orc_width / double(total_rows);
        auto fill = [&](const CovAcc& acc, std::optional<double>& cov,
                        std::optional<double>& width) {
            if (acc.count == 0) return;
            cov = 100.0 * acc.cov / double(acc.count);
            width = acc.width / double(acc.count);
        };
        fill(acc_np, s.cov_np, s.width_np);
        fill(acc_proj, s.cov_proj, s.width_proj);
        fill(acc_proj_cv, s.cov_proj_cv, s.width_proj_cv);
        fill(acc_delta, s.cov_delta, s.width_delta);

        if (const auto it = selected.find(key); it != selected.end() && !it->second.empty()) {
            double mean_j = 0.0;
            std::map<int, int> counts;
            for (const int j : it->second) {
                mean_j += j;
                ++counts[j];
            }
            s.mean_selected_j = mean_j / double(it->second.size());
            int mode = it->second.front(), best = 0;
            for (const auto& [j, c] : counts)
                if (c > best) {
                    best = c;
                    mode = j;
                }
            s.modal_selected_j = mode;
        }
        rows.push_back(std::move(s));
    }
    return rows;
}

std::string raw_csv(const RawResults& raw) {
    std::ostringstream out;
    out << "rep,estimator,n,targeting,target_id,psi_hat,truth,se_np,se_proj,se_proj_cv,"
           "se_delta,iterations,converged,selected_j,time_ms\n";
    for (const ResultRow& r : raw.rows) {
        out << r.rep << ',' << r.estimator << ',' << r.n << ',' << r.targeting << ','
            << r.target_id << ',' << fmt(r.psi_hat) << ',' << fmt(r.truth) << ','
            << opt_fmt(r.se_np) << ',' << opt_fmt(r.se_proj) << ',' << opt_fmt(r.se_proj_cv)
            << ',' << opt_fmt(r.se_delta) << ',' << r.iterations << ','
            << (r.converged ? 1 : 0) << ','
            << (r.selected_j ? std::to_string(*r.selected_j) : std::string()) << ','
            << fmt(r.time_ms, "%.3f") << '\n';
    }
    return out.str();
}

RawResults parse_raw_csv(const std::string& text) {
    RawResults raw;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("parse_raw_csv: empty input");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        fields.resize(15);
        ResultRow r;
        r.rep = std::stoi(fields[0]);
        r.estimator = fields[1];
        r.n = std::stol(fields[2]);
        r.targeting = fields[3];
        r.target_id = fields[4];
        r.psi_hat = std::stod(fields[5]);
        r.truth = std::stod(fields[6]);
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        r.se_np = opt(fields[7]);
        r.se_proj = opt(fields[8]);
        r.se_proj_cv = opt(fields[9]);
        r.se_delta = opt(fields[10]);
        r.iterations = fields[11].empty() ? 0 : std::stoi(fields[11]);
        r.converged = fields[12] == "1";
        if (!fields[13].empty()) r.selected_j = std::stoi(fields[13]);
        r.time_ms = fields[14].empty() ? 0.0 : std::stod(fields[14]);
        raw.rows.push_back(std::move(r));
    }
    return raw;
}

namespace {

std::string cov_cell(const std::optional<double>& cov, const std::optional<double>& width) {
    if (!cov) return "--";
    return fmt(*cov, "%.2f") + " (" + fmt(*width, "%.3f") + ")";
}

}  // namespace

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream out;
    out << "estimator,n,targeting,reps,abs_bias,std_err,mse,cov_np,width_np,cov_proj,"
           "width_proj,cov_proj_cv,width_proj_cv,cov_delta,width_delta,oracle_cov,"
           "oracle_width,mean_selected_j,modal_selected_j\n";
    for (const SummaryRow& s : rows) {
        out << s.estimator << ',' << s.n << ',' << s.targeting << ',' << s.reps << ','
            << fmt(s.abs_bias) << ',' << fmt(s.std_err) << ',' << fmt(s.mse) << ','
            << opt_fmt(s.cov_np) << ',' << opt_fmt(s.width_np) << ',' << opt_fmt(s.cov_proj)
            << ',' << opt_fmt(s.width_proj) << ',' << opt_fmt(s.cov_proj_cv) << ','
            << opt_fmt(s.width_proj_cv) << ',' << opt_fmt(s.cov_delta) << ','
            << opt_fmt(s.width_delta) << ',' << fmt(s.oracle_cov) << ','
            << fmt(s.oracle_width) << ',' << opt_fmt(s.mean_selected_j) << ','
            << (s.modal_selected_j ? std::to_string(*s.modal_selected_j) : std::string())
            << '\n';
    }
    return out.str();
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
    std::vector<std::vector<std::string>> table;
    table.push_back({"Estimator", "n", "Targeting", "Abs_Bias", "Std_Err", "MSE", "Cov NP (%)",
                     "Cov Proj (%)", "Cov Proj CV (%)", "Cov Delta (%)", "Oracle Cov (%)",
                     "Selected j", "Reps"});
    for (const SummaryRow& s : rows) {
        table.push_back({s.estimator, std::to_string(s.n), s.targeting,
                         fmt(s.abs_bias, "%.4f"), fmt(s.std_err, "%.4f"), fmt(s.mse, "%.6f"),
                         cov_cell(s.cov_np, s.width_np), cov_cell(s.cov_proj, s.width_proj),
                         cov_cell(s.cov_proj_cv, s.width_proj_cv),
                         cov_cell(s.cov_delta, s.width_delta),
                         cov_cell(s.oracle_cov, s.oracle_width),
                         s.modal_selected_j ? std::to_string(*s.modal_selected_j) : "--",
                         std::to_string(s.reps)});
    }
    std::vector<std::size_t> widths(table[0].size(), 0);
    for (const auto& row : table)
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    std::ostringstream out;
    for (const auto& row : table) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << row[c];
            if (c + 1 < row.size()) out << std::string(widths[c] - row[c].size() + 2, ' ');
        }
        out << '\n';
    }
    return out.str();
}

namespace {

void fill_ses(ResultRow& row, const AteResult& res) {
    const auto grab = [&](CiVariant v) -> std::optional<double> {
        const auto it = res.cis.find(v);
        if (it == res.cis.end()) return std::nullopt;
        return it->second.se;
    };
    row.se_np = grab(CiVariant::np);
    row.se_proj = grab(CiVariant::proj);
    row.se_proj_cv = grab(CiVariant::proj_cv);
    row.se_delta = grab(CiVariant::delta);
}

}  // namespace

std::vector<EstimatorSpec> ate_estimators(const AteData& data, const AteConfig& base,
                                          const std::vector<AteTargeting>& targetings,
                                          double truth, std::uint64_t est_seed) {
    AteConfig config = base;
    config.seed = est_seed;
    // all variants share one pipeline (same initial fits within a replication)
    auto pipeline = std::make_shared<std::unique_ptr<AtePipeline>>();
    auto get = [pipeline, &data, config]() -> AtePipeline& {
        if (!*pipeline) *pipeline = std::make_unique<AtePipeline>(data, config);
        return **pipeline;
    };

    std::vector<EstimatorSpec> specs;
    for (const AteTargeting t : targetings) {
        const std::string estimator =
            t == AteTargeting::direct ? "reghal-tmle-direct" : "hal-tmle";
        const std::string label = t == AteTargeting::direct ? "projection" : targeting_name(t);
        specs.push_back(
            {estimator + ":" + targeting_name(t), label,
             [get, t, truth, estimator, label](int) mutable {
                 const AteResult res = get().run(t);
                 ResultRow row;
                 row.estimator = estimator;
                 row.targeting = label;
                 row.target_id = "ate";
                 row.psi_hat = res.psi;
                 row.truth = truth;
                 row.iterations = res.iterations;
                 row.converged = res.converged;
                 fill_ses(row, res);
                 return std::vector<ResultRow>{row};
             }});
    }
    return specs;
}

std::vector<EstimatorSpec> survival_estimators(const SurvData& data, const SurvConfig& base,
                                               const std::vector<SurvTargeting>& targetings,
                                               std::uint64_t est_seed) {
    SurvConfig config = base;
    config.seed = est_seed;
    auto pipeline = std::make_shared<std::unique_ptr<SurvivalPipeline>>();
    auto get = [pipeline, &data, config]() -> SurvivalPipeline& {
        if (!*pipeline) *pipeline = std::make_unique<SurvivalPipeline>(data, config);
        return **pipeline;
    };

    std::vector<EstimatorSpec> specs;
    for (const SurvTargeting t : targetings) {
        specs.push_back(
            {std::string("intensity-hal-tmle:") + targeting_name(t), targeting_name(t),
             [get, t](int) mutable {
                 const SurvCurveResult res = get().run(t);
                 std::vector<ResultRow> rows;
                 for (std::size_t s = 0; s < res.grid.size(); ++s) {
                     ResultRow row;
                     row.estimator = "intensity-hal-tmle";
                     row.targeting = res.targeting;
                     row.target_id = fmt(res.grid[s], "%.6f");
                     row.psi_hat = res.estimates(s);
                     row.truth = true_survival(res.grid[s]);
                     row.se_proj = res.cis[s].proj.se;
                     row.se_proj_cv = res.cis[s].proj_cv.se;
                     row.se_delta = res.cis[s].delta.se;
                     row.iterations = res.iterations;
                     row.converged = res.converged;
                     rows.push_back(std::move(row));
                 }
                 return rows;
             }});
    }
    return specs;
}

std::vector<EstimatorSpec> atmle_estimators(const AteData& data, const AtmleConfig& base,
                                            const std::vector<AteTargeting>& targetings,
                                            double truth, std::uint64_t est_seed) {
    std::vector<EstimatorSpec> specs;
    for (const AteTargeting t : targetings) {
        AtmleConfig config = base;
        config.base.seed = est_seed;
        config.targeting = t;
        specs.push_back(
            {std::string("a-tmle:") + targeting_name(t), targeting_name(t),
             [config, &data, truth](int) {
                 const ModelLadderResult res = atmle_estimate(data, config);
                 const LadderEntry& sel = res.ladder[res.j_star - 1];
                 ResultRow row;
                 row.estimator = "a-tmle";
                 row.targeting = targeting_name(config.targeting);
                 row.target_id = "ate";
                 row.psi_hat = sel.psi;
                 row.truth = truth;
                 row.se_np = sel.ci.se;
                 row.iterations = sel.iterations;
                 row.converged = sel.converged;
                 row.selected_j = res.j_star;
                 return std::vector<ResultRow>{row};
             }});
    }
    return specs;
}

}  // namespace reghal

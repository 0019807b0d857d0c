// sncure: simulate studies, fit estimators, bootstrap, counterfactuals and
// Monte Carlo replication tables.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "sncure/counterfactual.hpp"
#include "sncure/errors.hpp"
#include "sncure/io.hpp"
#include "sncure/replication.hpp"

using namespace sncure;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;
constexpr int kExitIo = 5;

int default_threads() {
    if (const char* env = std::getenv("SNCURE_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Json load_config(const std::string& path) { return path.empty() ? Json::object() : read_json(path); }

Panel load_panel(const std::string& rows, const std::string& events, std::optional<double> tau) {
    Panel panel = read_panel(rows, events, tau);
    const auto report = validate_panel(panel);
    if (!report.ok()) throw ValidationError("panel failed validation: " + report.summary());
    return panel;
}

// Options shared by fit and replicate. Each is applied only when given on
// the command line, so flags override the JSON config, which overrides defaults.
struct EstimatorFlags {
    std::string estimator;
    int lags = 4;
    int folds = 5;
    int bins = 5;
    int window = kDefaultExposureWindow;
    double weight_cap = 0.0;
    std::string mu_learner;
    std::string rho_learner;
    CLI::Option* lags_opt = nullptr;
    CLI::Option* folds_opt = nullptr;
    CLI::Option* bins_opt = nullptr;
    CLI::Option* window_opt = nullptr;
    CLI::Option* cap_opt = nullptr;

    void attach(CLI::App* cmd) {
        lags_opt = cmd->add_option("--lags", lags, "Number of lags M_lags (betas 0..M_lags)");
        folds_opt = cmd->add_option("--folds", folds, "Cross-fitting folds V (robust)");
        bins_opt = cmd->add_option("--bins", bins, "Time bins per period");
        window_opt = cmd->add_option("--exposure-window", window, "Exposure lags used as features");
        cap_opt = cmd->add_option("--weight-cap", weight_cap, "Clamp risk-set weights into [1/cap, cap]");
        cmd->add_option("--mu-learner", mu_learner, "Exposure-model learner: linear|gbt|ensemble");
        cmd->add_option("--rho-learner", rho_learner, "Outcome-model learner: linear|gbt|ensemble");
    }

    EstimatorConfig apply(EstimatorConfig c) const {
        if (!estimator.empty()) c.kind = parse_estimator(estimator);
        if (lags_opt->count()) c.lags = lags;
        if (folds_opt->count()) c.folds = folds;
        if (bins_opt->count()) c.bins = bins;
        if (window_opt->count()) c.exposure_window = window;
        if (cap_opt->count()) c.weight_cap = weight_cap;
        if (!mu_learner.empty()) c.mu_spec = learner_spec_from_json(Json(mu_learner));
        if (!rho_learner.empty()) c.rho_spec = learner_spec_from_json(Json(rho_learner));
        return c;
    }
};

struct SimFlags {
    int n = 0;
    std::string scenario;
    int horizon = 0;
    int baseline = 0;
    double c = 0.0;
    double censor_scale = 0.0;
    double var_ratio = 0.0;
    bool hide_frailty = false;
    CLI::Option* n_opt = nullptr;
    CLI::Option* k_opt = nullptr;
    CLI::Option* m_opt = nullptr;
    CLI::Option* c_opt = nullptr;
    CLI::Option* censor_opt = nullptr;
    CLI::Option* ratio_opt = nullptr;

    void attach(CLI::App* cmd) {
        n_opt = cmd->add_option("--n", n, "Individuals per study");
        cmd->add_option("--scenario", scenario, "Exposure scenario: simple|complex");
        k_opt = cmd->add_option("--K", horizon, "Study horizon K (tau = K)");
        m_opt = cmd->add_option("--M", baseline, "Baseline periods M");
        c_opt = cmd->add_option("--c", c, "Fixed baseline-intensity scale (skips calibration)");
        censor_opt = cmd->add_option("--censor-scale", censor_scale, "Censoring hazard scale");
        ratio_opt = cmd->add_option("--var-ratio", var_ratio, "Target variance ratio for c");
        cmd->add_flag("--hide-frailty", hide_frailty, "Do not expose the frailty as covariate L3");
    }

    SimConfig apply(SimConfig s) const {
        if (n_opt->count()) s.n = n;
        if (!scenario.empty()) s.scenario = parse_scenario(scenario);
        if (k_opt->count()) s.horizon = horizon;
        if (m_opt->count()) s.baseline = baseline;
        if (c_opt->count()) s.c_override = c;
        if (censor_opt->count()) s.censor_scale = censor_scale;
        if (ratio_opt->count()) s.var_ratio = var_ratio;
        if (hide_frailty) s.expose_frailty = false;
        return s;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Structural nested recurrent-event rate estimators"};
    app.require_subcommand(1);
    int threads = default_threads();
    app.add_option("--threads", threads, "Worker threads (default: SNCURE_THREADS or available cores)");

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Simulate a study panel");
    std::string sim_config, sim_out, sim_events, sim_meta;
    std::uint64_t sim_seed = 0;
    SimFlags sim_flags;
    sim_cmd->add_option("--seed", sim_seed, "Random seed")->required();
    sim_cmd->add_option("--config", sim_config, "JSON config file");
    sim_cmd->add_option("--out", sim_out, "Panel CSV path")->required();
    sim_cmd->add_option("--events", sim_events, "Events CSV path")->required();
    sim_cmd->add_option("--meta", sim_meta, "Metadata JSON path");
    sim_flags.attach(sim_cmd);

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit an estimator to a panel");
    std::string fit_config, fit_panel, fit_events, fit_out;
    double fit_tau = 0.0, fit_level = 0.95;
    int fit_r = 0;
    std::uint64_t fit_seed = 0;
    EstimatorFlags fit_flags;
    fit_cmd->add_option("--panel", fit_panel, "Panel CSV")->required();
    fit_cmd->add_option("--events", fit_events, "Events CSV")->required();
    auto* fit_tau_opt = fit_cmd->add_option("--tau", fit_tau, "Study end tau (default K)");
    fit_cmd->add_option("--config", fit_config, "JSON config file");
    fit_cmd->add_option("--estimator", fit_flags.estimator, "parametric|nonparametric|robust");
    auto* fit_r_opt = fit_cmd->add_option("--R", fit_r, "Bootstrap replicates (0 = point estimates only)");
    auto* fit_seed_opt = fit_cmd->add_option("--seed", fit_seed, "Seed for folds, stacking and bootstrap");
    auto* fit_level_opt = fit_cmd->add_option("--ci-level", fit_level, "Confidence level");
    fit_cmd->add_option("--out", fit_out, "Estimates JSON path (default stdout)");
    fit_flags.attach(fit_cmd);

    // replicate
    auto* rep_cmd = app.add_subcommand("replicate", "Monte Carlo replication table");
    std::string rep_config, rep_out, rep_details;
    std::uint64_t rep_seed = 0;
    int rep_count = 100, rep_r = 200;
    std::vector<std::string> rep_estimators;
    SimFlags rep_sim;
    EstimatorFlags rep_flags;
    rep_cmd->add_option("--seed", rep_seed, "Random seed")->required();
    rep_cmd->add_option("--config", rep_config, "JSON config file");
    auto* rep_count_opt = rep_cmd->add_option("--replicates", rep_count, "Simulated studies");
    auto* rep_r_opt = rep_cmd->add_option("--R", rep_r, "Bootstrap replicates per study");
    rep_cmd->add_option("--estimators", rep_estimators, "Estimators to compare")->delimiter(',');
    rep_cmd->add_option("--out", rep_out, "Table CSV path (default stdout)");
    rep_cmd->add_option("--details", rep_details, "Per-replicate JSON path");
    rep_sim.attach(rep_cmd);
    rep_flags.attach(rep_cmd);

    // counterfactual
    auto* cf_cmd = app.add_subcommand("counterfactual", "Events averted under exposure caps");
    std::string cf_panel, cf_events, cf_estimates, cf_out;
    std::vector<double> cf_caps;
    double cf_tau = 0.0, cf_end = 0.0;
    cf_cmd->add_option("--panel", cf_panel, "Panel CSV")->required();
    cf_cmd->add_option("--events", cf_events, "Events CSV")->required();
    auto* cf_tau_opt = cf_cmd->add_option("--tau", cf_tau, "Study end tau (default K)");
    cf_cmd->add_option("--estimates", cf_estimates, "Estimates JSON from `fit`")->required();
    cf_cmd->add_option("--cap", cf_caps, "Exposure cap (repeatable)")->required();
    auto* cf_end_opt = cf_cmd->add_option("--t-end", cf_end, "Integrate up to this time (default tau)");
    cf_cmd->add_option("--out", cf_out, "Curve CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }

    try {
        if (threads < 1) throw UsageError("InvalidConfig", "--threads must be >= 1");
        const auto start = std::chrono::steady_clock::now();

        if (*sim_cmd) {
            const Json file = load_config(sim_config);
            SimConfig cfg = sim_flags.apply(sim_config_from_json(file));
            cfg.seed = sim_seed;
            const auto study = simulate_study(cfg);
            write_panel(study.panel, sim_out, sim_events);
            Json meta = to_json(study.metadata);
            meta["command"] = "simulate";
            meta["seconds"] = seconds_since(start);
            if (!sim_meta.empty()) write_text(sim_meta, meta.dump(2) + "\n");
            std::cerr << "simulated " << study.panel.size() << " individuals, " << study.metadata.events
                      << " events, c=" << study.metadata.c << "\n";
        } else if (*fit_cmd) {
            const Json file = load_config(fit_config);
            EstimatorConfig cfg = fit_flags.apply(estimator_config_from_json(file));
            if (fit_seed_opt->count()) cfg.seed = fit_seed;
            const int R = fit_r_opt->count() ? fit_r : file.value("R", 0);
            const double level = fit_level_opt->count() ? fit_level : file.value("ci_level", 0.95);
            std::optional<double> tau;
            if (fit_tau_opt->count()) tau = fit_tau;
            else if (file.contains("tau")) tau = file.at("tau").get<double>();
            cfg.validate();
            normal_critical(level);
            if (R < 0) throw UsageError("InvalidConfig", "R must be >= 0");

            const Panel panel = load_panel(fit_panel, fit_events, tau);
            const auto fit_start = std::chrono::steady_clock::now();
            EffectEstimates est = run_estimator(panel, cfg);
            const double fit_seconds = seconds_since(fit_start);
            Json boot_json;
            double boot_seconds = 0.0;
            if (R > 0) {
                BootstrapOptions opts;
                opts.replicates = R;
                opts.seed = cfg.seed;
                opts.ci_level = level;
                opts.threads = threads;
                const auto boot_start = std::chrono::steady_clock::now();
                const auto boot = bootstrap(panel, cfg, opts);
                boot_seconds = seconds_since(boot_start);
                est = summarize(boot, est);
                boot_json = to_json(boot);
                for (const auto& w : boot.warnings) std::cerr << "warning: " << w << "\n";
            }
            Json out = to_json(est);
            Json echo = to_json(cfg);
            echo["R"] = R;
            echo["ci_level"] = level;
            echo["tau"] = panel.tau();
            echo["threads"] = threads;
            echo["panel"] = fit_panel;
            echo["events"] = fit_events;
            out["config"] = echo;
            if (R > 0) out["bootstrap"] = boot_json;
            out["timings_seconds"] = {{"fit", fit_seconds}, {"bootstrap", boot_seconds}, {"total", seconds_since(start)}};
            if (fit_out.empty()) std::cout << out.dump(2) << "\n";
            else write_text(fit_out, out.dump(2) + "\n");
        } else if (*rep_cmd) {
            const Json file = load_config(rep_config);
            ReplicationConfig cfg;
            cfg.sim = rep_sim.apply(sim_config_from_json(file.value("sim", Json::object())));
            cfg.replicates = rep_count_opt->count() ? rep_count : file.value("replicates", rep_count);
            cfg.bootstrap = rep_r_opt->count() ? rep_r : file.value("R", rep_r);
            cfg.ci_level = file.value("ci_level", 0.95);
            cfg.threads = threads;
            cfg.seed = rep_seed;
            const EstimatorConfig base = rep_flags.apply(estimator_config_from_json(
                file.value("estimator_config", Json::object()), simulation_estimator_defaults()));
            if (rep_estimators.empty())
                rep_estimators = file.value("estimators", std::vector<std::string>{"parametric", "nonparametric", "robust"});
            for (const auto& name : rep_estimators) {
                EstimatorConfig e = base;
                e.kind = parse_estimator(name);
                cfg.estimators.push_back(e);
            }
            const auto report = replicate_study(cfg, [&](int r, const std::string& name) {
                std::cerr << "replicate " << r + 1 << "/" << cfg.replicates << " " << name << "\n";
            });
            const auto table = replication_table_csv(report);
            if (rep_out.empty()) std::cout << table;
            else write_text(rep_out, table);
            if (!rep_details.empty()) {
                Json details{{"command", "replicate"}, {"sim", to_json(cfg.sim)}, {"replicates", cfg.replicates},
                             {"R", cfg.bootstrap}, {"ci_level", cfg.ci_level}, {"seed", cfg.seed},
                             {"seconds", report.seconds}};
                details["estimators"] = Json::array();
                for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
                    Json block{{"config", to_json(cfg.estimators[e])}, {"outcomes", Json::array()}};
                    for (const auto& o : report.outcomes[e])
                        block["outcomes"].push_back({{"replicate", o.replicate}, {"beta", o.beta}, {"se", o.se}, {"error", o.error}});
                    details["estimators"].push_back(block);
                }
                write_text(rep_details, details.dump(2) + "\n");
            }
        } else if (*cf_cmd) {
            std::optional<double> tau;
            if (cf_tau_opt->count()) tau = cf_tau;
            const Panel panel = load_panel(cf_panel, cf_events, tau);
            const Json fitted = read_json(cf_estimates);
            const auto beta = beta_from_json(fitted);
            const auto boot = bootstrap_from_json(fitted);
            const double t_end = cf_end_opt->count() ? cf_end : panel.tau();

            std::ostringstream csv;
            csv << "cap_label,cap,period,cumulative_averted,lo,hi\n";
            Json summary{{"command", "counterfactual"},
                         {"at_risk", "observed at-risk time only; no survival extension under the intervention"},
                         {"t_end", t_end},
                         {"beta", beta},
                         {"caps", Json::array()}};
            for (double cap : cf_caps) {
                CapScenario scenario{cap, "cap=" + format_real(cap)};
                const auto averted = events_averted(panel, beta, scenario, t_end);
                std::optional<AvertedInterval> ci;
                if (boot) ci = averted_ci(panel, beta, *boot, scenario, t_end);
                for (std::size_t k = 0; k < averted.cumulative.size(); ++k) {
                    csv << scenario.label << ',' << format_real(cap) << ',' << k << ','
                        << format_real(averted.cumulative[k]) << ',';
                    if (ci) csv << format_real(ci->curve_lo[k]) << ',' << format_real(ci->curve_hi[k]) << '\n';
                    else csv << "NA,NA\n";
                }
                Json entry{{"label", scenario.label}, {"cap", cap}, {"total", averted.total}};
                if (ci) entry["ci"] = {ci->lo, ci->hi};
                summary["caps"].push_back(entry);
            }
            if (cf_out.empty()) std::cout << csv.str();
            else write_text(cf_out, csv.str());
            std::cerr << summary.dump(2) << "\n";
        }
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Json::exception& e) {
        std::cerr << "error: UsageError: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: IoError: " << e.what() << "\n";
        return kExitIo;
    }
}

#include "sncure/replication.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "sncure/errors.hpp"
#include "sncure/io.hpp"

namespace sncure {

std::uint64_t study_seed(std::uint64_t seed, int replicate) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(replicate + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

EstimatorConfig simulation_estimator_defaults() {
    EstimatorConfig config;
    config.exposure_window = 0;
    return config;
}

ReplicationReport replicate_study(const ReplicationConfig& config, const ReplicationProgress& progress) {
    if (config.replicates < 1) throw UsageError("InvalidConfig", "replicates must be >= 1");
    if (config.bootstrap < 0) throw UsageError("InvalidConfig", "bootstrap R must be >= 0");
    if (config.estimators.empty()) throw UsageError("InvalidConfig", "no estimators requested");
    config.sim.validate();
    for (const auto& e : config.estimators) e.validate();

    const auto start = std::chrono::steady_clock::now();
    ReplicationReport report;
    report.config = config;
    report.outcomes.resize(config.estimators.size());
    for (int r = 0; r < config.replicates; ++r) {
        SimConfig sim = config.sim;
        sim.seed = study_seed(config.seed, r);
        const auto study = simulate_study(sim);
        for (std::size_t e = 0; e < config.estimators.size(); ++e) {
            EstimatorConfig est = config.estimators[e];
            est.seed = study_seed(sim.seed, static_cast<int>(e));
            if (progress) progress(r, to_string(est.kind));
            ReplicateOutcome outcome;
            outcome.replicate = r;
            try {
                outcome.beta = run_estimator(study.panel, est).beta;
                if (config.bootstrap > 0) {
                    BootstrapOptions opts;
                    opts.replicates = config.bootstrap;
                    opts.seed = study_seed(est.seed, 7);
                    opts.ci_level = config.ci_level;
                    opts.threads = config.threads;
                    outcome.se = bootstrap(study.panel, est, opts).se;
                }
            } catch (const NumericalError& err) {
                outcome.error = err.what();
            }
            report.outcomes[e].push_back(std::move(outcome));
        }
    }

    const double root_n = std::sqrt(static_cast<double>(config.sim.n));
    const double z = normal_critical(config.ci_level);
    for (std::size_t e = 0; e < config.estimators.size(); ++e) {
        const int lags = config.estimators[e].lags;
        for (int m = 0; m <= lags; ++m) {
            const double truth = m < static_cast<int>(config.sim.beta_true.size()) ? config.sim.beta_true[static_cast<std::size_t>(m)] : 0.0;
            ReplicationCell cell;
            cell.estimator = to_string(config.estimators[e].kind);
            cell.lag = m;
            double sum = 0.0, sum_sq = 0.0, se_sum = 0.0, covered = 0.0;
            for (const auto& o : report.outcomes[e]) {
                if (!o.error.empty()) continue;
                const double b = o.beta[static_cast<std::size_t>(m)];
                sum += b;
                sum_sq += b * b;
                if (!o.se.empty()) {
                    const double se = o.se[static_cast<std::size_t>(m)];
                    se_sum += se;
                    covered += std::abs(b - truth) <= z * se ? 1.0 : 0.0;
                }
                ++cell.used;
            }
            const double used = static_cast<double>(cell.used);
            const double nan = std::numeric_limits<double>::quiet_NaN();
            if (cell.used == 0) {
                cell.sqrtn_bias = cell.se_x100 = cell.coverage = cell.empirical_sd = nan;
            } else {
                const double mean = sum / used;
                cell.sqrtn_bias = root_n * (mean - truth);
                cell.empirical_sd = std::sqrt(std::max(0.0, sum_sq / used - mean * mean));
                cell.se_x100 = config.bootstrap > 0 ? 100.0 * se_sum / used : nan;
                cell.coverage = config.bootstrap > 0 ? covered / used : nan;
            }
            report.cells.push_back(cell);
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string replication_table_csv(const ReplicationReport& report) {
    std::ostringstream out;
    out << "estimator,lag,sqrtn_bias,se_x100,coverage\n";
    auto cell = [](double x) { return std::isnan(x) ? std::string("NA") : format_real(x); };
    for (const auto& c : report.cells)
        out << c.estimator << ',' << c.lag << ',' << cell(c.sqrtn_bias) << ',' << cell(c.se_x100) << ','
            << cell(c.coverage) << '\n';
    return out.str();
}

}  // namespace sncure

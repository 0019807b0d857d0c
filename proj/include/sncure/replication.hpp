#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sncure/inference.hpp"
#include "sncure/simulation.hpp"

namespace sncure {

/// Estimator defaults for simulated studies: the exposure model uses the
/// current covariates and t - k only, no lagged exposures.
EstimatorConfig simulation_estimator_defaults();

struct ReplicationConfig {
    SimConfig sim;
    std::vector<EstimatorConfig> estimators;
    int replicates = 100;
    int bootstrap = 200;  // R; 0 skips SE and coverage
    double ci_level = 0.95;
    int threads = 1;
    std::uint64_t seed = 0;
};

/// One simulated study's results for one estimator.
struct ReplicateOutcome {
    int replicate = 0;
    std::vector<double> beta;
    std::vector<double> se;  // empty when bootstrap == 0
    std::string error;       // non-empty when the fit failed
};

struct ReplicationCell {
    std::string estimator;
    int lag = 0;
    double sqrtn_bias = 0.0;
    double se_x100 = 0.0;     // NaN without bootstrap
    double coverage = 0.0;    // NaN without bootstrap
    double empirical_sd = 0.0;
    std::size_t used = 0;
};

struct ReplicationReport {
    ReplicationConfig config;
    std::vector<std::vector<ReplicateOutcome>> outcomes;  // [estimator][replicate]
    std::vector<ReplicationCell> cells;                   // estimator-major, lag-minor
    double seconds = 0.0;
};

using ReplicationProgress = std::function<void(int replicate, const std::string& estimator)>;

/// Seed of the r-th simulated study.
std::uint64_t study_seed(std::uint64_t seed, int replicate);

/// Monte Carlo study: simulate, fit every estimator, bootstrap, and
/// summarize bias, mean bootstrap SE, and coverage per estimator and lag.
ReplicationReport replicate_study(const ReplicationConfig& config, const ReplicationProgress& progress = {});

/// Table columns estimator,lag,sqrtn_bias,se_x100,coverage.
std::string replication_table_csv(const ReplicationReport& report);

}  // namespace sncure

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sncure/estimators.hpp"

namespace sncure {

struct BootstrapResult {
    std::vector<std::vector<double>> replicates;  // R rows of beta
    std::vector<double> se;
    double ci_level = 0.95;
    std::string method;
    std::size_t requested = 0;
    std::size_t retried = 0;   // replicates needing at least one fresh draw
    std::size_t excluded = 0;  // replicates dropped after exhausting retries
    std::vector<std::string> warnings;
};

/// Fit applied to each resampled panel; `stream` is a per-replicate seed.
using ReplicateFit = std::function<std::vector<double>(const Panel& resampled, std::uint64_t stream)>;

struct BootstrapOptions {
    int replicates = 200;
    std::uint64_t seed = 0;
    double ci_level = 0.95;
    int threads = 1;
    int max_retries = 3;
    double max_excluded_fraction = 0.10;
};

/// Draws n individuals with replacement. Clones get unique ids
/// ("<id>#<draw>") and keep the source as their cluster.
std::vector<std::size_t> resample_indices(std::size_t n, std::uint64_t seed, std::uint64_t replicate,
                                          std::uint64_t attempt);
Panel resample_panel(const Panel& panel, std::span<const std::size_t> draws);

/// Nonparametric bootstrap over individuals. Replicates whose fit throws a
/// NumericalError are redrawn up to `max_retries` times, then excluded;
/// more than `max_excluded_fraction` exclusions is a BootstrapFailure.
BootstrapResult bootstrap(const Panel& panel, const ReplicateFit& fit, const BootstrapOptions& options,
                          const std::string& method = "custom");

/// Refits every nuisance of `config` per replicate. Robust fold plans are
/// re-randomized per replicate.
BootstrapResult bootstrap(const Panel& panel, const EstimatorConfig& config, const BootstrapOptions& options);

/// sqrt(R^-1 sum_r (x_r - mean)^2) per column.
std::vector<double> replicate_sd(const std::vector<std::vector<double>>& replicates);

/// Two-sided standard normal quantile z_{(1+level)/2}.
double normal_critical(double level);

/// Attaches se and normal intervals point +- z se. Throws DimensionMismatch.
EffectEstimates summarize(const BootstrapResult& result, EffectEstimates point);

}  // namespace sncure

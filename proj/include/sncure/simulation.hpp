#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sncure/equations.hpp"
#include "sncure/panel.hpp"

namespace sncure {

enum class Scenario { simple, complex };

std::string to_string(Scenario scenario);
Scenario parse_scenario(const std::string& name);

struct SimConfig {
    int n = 2000;
    int horizon = 30;     // K; tau = K
    int baseline = 4;     // M
    double sigma1 = 0.2;
    double sigma2 = 1.0;
    double ar = 0.95;
    double frailty_mean = 0.2;
    Scenario scenario = Scenario::simple;
    std::vector<double> beta_true{0.1, 0.05, 0.025, 0.0, 0.0};
    std::vector<double> alpha_true{0.02, 0.01};
    double censor_scale = 0.2;
    double var_ratio = 100.0;
    /// When set, skips calibration and uses this c.
    std::optional<double> c_override;
    /// Appends the frailty Q as a third (constant) covariate column.
    bool expose_frailty = true;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-individual draws before exposure normalization.
struct LatentTrajectory {
    std::vector<double> l1, l2;   // index k + M, k = -M..K
    double frailty = 0.0;
    std::vector<double> raw_mean; // scenario mean of the raw exposure
    std::vector<double> raw_exposure;
};

/// Two independent stationary AR(1) series over k = -M..K with marginal
/// SDs sigma1, sigma2 and lag correlation `ar`.
void sim_covariates(const SimConfig& config, std::mt19937_64& rng, LatentTrajectory& out);

/// Raw scenario mean of A given (L1, L2).
double exposure_mean(Scenario scenario, double l1, double l2);

/// Raw exposures: scenario mean plus unit Gaussian noise.
void sim_exposures(const SimConfig& config, std::mt19937_64& rng, LatentTrajectory& out);

/// c = sqrt(var_ratio) * SD(effect) / SD(eta); ZeroVariance when either SD is 0.
double calibrate_c(std::span<const double> effect_terms, std::span<const double> eta_terms, double var_ratio = 100.0);

/// Smallest t >= start with int_start^t rate = target, where rate is
/// constant on unit periods [j, j+1) (rates[j]) and zero from rates.size() on.
/// Returns +infinity when the target is never reached.
double invert_cumulative_hazard(std::span<const double> rates, double start, double target);

/// Event times of a process with piecewise-constant rates on unit periods,
/// up to `horizon` (exclusive).
std::vector<double> sim_event_times(std::span<const double> rates, double horizon, std::mt19937_64& rng);

struct SimMetadata {
    SimConfig config;
    double c = 0.0;
    double exposure_min = 0.0;   // raw min over all person-periods
    double exposure_max = 0.0;
    double realized_var_ratio = 0.0;
    std::size_t person_periods = 0;
    std::size_t deaths = 0;
    std::size_t censored = 0;
    std::size_t events = 0;
};

struct SimStudy {
    Panel panel;
    SimMetadata metadata;
    std::vector<LatentTrajectory> latent;  // same order as panel
};

SimStudy simulate_study(const SimConfig& config);

/// True exposure mean mu_km(t) for the simulated DGP, weighted toward the
/// exposure-free risk set: the normalized scenario mean tilted by the
/// terminal effects of A_{k-m} accumulated up to t.
CallablePeriodFunction oracle_mu(const SimStudy& study);

}  // namespace sncure

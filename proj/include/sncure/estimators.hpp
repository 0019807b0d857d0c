#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sncure/equations.hpp"
#include "sncure/learners.hpp"
#include "sncure/terminal_model.hpp"

namespace sncure {

enum class EstimatorKind { parametric, nonparametric, robust };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);

struct LagDiagnostics {
    double numerator = 0.0;
    double denominator = 0.0;
    std::size_t person_periods = 0;
    std::size_t skipped_periods = 0;
    std::size_t clamped_weights = 0;
    double weight_min = 1.0;
    double weight_max = 1.0;
};

LagDiagnostics to_diagnostics(const LagEquation& eq);

struct EffectEstimates {
    std::vector<double> beta;
    EstimatorKind method = EstimatorKind::parametric;
    std::vector<double> se;                         // empty unless inference ran
    std::vector<std::pair<double, double>> ci;      // empty unless inference ran
    double ci_level = 0.0;
    AlphaWeights alpha;
    std::vector<LagDiagnostics> diagnostics;        // one per lag
    std::vector<LagDiagnostics> alpha_diagnostics;  // one per alpha lag
};

/// Every knob of the three estimator configurations.
struct EstimatorConfig {
    EstimatorKind kind = EstimatorKind::parametric;
    int lags = 4;                       // M_lags
    int bins = 5;                       // time-grid bins per period
    int exposure_window = kDefaultExposureWindow;
    LearnerSpec mu_spec = LearnerSpec::default_ensemble();   // nonparametric / robust
    LearnerSpec rho_spec = LearnerSpec::default_ensemble();  // robust
    int folds = 5;                      // robust cross-fitting V
    std::uint64_t seed = 0;             // fold plans and stacking folds
    std::optional<double> weight_cap;

    void validate() const;
};

/// Exposure-model-only estimator. `config.kind` selects the parametric
/// (weighted linear) or nonparametric (learner) exposure model for beta;
/// alpha always comes from the parametric sequence.
EffectEstimates fit_parametric(const Panel& panel, const EstimatorConfig& config);

/// Shared driver for injected nuisances: solves beta_0..beta_lags using the
/// supplied mu_km and alpha. Used by the fitted estimators and by oracle checks.
EffectEstimates solve_sequential(const Panel& panel, const TimeGrid& grid, const PeriodFunction& means,
                                 const AlphaWeights& alpha, int lags, std::optional<double> weight_cap = std::nullopt);

/// Dispatches on config.kind.
EffectEstimates run_estimator(const Panel& panel, const EstimatorConfig& config);

}  // namespace sncure

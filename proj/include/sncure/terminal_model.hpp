#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sncure/equations.hpp"
#include "sncure/weights.hpp"

namespace sncure {

struct AlphaStep {
    double alpha = 0.0;
    LagEquation equation;
};

/// alpha_m from the terminal-event analogue of the lag-m equation: the
/// recurrent process is replaced by the death counting process, whose only
/// jump is at X when death is observed. w_km uses `prefix` (alpha_0..alpha_{m-1}).
AlphaStep estimate_alpha_lag(const Panel& panel, const TimeGrid& grid, int m, const PeriodFunction& means,
                             const std::vector<double>& prefix, std::span<const std::size_t> members = {},
                             std::optional<double> weight_cap = std::nullopt);

/// alpha_0..alpha_lags, each solved with the previously solved prefix.
AlphaWeights estimate_alpha(const Panel& panel, const TimeGrid& grid, const PeriodFunction& means, int lags,
                            std::optional<double> weight_cap = std::nullopt);

/// Parametric exposure models interleaved with the alpha sequence: mu_km is
/// fitted with weights from alpha_0..alpha_{m-1}, then alpha_m is solved.
struct ExposureSequence {
    FittedPeriodFunctions means;
    AlphaWeights alpha;
    std::vector<LagEquation> alpha_equations;
};

ExposureSequence fit_exposure_sequence(const Panel& panel, const TimeGrid& grid, int lags,
                                       int exposure_window = kDefaultExposureWindow,
                                       std::optional<double> weight_cap = std::nullopt);

/// Fits mu_km for every active period k with the given alpha.
FittedPeriodFunctions fit_exposure_lag(const Panel& panel, const TimeGrid& grid, int m,
                                       const std::vector<double>& alpha, const LearnerSpec& spec, MuFlavor flavor,
                                       std::span<const std::size_t> members = {},
                                       int exposure_window = kDefaultExposureWindow,
                                       std::optional<double> weight_cap = std::nullopt);

}  // namespace sncure

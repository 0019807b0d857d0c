#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sncure/estimators.hpp"

namespace sncure {

/// Uniform random partition of n units into V folds with sizes differing by
/// at most one; deterministic given the seed.
struct FoldPlan {
    int folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> assignment;  // unit index -> fold

    std::vector<std::size_t> members(int fold) const;
    std::vector<std::size_t> complement(int fold) const;
};

FoldPlan make_folds(std::size_t n, int folds, std::uint64_t seed);

/// Fold plan over panel individuals that keeps each resampling cluster in
/// one fold. Clusters are the units that get shuffled and dealt.
FoldPlan make_cluster_folds(const Panel& panel, int folds, std::uint64_t seed);

/// rho_km(t): per-unit-time rate of the blipped-down event process given the
/// lag-m history. Stored as the fitted per-bin count times bins-per-period.
struct RhoFit : PeriodFit {
    RhoFit(FeatureBuilder features, PredictorPtr predictor, int bins)
        : PeriodFit(std::move(features), std::move(predictor), static_cast<double>(bins)) {}
};

/// Pseudo-data for rho_km: per member with X >= k and per bin, target
/// (events in bin) - sum_{j<m} A_{k-j} beta_j / bins, weight Y(t) w_km(t).
PseudoData build_pseudo_rho(const Panel& panel, int k, int m, const TimeGrid& grid,
                            const std::vector<double>& beta_prefix, const std::vector<double>& alpha,
                            std::span<const std::size_t> members = {}, int exposure_window = kDefaultExposureWindow,
                            std::optional<double> weight_cap = std::nullopt);

RhoFit fit_rho(const Panel& panel, int k, int m, const TimeGrid& grid, const std::vector<double>& beta_prefix,
               const std::vector<double>& alpha, const LearnerSpec& spec, std::span<const std::size_t> members = {},
               int exposure_window = kDefaultExposureWindow, std::optional<double> weight_cap = std::nullopt);

/// Records which individuals fed each fold's training fits and which were
/// evaluated, so tests can check that they never overlap.
struct RobustAudit {
    struct FoldRecord {
        int lag;
        int fold;
        std::set<std::string> trained_on;
        std::set<std::string> evaluated;
    };
    std::vector<FoldRecord> records;
    std::vector<double> fold_numerators;    // lag-major, fold-minor
    std::vector<double> fold_denominators;
};

/// Nuisances for one lag and fold, trained on `train` only.
struct FoldNuisances {
    std::shared_ptr<const PeriodFunction> means;  // mu_km
    std::shared_ptr<const PeriodFunction> rates;  // rho_km rate
};
using NuisanceFactory = std::function<FoldNuisances(int fold, std::span<const std::size_t> train)>;

/// Pooled cross-fitted equation for lag m: for each fold, nuisances from
/// `factory` are evaluated on the held-out members and the fold numerators
/// and denominators are summed. The slope is the residual, so the
/// denominator integrates w * Delta^2.
LagEquation cross_fit_lag(const Panel& panel, const TimeGrid& grid, const FoldPlan& plan, int m,
                          const std::vector<double>& beta_prefix, const std::vector<double>& alpha,
                          const NuisanceFactory& factory, std::optional<double> weight_cap = std::nullopt,
                          RobustAudit* audit = nullptr);

/// Cross-fitted estimator: for each lag, mu and rho are fitted on each
/// fold's complement, evaluated on the fold, and the pooled ratio
/// sum_v numerator_v / sum_v denominator_v is returned.
EffectEstimates fit_robust(const Panel& panel, const EstimatorConfig& config, RobustAudit* audit = nullptr);

}  // namespace sncure

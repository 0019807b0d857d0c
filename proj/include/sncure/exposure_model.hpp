#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sncure/learners.hpp"
#include "sncure/panel.hpp"
#include "sncure/weights.hpp"

namespace sncure {

inline constexpr int kDefaultExposureWindow = 6;

/// Feature map for the (k, m) nuisance regressions:
///   [A_{k-m-1}, ..., A_{k-m-W}]  (lags reaching before -M are dropped)
///   L_{k-m}                       (current covariates of the exposure period)
///   t - k                         (within-period time)
class FeatureBuilder {
  public:
    FeatureBuilder(const Panel& panel, int k, int m, int exposure_window = kDefaultExposureWindow);

    int k() const { return k_; }
    int m() const { return m_; }
    int exposure_lags() const { return lags_; }
    /// Number of history features (everything except t - k).
    int history_width() const { return lags_ + covariate_width_; }
    int width() const { return history_width() + 1; }

    void fill(const Panel& panel, const Individual& ind, double t, double* row) const;
    Eigen::MatrixXd rows(const Panel& panel, std::span<const std::size_t> individuals,
                         std::span<const double> times) const;

  private:
    int k_;
    int m_;
    int lags_;
    int covariate_width_;
};

/// Replicated (individual x time-bin) regression data.
struct PseudoData {
    Dataset data;
    std::vector<std::size_t> individual;  // panel index per row
    std::vector<double> time;             // bin midpoint per row
    std::size_t contributors = 0;         // individuals with X >= k
};

/// Pseudo-data for the exposure model mu_km. One row per bin midpoint for
/// every member with X >= k; target A_{k-m}; weight Y(t) * w_km(t).
/// `members` empty means the whole panel.
PseudoData build_pseudo_mu(const Panel& panel, int k, int m, const TimeGrid& grid,
                           const std::vector<double>& alpha, std::span<const std::size_t> members = {},
                           int exposure_window = kDefaultExposureWindow,
                           std::optional<double> weight_cap = std::nullopt);

enum class MuFlavor { parametric, nonparametric };

/// A fitted per-period regression evaluable on [k, k+1).
class PeriodFit {
  public:
    PeriodFit(FeatureBuilder features, PredictorPtr predictor, double scale);

    int k() const { return features_.k(); }
    int m() const { return features_.m(); }
    const FeatureBuilder& features() const { return features_; }
    const Predictor& predictor() const { return *predictor_; }

    /// Throws OutOfWindow unless k <= t < k+1.
    double eval(const Panel& panel, const Individual& ind, double t) const;
    std::vector<double> eval(const Panel& panel, std::span<const std::size_t> individuals,
                             std::span<const double> times) const;

  private:
    FeatureBuilder features_;
    PredictorPtr predictor_;
    double scale_;
};

/// mu_km(t): conditional mean of A_{k-m}.
struct MuFit : PeriodFit {
    MuFit(FeatureBuilder features, PredictorPtr predictor, MuFlavor flavor)
        : PeriodFit(std::move(features), std::move(predictor), 1.0), flavor(flavor) {}
    MuFlavor flavor;
};

/// Fits mu_km on pseudo-data. The parametric flavor requires a linear spec
/// and at least history_width + 1 contributing individuals.
MuFit fit_mu(const Panel& panel, int k, int m, const TimeGrid& grid, const std::vector<double>& alpha,
             const LearnerSpec& spec, MuFlavor flavor, std::span<const std::size_t> members = {},
             int exposure_window = kDefaultExposureWindow, std::optional<double> weight_cap = std::nullopt);

inline double eval_mu(const MuFit& fit, const Panel& panel, const Individual& ind, double t) {
    return fit.eval(panel, ind, t);
}

}  // namespace sncure

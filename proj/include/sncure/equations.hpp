#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sncure/exposure_model.hpp"
#include "sncure/panel.hpp"

namespace sncure {

/// Source of per-period nuisance values (mu_km or the rho_km rate) for a
/// batch of (individual, time) points inside period k.
class PeriodFunction {
  public:
    virtual ~PeriodFunction() = default;
    virtual bool available(int k, int m) const = 0;
    virtual std::vector<double> evaluate(const Panel& panel, int k, int m, std::span<const std::size_t> individuals,
                                         std::span<const double> times) const = 0;
};

/// PeriodFunction backed by fitted regressions keyed by (k, m).
class FittedPeriodFunctions final : public PeriodFunction {
  public:
    void insert(PeriodFit fit);
    bool available(int k, int m) const override;
    std::vector<double> evaluate(const Panel& panel, int k, int m, std::span<const std::size_t> individuals,
                                 std::span<const double> times) const override;
    const PeriodFit& at(int k, int m) const;
    std::size_t size() const { return fits_.size(); }

  private:
    std::map<std::pair<int, int>, PeriodFit> fits_;
};

/// PeriodFunction backed by a closed-form callable; used for oracle and
/// hand-set nuisances.
class CallablePeriodFunction final : public PeriodFunction {
  public:
    using Fn = std::function<double(const Panel&, const Individual&, int k, int m, double t)>;
    explicit CallablePeriodFunction(Fn fn) : fn_(std::move(fn)) {}
    bool available(int, int) const override { return true; }
    std::vector<double> evaluate(const Panel& panel, int k, int m, std::span<const std::size_t> individuals,
                                 std::span<const double> times) const override;

  private:
    Fn fn_;
};

enum class CountingProcess { recurrent, terminal };

/// What multiplies the unknown coefficient in the dt term: A_{k-m} for the
/// exposure-model estimators, the residual Delta_km for the robust one.
enum class SlopeTerm { exposure, residual };

/// One lag of a sequential estimating equation:
///   sum_i sum_k int Y w_km Delta_km { dN - sum_{j<m} A_{k-j} c_j dt - drho - S theta dt } = 0
/// which is linear in theta and solved as numerator / denominator.
struct LagEquationInput {
    int m = 0;
    const PeriodFunction* means = nullptr;           // mu_km
    const PeriodFunction* outcome_rate = nullptr;    // rho_km rate; null means 0
    std::vector<double> alpha;                       // for w_km; needs m entries
    std::vector<double> prefix;                      // c_0..c_{m-1}
    CountingProcess process = CountingProcess::recurrent;
    SlopeTerm slope = SlopeTerm::exposure;
    std::span<const std::size_t> members;            // empty = whole panel
    std::optional<double> weight_cap;
};

struct LagEquation {
    double numerator = 0.0;
    double denominator = 0.0;
    std::size_t person_periods = 0;
    std::size_t skipped_periods = 0;   // periods with k - m < -M or no fitted nuisance
    std::size_t clamped_weights = 0;
    double weight_min = 1.0;
    double weight_max = 1.0;
};

LagEquation accumulate_lag(const Panel& panel, const TimeGrid& grid, const LagEquationInput& input);

/// numerator / denominator, or DegenerateDenominator when
/// |denominator| < 1e-10 * person_periods (or anything is non-finite).
double solve_lag(const LagEquation& eq, const std::string& context);

/// Panel copy with individuals sorted by id (stable), making every
/// estimator invariant to input order.
Panel canonical_order(const Panel& panel);

}  // namespace sncure

#pragma once

#include <string>
#include <vector>

#include "sncure/inference.hpp"
#include "sncure/panel.hpp"

namespace sncure {

/// Intervention A*_k = min(A_k, cap).
struct CapScenario {
    double cap = 0.0;
    std::string label;

    void validate() const;
};

struct AvertedEvents {
    double total = 0.0;
    /// cumulative[k] = events averted over [0, min(k + 1, t_end)).
    std::vector<double> cumulative;
};

/// Expected events averted by capping exposures, over OBSERVED at-risk time:
///   sum_i sum_k int_k^{k+1} Y_i(t) sum_m (A_{i,k-m} - min(A_{i,k-m}, cap)) beta_m dt
/// for t < t_end. Lags reaching before the baseline window are left out.
AvertedEvents events_averted(const Panel& panel, const std::vector<double>& beta, const CapScenario& cap,
                             double t_end);

struct AvertedInterval {
    double point = 0.0;
    double sd = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> curve_sd;
    std::vector<double> curve_lo;
    std::vector<double> curve_hi;
};

/// Normal interval around the point-estimate total, with the SD of
/// events_averted over the replicate betas on the original panel.
AvertedInterval averted_ci(const Panel& panel, const std::vector<double>& beta, const BootstrapResult& bootstrap,
                           const CapScenario& cap, double t_end);

}  // namespace sncure

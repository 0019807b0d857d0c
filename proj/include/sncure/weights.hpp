#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sncure/panel.hpp"

namespace sncure {

/// Terminal-event exposure effects alpha_0..alpha_L and what produced them.
struct AlphaWeights {
    std::vector<double> alpha;
    std::string provenance;
};

/// Risk-set adjusting weight w_km(t) for t in [k, k+1).
///
/// w_k0 = 1. For m >= 1 the weight is prod_{j<m} exp{A_{k-j} nu_jk(t)' alpha},
/// where nu_jk(t) is j ones followed by (t - k); term j therefore contributes
/// A_{k-j} * (alpha_0 + ... + alpha_{j-1} + alpha_j (t - k)).
///
/// With `cap` set the weight is clamped into [1/cap, cap] and `*clamped`
/// (when given) is set to whether clamping happened.
double risk_set_weight(const Panel& panel, const Individual& ind, int k, int m, double t,
                       const std::vector<double>& alpha, std::optional<double> cap = std::nullopt,
                       bool* clamped = nullptr);

}  // namespace sncure

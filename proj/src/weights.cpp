#include "sncure/weights.hpp"

#include <algorithm>
#include <cmath>

#include "sncure/errors.hpp"

namespace sncure {

double risk_set_weight(const Panel& panel, const Individual& ind, int k, int m, double t,
                       const std::vector<double>& alpha, std::optional<double> cap, bool* clamped) {
    if (clamped) *clamped = false;
    if (m == 0) return 1.0;
    if (static_cast<int>(alpha.size()) < m)
        throw UsageError("InvalidAlpha", "weight for lag " + std::to_string(m) + " needs " + std::to_string(m) +
                                             " alpha values");
    const double offset = t - k;
    double exponent = 0.0;
    double settled = 0.0;  // alpha_0 + ... + alpha_{j-1}
    for (int j = 0; j < m; ++j) {
        const double a = panel.exposure(ind, k - j);
        exponent += a * (settled + alpha[static_cast<std::size_t>(j)] * offset);
        settled += alpha[static_cast<std::size_t>(j)];
    }
    double w = std::exp(exponent);
    if (cap) {
        const double hi = *cap, lo = 1.0 / *cap;
        if (w > hi || w < lo) {
            if (clamped) *clamped = true;
            w = std::clamp(w, lo, hi);
        }
    }
    return w;
}

}  // namespace sncure

#include "sncure/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

void CapScenario::validate() const {
    if (!(std::isfinite(cap) && cap > 0.0)) throw UsageError("InvalidCap", "cap must be finite and positive");
}

AvertedEvents events_averted(const Panel& panel, const std::vector<double>& beta, const CapScenario& cap,
                             double t_end) {
    cap.validate();
    if (!(t_end > 0.0 && t_end <= panel.tau())) {
        std::ostringstream msg;
        msg << "t_end=" << t_end << " must lie in (0, tau=" << panel.tau() << "]";
        throw UsageError("InvalidHorizon", msg.str());
    }
    const int periods = static_cast<int>(std::ceil(t_end));
    AvertedEvents out;
    out.cumulative.assign(static_cast<std::size_t>(periods), 0.0);
    const int lags = static_cast<int>(beta.size()) - 1;
    for (int k = 0; k < periods; ++k) {
        double period_total = 0.0;
        for (const auto& ind : panel.individuals()) {
            const double length = std::min({k + 1.0, ind.x_time, t_end}) - k;
            if (length <= 0.0) continue;
            double rate = 0.0;
            for (int m = 0; m <= lags; ++m) {
                if (!panel.has_exposure(k - m)) continue;
                const double a = panel.exposure(ind, k - m);
                rate += (a - std::min(a, cap.cap)) * beta[static_cast<std::size_t>(m)];
            }
            period_total += rate * length;
        }
        out.total += period_total;
        out.cumulative[static_cast<std::size_t>(k)] = out.total;
    }
    return out;
}

AvertedInterval averted_ci(const Panel& panel, const std::vector<double>& beta, const BootstrapResult& bootstrap,
                           const CapScenario& cap, double t_end) {
    if (bootstrap.replicates.empty()) throw UsageError("InvalidBootstrap", "no bootstrap replicates");
    const auto point = events_averted(panel, beta, cap, t_end);
    std::vector<std::vector<double>> rows;
    rows.reserve(bootstrap.replicates.size());
    for (const auto& b : bootstrap.replicates) {
        if (b.size() != beta.size()) throw UsageError("DimensionMismatch", "replicate and point betas differ in length");
        const auto rep = events_averted(panel, b, cap, t_end);
        auto row = rep.cumulative;
        row.push_back(rep.total);
        rows.push_back(std::move(row));
    }
    const auto sd = replicate_sd(rows);
    const double z = normal_critical(bootstrap.ci_level);

    AvertedInterval out;
    out.point = point.total;
    out.sd = sd.back();
    out.lo = point.total - z * out.sd;
    out.hi = point.total + z * out.sd;
    for (std::size_t k = 0; k < point.cumulative.size(); ++k) {
        out.curve_sd.push_back(sd[k]);
        out.curve_lo.push_back(point.cumulative[k] - z * sd[k]);
        out.curve_hi.push_back(point.cumulative[k] + z * sd[k]);
    }
    return out;
}

}  // namespace sncure

#include "sncure/panel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

Panel::Panel(std::vector<Individual> individuals, int baseline_len, int horizon, double tau,
             int covariate_width)
    : individuals_(std::move(individuals)),
      baseline_len_(baseline_len),
      horizon_(horizon),
      tau_(tau),
      covariate_width_(covariate_width) {
    if (baseline_len < 0) throw UsageError("InvalidPanel", "baseline length must be >= 0");
    if (!(tau > 0.0)) throw UsageError("InvalidPanel", "tau must be positive");
    if (horizon < 0) throw UsageError("InvalidPanel", "horizon must be >= 0");
    if (covariate_width < 0) throw UsageError("InvalidPanel", "covariate width must be >= 0");
}

int Panel::last_period() const {
    const int by_tau = static_cast<int>(std::ceil(tau_)) - 1;
    return std::min(horizon_, by_tau);
}

int Panel::covariate_rows(const Individual& ind) const {
    if (covariate_width_ == 0) return static_cast<int>(std::floor(ind.x_time)) + baseline_len_ + 1;
    return static_cast<int>(ind.covariates.size() / static_cast<std::size_t>(covariate_width_));
}

std::span<const double> Panel::covariates(const Individual& ind, int k) const {
    const auto row = static_cast<std::size_t>(k + baseline_len_);
    const auto width = static_cast<std::size_t>(covariate_width_);
    return {ind.covariates.data() + row * width, width};
}

Panel Panel::subset(std::span<const std::size_t> indices) const {
    std::vector<Individual> picked;
    picked.reserve(indices.size());
    for (auto i : indices) picked.push_back(individuals_.at(i));
    return Panel(std::move(picked), baseline_len_, horizon_, tau_, covariate_width_);
}

TimeGrid::TimeGrid(int bins_per_period) : bins_(bins_per_period) {
    if (bins_per_period < 1) throw UsageError("InvalidGrid", "bins per period must be >= 1");
}

std::vector<double> TimeGrid::midpoints(int k) const {
    std::vector<double> out(static_cast<std::size_t>(bins_));
    for (int b = 0; b < bins_; ++b) out[static_cast<std::size_t>(b)] = midpoint(k, b);
    return out;
}

std::vector<QuadNode> at_risk_nodes(const Individual& ind, int k, const TimeGrid& grid) {
    std::vector<QuadNode> nodes;
    nodes.reserve(static_cast<std::size_t>(grid.bins()));
    for (int b = 0; b < grid.bins(); ++b) {
        const double lo = grid.bin_start(k, b);
        const double hi = b + 1 == grid.bins() ? k + 1.0 : grid.bin_start(k, b + 1);
        if (ind.x_time <= lo) break;
        const double end = std::min(hi, ind.x_time);
        nodes.push_back({b, 0.5 * (lo + end), end - lo});
    }
    return nodes;
}

EventSlice events_in(const Individual& ind, double a, double b) {
    const auto first = std::lower_bound(ind.event_times.begin(), ind.event_times.end(), a);
    const auto last = std::lower_bound(first, ind.event_times.end(), b);
    const auto count = static_cast<std::size_t>(last - first);
    return {count, std::span<const double>(ind.event_times.data() + (first - ind.event_times.begin()), count)};
}

std::string ValidationReport::summary(std::size_t max_items) const {
    std::ostringstream out;
    out << violations.size() << " violation(s)";
    for (std::size_t i = 0; i < violations.size() && i < max_items; ++i) {
        const auto& v = violations[i];
        out << "\n  individual " << v.id << " (#" << v.individual << "): " << v.message;
    }
    return out.str();
}

ValidationReport validate_panel(const Panel& panel) {
    ValidationReport report;
    const int M = panel.baseline_len();
    const auto expected_exposures = static_cast<std::size_t>(panel.horizon() + M + 1);
    const auto width = static_cast<std::size_t>(panel.covariate_width());

    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto& ind = panel[i];
        auto flag = [&](std::string msg) { report.violations.push_back({i, ind.id, std::move(msg)}); };

        if (!(ind.x_time > 0.0)) flag("x_time must be positive (individual must be at risk at t=0)");
        if (ind.x_time > panel.tau()) flag("x_time exceeds tau");
        if (!std::isfinite(ind.x_time)) flag("x_time is not finite");

        if (ind.exposures.size() < expected_exposures) {
            flag("exposure series incomplete");
        } else if (ind.exposures.size() > expected_exposures) {
            flag("exposure series longer than -M..K");
        }
        for (double a : ind.exposures) {
            if (!std::isfinite(a)) {
                flag("exposure not finite");
                break;
            }
        }

        if (std::isfinite(ind.x_time) && ind.x_time > 0.0) {
            const auto rows = static_cast<std::size_t>(std::floor(ind.x_time)) + static_cast<std::size_t>(M) + 1;
            if (width > 0) {
                if (ind.covariates.size() % width != 0) {
                    flag("covariate rows have non-uniform width");
                } else if (ind.covariates.size() > rows * width) {
                    flag("covariate rows past floor(X)");
                } else if (ind.covariates.size() < rows * width) {
                    flag("covariate series incomplete");
                }
            }
            for (double v : ind.covariates) {
                if (!std::isfinite(v)) {
                    flag("covariate not finite");
                    break;
                }
            }
        }

        double prev = 0.0;
        for (double t : ind.event_times) {
            if (!std::isfinite(t) || t <= prev) {
                flag("event times not strictly increasing and positive");
                break;
            }
            prev = t;
        }
        if (!ind.event_times.empty() && ind.event_times.back() > ind.x_time) flag("event after X");
    }
    return report;
}

}  // namespace sncure

#include "sncure/equations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

void FittedPeriodFunctions::insert(PeriodFit fit) {
    const auto key = std::make_pair(fit.k(), fit.m());
    fits_.insert_or_assign(key, std::move(fit));
}

bool FittedPeriodFunctions::available(int k, int m) const { return fits_.count({k, m}) != 0; }

const PeriodFit& FittedPeriodFunctions::at(int k, int m) const {
    const auto it = fits_.find({k, m});
    if (it == fits_.end())
        throw UsageError("MissingFit", "no fit for k=" + std::to_string(k) + ", m=" + std::to_string(m));
    return it->second;
}

std::vector<double> FittedPeriodFunctions::evaluate(const Panel& panel, int k, int m,
                                                    std::span<const std::size_t> individuals,
                                                    std::span<const double> times) const {
    return at(k, m).eval(panel, individuals, times);
}

std::vector<double> CallablePeriodFunction::evaluate(const Panel& panel, int k, int m,
                                                     std::span<const std::size_t> individuals,
                                                     std::span<const double> times) const {
    std::vector<double> out(individuals.size());
    for (std::size_t i = 0; i < individuals.size(); ++i) out[i] = fn_(panel, panel[individuals[i]], k, m, times[i]);
    return out;
}

LagEquation accumulate_lag(const Panel& panel, const TimeGrid& grid, const LagEquationInput& input) {
    if (input.means == nullptr) throw UsageError("InvalidEquation", "exposure means are required");
    if (static_cast<int>(input.prefix.size()) != input.m)
        throw UsageError("InvalidEquation", "prefix must hold one coefficient per earlier lag");

    std::vector<std::size_t> pool;
    if (input.members.empty()) {
        pool.resize(panel.size());
        std::iota(pool.begin(), pool.end(), 0);
    } else {
        pool.assign(input.members.begin(), input.members.end());
    }

    const int m = input.m;
    LagEquation eq;
    bool weights_seen = false;
    auto track_weight = [&](double w, bool clamped) {
        eq.weight_min = weights_seen ? std::min(eq.weight_min, w) : w;
        eq.weight_max = weights_seen ? std::max(eq.weight_max, w) : w;
        weights_seen = true;
        eq.clamped_weights += clamped ? 1 : 0;
    };

    std::vector<std::size_t> quad_ind, point_ind;
    std::vector<double> quad_t, quad_len, point_t;

    for (int k = 0; k <= panel.last_period(); ++k) {
        quad_ind.clear();
        quad_t.clear();
        quad_len.clear();
        point_ind.clear();
        point_t.clear();
        std::size_t contributors = 0;
        for (auto i : pool) {
            const auto& ind = panel[i];
            if (ind.x_time < k) continue;
            ++contributors;
            for (const auto& node : at_risk_nodes(ind, k, grid)) {
                quad_ind.push_back(i);
                quad_t.push_back(node.t);
                quad_len.push_back(node.length);
            }
            if (input.process == CountingProcess::recurrent) {
                for (double t : events_in(ind, k, k + 1.0).times) {
                    point_ind.push_back(i);
                    point_t.push_back(t);
                }
            } else if (ind.death_observed && ind.x_time >= k && ind.x_time < k + 1.0) {
                point_ind.push_back(i);
                point_t.push_back(ind.x_time);
            }
        }
        if (contributors == 0) continue;
        if (k - m < -panel.baseline_len() || !input.means->available(k, m) ||
            (input.outcome_rate != nullptr && !input.outcome_rate->available(k, m))) {
            ++eq.skipped_periods;
            continue;
        }
        eq.person_periods += contributors;

        const auto mu_quad = input.means->evaluate(panel, k, m, quad_ind, quad_t);
        const auto mu_point = input.means->evaluate(panel, k, m, point_ind, point_t);
        std::vector<double> rho_quad;
        if (input.outcome_rate != nullptr) rho_quad = input.outcome_rate->evaluate(panel, k, m, quad_ind, quad_t);

        for (std::size_t q = 0; q < quad_ind.size(); ++q) {
            const auto& ind = panel[quad_ind[q]];
            bool clamped = false;
            const double w = risk_set_weight(panel, ind, k, m, quad_t[q], input.alpha, input.weight_cap, &clamped);
            track_weight(w, clamped);
            const double a = panel.exposure(ind, k - m);
            const double delta = a - mu_quad[q];
            double offset = 0.0;
            for (int j = 0; j < m; ++j) offset += panel.exposure(ind, k - j) * input.prefix[static_cast<std::size_t>(j)];
            if (!rho_quad.empty()) offset += rho_quad[q];
            const double slope = input.slope == SlopeTerm::exposure ? a : delta;
            eq.numerator -= w * delta * offset * quad_len[q];
            eq.denominator += w * delta * slope * quad_len[q];
        }
        for (std::size_t q = 0; q < point_ind.size(); ++q) {
            const auto& ind = panel[point_ind[q]];
            bool clamped = false;
            const double w = risk_set_weight(panel, ind, k, m, point_t[q], input.alpha, input.weight_cap, &clamped);
            track_weight(w, clamped);
            eq.numerator += w * (panel.exposure(ind, k - m) - mu_point[q]);
        }
    }
    return eq;
}

double solve_lag(const LagEquation& eq, const std::string& context) {
    if (!std::isfinite(eq.numerator) || !std::isfinite(eq.denominator)) {
        throw NumericalError("NonFiniteEquation", context + ": estimating equation produced a non-finite value");
    }
    const double floor = 1e-10 * static_cast<double>(eq.person_periods);
    if (eq.person_periods == 0 || std::abs(eq.denominator) < floor) {
        std::ostringstream msg;
        msg << context << ": |denominator| = " << std::abs(eq.denominator) << " below " << floor << " ("
            << eq.person_periods << " person-periods)";
        throw degenerate_denominator(msg.str());
    }
    return eq.numerator / eq.denominator;
}

Panel canonical_order(const Panel& panel) {
    std::vector<std::size_t> order(panel.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return panel[a].id < panel[b].id; });
    return panel.subset(order);
}

}  // namespace sncure

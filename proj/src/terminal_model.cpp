#include "sncure/terminal_model.hpp"

#include "sncure/errors.hpp"

namespace sncure {

AlphaStep estimate_alpha_lag(const Panel& panel, const TimeGrid& grid, int m, const PeriodFunction& means,
                             const std::vector<double>& prefix, std::span<const std::size_t> members,
                             std::optional<double> weight_cap) {
    LagEquationInput input;
    input.m = m;
    input.means = &means;
    input.alpha = prefix;
    input.prefix = prefix;
    input.process = CountingProcess::terminal;
    input.slope = SlopeTerm::exposure;
    input.members = members;
    input.weight_cap = weight_cap;
    AlphaStep step;
    step.equation = accumulate_lag(panel, grid, input);
    step.alpha = solve_lag(step.equation, "alpha_" + std::to_string(m));
    return step;
}

AlphaWeights estimate_alpha(const Panel& panel, const TimeGrid& grid, const PeriodFunction& means, int lags,
                            std::optional<double> weight_cap) {
    AlphaWeights out;
    out.provenance = "supplied exposure means";
    for (int m = 0; m <= lags; ++m)
        out.alpha.push_back(estimate_alpha_lag(panel, grid, m, means, out.alpha, {}, weight_cap).alpha);
    return out;
}

FittedPeriodFunctions fit_exposure_lag(const Panel& panel, const TimeGrid& grid, int m,
                                       const std::vector<double>& alpha, const LearnerSpec& spec, MuFlavor flavor,
                                       std::span<const std::size_t> members, int exposure_window,
                                       std::optional<double> weight_cap) {
    FittedPeriodFunctions out;
    std::vector<std::size_t> pool(members.begin(), members.end());
    for (int k = 0; k <= panel.last_period(); ++k) {
        if (k - m < -panel.baseline_len()) continue;
        bool anyone = false;
        if (pool.empty()) {
            for (const auto& ind : panel.individuals()) anyone = anyone || ind.x_time >= k;
        } else {
            for (auto i : pool) anyone = anyone || panel[i].x_time >= k;
        }
        if (!anyone) continue;
        LearnerSpec local = spec;
        local.seed = spec.seed ^ (static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(m));
        out.insert(fit_mu(panel, k, m, grid, alpha, local, flavor, members, exposure_window, weight_cap));
    }
    return out;
}

ExposureSequence fit_exposure_sequence(const Panel& panel, const TimeGrid& grid, int lags, int exposure_window,
                                       std::optional<double> weight_cap) {
    ExposureSequence seq;
    seq.alpha.provenance = "parametric exposure models, full sample";
    const auto linear = LearnerSpec::linear();
    for (int m = 0; m <= lags; ++m) {
        auto fits = fit_exposure_lag(panel, grid, m, seq.alpha.alpha, linear, MuFlavor::parametric, {},
                                     exposure_window, weight_cap);
        const auto step = estimate_alpha_lag(panel, grid, m, fits, seq.alpha.alpha, {}, weight_cap);
        for (int k = 0; k <= panel.last_period(); ++k)
            if (fits.available(k, m)) seq.means.insert(fits.at(k, m));
        seq.alpha.alpha.push_back(step.alpha);
        seq.alpha_equations.push_back(step.equation);
    }
    return seq;
}

}  // namespace sncure

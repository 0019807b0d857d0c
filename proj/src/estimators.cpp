#include "sncure/estimators.hpp"

#include "sncure/errors.hpp"
#include "sncure/robust.hpp"

namespace sncure {

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::parametric:
            return "parametric";
        case EstimatorKind::nonparametric:
            return "nonparametric";
        case EstimatorKind::robust:
            return "robust";
    }
    return "unknown";
}

EstimatorKind parse_estimator(const std::string& name) {
    if (name == "parametric") return EstimatorKind::parametric;
    if (name == "nonparametric") return EstimatorKind::nonparametric;
    if (name == "robust") return EstimatorKind::robust;
    throw UsageError("InvalidEstimator", "unknown estimator '" + name + "'");
}

LagDiagnostics to_diagnostics(const LagEquation& eq) {
    return {eq.numerator,       eq.denominator,     eq.person_periods, eq.skipped_periods,
            eq.clamped_weights, eq.weight_min,      eq.weight_max};
}

void EstimatorConfig::validate() const {
    if (lags < 0) throw UsageError("InvalidConfig", "lags must be >= 0");
    if (bins < 1) throw UsageError("InvalidConfig", "bins must be >= 1");
    if (exposure_window < 0) throw UsageError("InvalidConfig", "exposure_window must be >= 0");
    if (kind == EstimatorKind::robust && folds < 2) throw UsageError("InvalidConfig", "folds must be >= 2");
    if (weight_cap && !(*weight_cap >= 1.0)) throw UsageError("InvalidConfig", "weight_cap must be >= 1");
    if (kind != EstimatorKind::parametric) mu_spec.validate();
    if (kind == EstimatorKind::robust) rho_spec.validate();
}

EffectEstimates solve_sequential(const Panel& panel, const TimeGrid& grid, const PeriodFunction& means,
                                 const AlphaWeights& alpha, int lags, std::optional<double> weight_cap) {
    EffectEstimates out;
    out.alpha = alpha;
    for (int m = 0; m <= lags; ++m) {
        LagEquationInput input;
        input.m = m;
        input.means = &means;
        input.alpha = alpha.alpha;
        input.prefix = out.beta;
        input.process = CountingProcess::recurrent;
        input.slope = SlopeTerm::exposure;
        input.weight_cap = weight_cap;
        const auto eq = accumulate_lag(panel, grid, input);
        out.beta.push_back(solve_lag(eq, "beta_" + std::to_string(m)));
        out.diagnostics.push_back(to_diagnostics(eq));
    }
    return out;
}

EffectEstimates fit_parametric(const Panel& input_panel, const EstimatorConfig& config) {
    config.validate();
    if (config.kind == EstimatorKind::robust)
        throw UsageError("InvalidEstimator", "fit_parametric handles the exposure-model-only estimators");
    const Panel panel = canonical_order(input_panel);
    const TimeGrid grid(config.bins);

    auto sequence = fit_exposure_sequence(panel, grid, config.lags, config.exposure_window, config.weight_cap);
    EffectEstimates out;
    if (config.kind == EstimatorKind::parametric) {
        out = solve_sequential(panel, grid, sequence.means, sequence.alpha, config.lags, config.weight_cap);
    } else {
        FittedPeriodFunctions flexible;
        for (int m = 0; m <= config.lags; ++m) {
            LearnerSpec spec = config.mu_spec;
            spec.seed = config.seed + static_cast<std::uint64_t>(m);
            auto fits = fit_exposure_lag(panel, grid, m, sequence.alpha.alpha, spec, MuFlavor::nonparametric, {},
                                         config.exposure_window, config.weight_cap);
            for (int k = 0; k <= panel.last_period(); ++k)
                if (fits.available(k, m)) flexible.insert(fits.at(k, m));
        }
        out = solve_sequential(panel, grid, flexible, sequence.alpha, config.lags, config.weight_cap);
    }
    out.method = config.kind;
    for (const auto& eq : sequence.alpha_equations) out.alpha_diagnostics.push_back(to_diagnostics(eq));
    return out;
}

EffectEstimates run_estimator(const Panel& panel, const EstimatorConfig& config) {
    if (config.kind == EstimatorKind::robust) return fit_robust(panel, config);
    return fit_parametric(panel, config);
}

}  // namespace sncure

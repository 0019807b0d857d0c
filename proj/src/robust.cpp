#include "sncure/robust.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

std::vector<std::size_t> FoldPlan::members(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::complement(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(i);
    return out;
}

FoldPlan make_folds(std::size_t n, int folds, std::uint64_t seed) {
    if (folds < 2) throw UsageError("InvalidConfig", "cross-fitting needs at least 2 folds");
    if (n < static_cast<std::size_t>(folds)) {
        std::ostringstream msg;
        msg << n << " units cannot fill " << folds << " folds";
        throw UsageError("TooFewIndividuals", msg.str());
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    FoldPlan plan;
    plan.folds = folds;
    plan.seed = seed;
    plan.assignment.assign(n, 0);
    for (std::size_t pos = 0; pos < n; ++pos) plan.assignment[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    return plan;
}

FoldPlan make_cluster_folds(const Panel& panel, int folds, std::uint64_t seed) {
    // Clusters are numbered by first appearance, so the plan depends only on panel order.
    std::map<std::string, std::size_t> cluster_index;
    std::vector<std::size_t> unit(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) {
        const auto [it, inserted] = cluster_index.try_emplace(panel[i].cluster_key(), cluster_index.size());
        unit[i] = it->second;
    }
    const auto units = make_folds(cluster_index.size(), folds, seed);
    FoldPlan plan;
    plan.folds = folds;
    plan.seed = seed;
    plan.assignment.resize(panel.size());
    for (std::size_t i = 0; i < panel.size(); ++i) plan.assignment[i] = units.assignment[unit[i]];
    return plan;
}

PseudoData build_pseudo_rho(const Panel& panel, int k, int m, const TimeGrid& grid,
                            const std::vector<double>& beta_prefix, const std::vector<double>& alpha,
                            std::span<const std::size_t> members, int exposure_window,
                            std::optional<double> weight_cap) {
    if (static_cast<int>(beta_prefix.size()) != m)
        throw UsageError("InvalidEquation", "beta prefix must hold one coefficient per earlier lag");
    // Same rows and weights as the exposure model; only the target differs.
    PseudoData out = build_pseudo_mu(panel, k, m, grid, alpha, members, exposure_window, weight_cap);
    const double width = grid.width();
    for (std::size_t r = 0; r < out.individual.size(); ++r) {
        const auto& ind = panel[out.individual[r]];
        const int b = static_cast<int>(r % static_cast<std::size_t>(grid.bins()));
        const double start = grid.bin_start(k, b);
        double target = static_cast<double>(events_in(ind, start, start + width).count);
        for (int j = 0; j < m; ++j) target -= panel.exposure(ind, k - j) * beta_prefix[static_cast<std::size_t>(j)] * width;
        out.data.targets(static_cast<Eigen::Index>(r)) = target;
    }
    return out;
}

RhoFit fit_rho(const Panel& panel, int k, int m, const TimeGrid& grid, const std::vector<double>& beta_prefix,
               const std::vector<double>& alpha, const LearnerSpec& spec, std::span<const std::size_t> members,
               int exposure_window, std::optional<double> weight_cap) {
    PseudoData pseudo = build_pseudo_rho(panel, k, m, grid, beta_prefix, alpha, members, exposure_window, weight_cap);
    FeatureBuilder features(panel, k, m, exposure_window);
    std::ostringstream where;
    where << "outcome model (k=" << k << ", m=" << m << ")";
    if (pseudo.data.weights.size() == 0 || pseudo.data.weights.maxCoeff() <= 0.0)
        throw degenerate_design(where.str() + ": no individual at risk");
    try {
        return RhoFit(std::move(features), fit(spec, pseudo.data), grid.bins());
    } catch (const NumericalError& e) {
        throw NumericalError(e.name(), where.str() + ": " + e.detail());
    }
}

namespace {

FittedPeriodFunctions fit_rho_lag(const Panel& panel, const TimeGrid& grid, int m, const std::vector<double>& beta,
                                  const std::vector<double>& alpha, const LearnerSpec& spec,
                                  std::span<const std::size_t> members, int exposure_window,
                                  std::optional<double> weight_cap) {
    FittedPeriodFunctions out;
    for (int k = 0; k <= panel.last_period(); ++k) {
        if (k - m < -panel.baseline_len()) continue;
        bool anyone = false;
        for (auto i : members) anyone = anyone || panel[i].x_time >= k;
        if (!anyone) continue;
        LearnerSpec local = spec;
        local.seed = spec.seed ^ (static_cast<std::uint64_t>(k) * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(m));
        out.insert(fit_rho(panel, k, m, grid, beta, alpha, local, members, exposure_window, weight_cap));
    }
    return out;
}

std::set<std::string> ids_of(const Panel& panel, std::span<const std::size_t> members) {
    std::set<std::string> out;
    for (auto i : members) out.insert(panel[i].cluster_key());
    return out;
}

}  // namespace

LagEquation cross_fit_lag(const Panel& panel, const TimeGrid& grid, const FoldPlan& plan, int m,
                          const std::vector<double>& beta_prefix, const std::vector<double>& alpha,
                          const NuisanceFactory& factory, std::optional<double> weight_cap, RobustAudit* audit) {
    if (plan.assignment.size() != panel.size()) throw UsageError("InvalidFolds", "fold plan does not match the panel");
    LagEquation pooled;
    bool weights_seen = false;
    for (int v = 0; v < plan.folds; ++v) {
        const auto train = plan.complement(v);
        const auto held_out = plan.members(v);
        FoldNuisances nuisances;
        try {
            nuisances = factory(v, train);
        } catch (const NumericalError& e) {
            throw NumericalError(e.name(), "fold " + std::to_string(v) + ": " + e.detail());
        }

        LagEquationInput input;
        input.m = m;
        input.means = nuisances.means.get();
        input.outcome_rate = nuisances.rates.get();
        input.alpha = alpha;
        input.prefix = beta_prefix;
        input.process = CountingProcess::recurrent;
        input.slope = SlopeTerm::residual;
        input.members = held_out;
        input.weight_cap = weight_cap;
        const auto eq = accumulate_lag(panel, grid, input);

        pooled.numerator += eq.numerator;
        pooled.denominator += eq.denominator;
        pooled.person_periods += eq.person_periods;
        pooled.skipped_periods += eq.skipped_periods;
        pooled.clamped_weights += eq.clamped_weights;
        if (eq.person_periods > 0) {
            pooled.weight_min = weights_seen ? std::min(pooled.weight_min, eq.weight_min) : eq.weight_min;
            pooled.weight_max = weights_seen ? std::max(pooled.weight_max, eq.weight_max) : eq.weight_max;
            weights_seen = true;
        }
        if (audit != nullptr) {
            audit->records.push_back({m, v, ids_of(panel, train), ids_of(panel, held_out)});
            audit->fold_numerators.push_back(eq.numerator);
            audit->fold_denominators.push_back(eq.denominator);
        }
    }
    return pooled;
}

EffectEstimates fit_robust(const Panel& input_panel, const EstimatorConfig& config, RobustAudit* audit) {
    config.validate();
    if (config.kind != EstimatorKind::robust) throw UsageError("InvalidEstimator", "fit_robust needs kind=robust");
    const Panel panel = canonical_order(input_panel);
    const TimeGrid grid(config.bins);
    const FoldPlan plan = make_cluster_folds(panel, config.folds, config.seed);

    const auto sequence = fit_exposure_sequence(panel, grid, config.lags, config.exposure_window, config.weight_cap);
    const auto& alpha = sequence.alpha.alpha;

    EffectEstimates out;
    out.method = EstimatorKind::robust;
    out.alpha = sequence.alpha;
    for (const auto& eq : sequence.alpha_equations) out.alpha_diagnostics.push_back(to_diagnostics(eq));

    for (int m = 0; m <= config.lags; ++m) {
        auto factory = [&](int v, std::span<const std::size_t> train) {
            LearnerSpec mu_spec = config.mu_spec;
            mu_spec.seed = config.seed + 1000003ULL * static_cast<std::uint64_t>(v) + static_cast<std::uint64_t>(m);
            LearnerSpec rho_spec = config.rho_spec;
            rho_spec.seed = mu_spec.seed ^ 0x5DEECE66DULL;
            FoldNuisances n;
            n.means = std::make_shared<FittedPeriodFunctions>(fit_exposure_lag(
                panel, grid, m, alpha, mu_spec, MuFlavor::nonparametric, train, config.exposure_window,
                config.weight_cap));
            n.rates = std::make_shared<FittedPeriodFunctions>(
                fit_rho_lag(panel, grid, m, out.beta, alpha, rho_spec, train, config.exposure_window, config.weight_cap));
            return n;
        };
        const auto pooled = cross_fit_lag(panel, grid, plan, m, out.beta, alpha, factory, config.weight_cap, audit);
        out.beta.push_back(solve_lag(pooled, "beta_" + std::to_string(m)));
        out.diagnostics.push_back(to_diagnostics(pooled));
    }
    return out;
}

}  // namespace sncure

#include "sncure/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "sncure/errors.hpp"

namespace sncure {

std::string to_string(Scenario scenario) { return scenario == Scenario::simple ? "simple" : "complex"; }

Scenario parse_scenario(const std::string& name) {
    if (name == "simple") return Scenario::simple;
    if (name == "complex") return Scenario::complex;
    throw UsageError("InvalidScenario", "unknown scenario '" + name + "'");
}

void SimConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw UsageError("InvalidConfig", field + ": " + why);
    };
    if (n < 1) fail("n", "must be >= 1");
    if (horizon < 1) fail("K", "must be >= 1");
    if (baseline < 0) fail("M", "must be >= 0");
    if (!(sigma1 >= 0.0) || !(sigma2 >= 0.0)) fail("sigma", "must be >= 0");
    if (!(ar >= 0.0 && ar < 1.0)) fail("ar", "must lie in [0, 1)");
    if (!(frailty_mean >= 0.0)) fail("frailty_mean", "must be >= 0");
    if (beta_true.empty()) fail("beta_true", "must be non-empty");
    if (static_cast<int>(beta_true.size()) > baseline + 1) fail("beta_true", "at most M + 1 lags");
    if (static_cast<int>(alpha_true.size()) > baseline + 1) fail("alpha_true", "at most M + 1 lags");
    for (double b : beta_true)
        if (!std::isfinite(b)) fail("beta_true", "must be finite");
    for (double a : alpha_true)
        if (!(a >= 0.0)) fail("alpha_true", "must be >= 0");
    if (!(censor_scale >= 0.0)) fail("censor_scale", "must be >= 0");
    if (!(var_ratio > 0.0)) fail("var_ratio", "must be > 0");
    if (c_override && !(*c_override >= 0.0)) fail("c", "must be >= 0");
}

namespace {

std::mt19937_64 substream(std::uint64_t seed, std::size_t individual, std::uint32_t pass) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(individual), static_cast<std::uint32_t>(individual >> 32), pass};
    return std::mt19937_64(seq);
}

double sd_of(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

std::string padded_id(std::size_t i, std::size_t n) {
    const std::size_t digits = std::max<std::size_t>(6, std::to_string(n).size());
    std::string s = std::to_string(i);
    return "S" + std::string(digits - s.size(), '0') + s;
}

}  // namespace

void sim_covariates(const SimConfig& config, std::mt19937_64& rng, LatentTrajectory& out) {
    const std::size_t len = static_cast<std::size_t>(config.baseline + config.horizon + 1);
    std::normal_distribution<double> z(0.0, 1.0);
    const double innovation = std::sqrt(1.0 - config.ar * config.ar);
    out.l1.resize(len);
    out.l2.resize(len);
    out.l1[0] = config.sigma1 * z(rng);
    out.l2[0] = config.sigma2 * z(rng);
    for (std::size_t j = 1; j < len; ++j) {
        out.l1[j] = config.ar * out.l1[j - 1] + config.sigma1 * innovation * z(rng);
        out.l2[j] = config.ar * out.l2[j - 1] + config.sigma2 * innovation * z(rng);
    }
}

double exposure_mean(Scenario scenario, double l1, double l2) {
    if (scenario == Scenario::simple) return l1 + 0.5 * l2;
    return 2.0 * l1 * l1 + 2.0 * l1 * std::abs(l2 - 1.0);
}

void sim_exposures(const SimConfig& config, std::mt19937_64& rng, LatentTrajectory& out) {
    std::normal_distribution<double> z(0.0, 1.0);
    out.raw_mean.resize(out.l1.size());
    out.raw_exposure.resize(out.l1.size());
    for (std::size_t j = 0; j < out.l1.size(); ++j) {
        out.raw_mean[j] = exposure_mean(config.scenario, out.l1[j], out.l2[j]);
        out.raw_exposure[j] = out.raw_mean[j] + z(rng);
    }
}

double calibrate_c(std::span<const double> effect_terms, std::span<const double> eta_terms, double var_ratio) {
    const double sd_effect = sd_of(effect_terms);
    const double sd_eta = sd_of(eta_terms);
    if (!(sd_effect > 0.0) || !(sd_eta > 0.0))
        throw NumericalError("ZeroVariance", "calibration pilot has zero variance in the exposure effect or eta");
    return std::sqrt(var_ratio) * sd_effect / sd_eta;
}

double invert_cumulative_hazard(std::span<const double> rates, double start, double target) {
    double pos = start;
    double remaining = target;
    for (auto j = static_cast<std::size_t>(std::max(0.0, std::floor(start))); j < rates.size(); ++j) {
        const double end = static_cast<double>(j) + 1.0;
        if (rates[j] > 0.0) {
            const double mass = rates[j] * (end - pos);
            if (mass >= remaining) return pos + remaining / rates[j];
            remaining -= mass;
        }
        pos = end;
    }
    return std::numeric_limits<double>::infinity();
}

std::vector<double> sim_event_times(std::span<const double> rates, double horizon, std::mt19937_64& rng) {
    std::exponential_distribution<double> gap(1.0);
    std::vector<double> out;
    double t = 0.0;
    while (true) {
        t = invert_cumulative_hazard(rates, t, gap(rng));
        if (!(t < horizon)) break;
        out.push_back(t);
    }
    return out;
}

SimStudy simulate_study(const SimConfig& config) {
    config.validate();
    const int M = config.baseline;
    const int K = config.horizon;
    const auto n = static_cast<std::size_t>(config.n);
    const auto idx = [M](int k) { return static_cast<std::size_t>(k + M); };

    SimStudy study;
    study.latent.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = substream(config.seed, i, 1);
        auto& lat = study.latent[i];
        sim_covariates(config, rng, lat);
        lat.frailty = config.frailty_mean > 0.0 ? std::exponential_distribution<double>(1.0 / config.frailty_mean)(rng) : 0.0;
        sim_exposures(config, rng, lat);
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& lat : study.latent)
        for (double a : lat.raw_exposure) {
            lo = std::min(lo, a);
            hi = std::max(hi, a);
        }
    if (!(hi > lo)) throw NumericalError("ZeroVariance", "raw exposures are constant");
    const double range = hi - lo;
    std::vector<std::vector<double>> exposures(n);
    for (std::size_t i = 0; i < n; ++i) {
        exposures[i].resize(study.latent[i].raw_exposure.size());
        for (std::size_t j = 0; j < exposures[i].size(); ++j) exposures[i][j] = (study.latent[i].raw_exposure[j] - lo) / range;
    }

    auto effect = [&](std::size_t i, int k) {
        double s = 0.0;
        for (std::size_t m = 0; m < config.beta_true.size(); ++m) {
            const int j = k - static_cast<int>(m);
            if (j >= -M) s += exposures[i][idx(j)] * config.beta_true[m];
        }
        return s;
    };
    auto eta = [&](std::size_t i, int k) {
        const auto& lat = study.latent[i];
        const double l1 = lat.l1[idx(k)], l2 = lat.l2[idx(k)];
        return lat.frailty * std::exp(l1 + l1 * l1 + l2 - 1.0);
    };

    double c = 0.0;
    if (config.c_override) {
        c = *config.c_override;
    } else {
        std::vector<double> effects, etas;
        effects.reserve(n * static_cast<std::size_t>(K));
        etas.reserve(n * static_cast<std::size_t>(K));
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < K; ++k) {
                effects.push_back(effect(i, k));
                etas.push_back(eta(i, k));
            }
        c = calibrate_c(effects, etas, config.var_ratio);
    }

    const double tau = K;
    const int width = config.expose_frailty ? 3 : 2;
    std::vector<Individual> people(n);
    SimMetadata& meta = study.metadata;
    std::vector<double> rate(static_cast<std::size_t>(K)), death(rate.size()), censor(rate.size());
    std::exponential_distribution<double> unit(1.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto rng = substream(config.seed, i, 2);
        const auto& lat = study.latent[i];
        for (int k = 0; k < K; ++k) {
            const double l1 = lat.l1[idx(k)], l2 = lat.l2[idx(k)];
            const double base = std::exp(l1 + l2 - 1.0);
            rate[static_cast<std::size_t>(k)] = effect(i, k) + c * eta(i, k);
            double d = lat.frailty * base;
            for (std::size_t m = 0; m < config.alpha_true.size(); ++m) {
                const int j = k - static_cast<int>(m);
                if (j >= -M) d += config.alpha_true[m] * exposures[i][idx(j)];
            }
            death[static_cast<std::size_t>(k)] = d;
            censor[static_cast<std::size_t>(k)] = config.censor_scale * base;
        }
        const double D = invert_cumulative_hazard(death, 0.0, unit(rng));
        const double C = invert_cumulative_hazard(censor, 0.0, unit(rng));
        auto& ind = people[i];
        ind.id = padded_id(i, n);
        ind.x_time = std::min({D, C, tau});
        ind.death_observed = D <= C && D < tau;
        ind.event_times = sim_event_times(rate, ind.x_time, rng);
        ind.exposures = exposures[i];
        const int rows = static_cast<int>(std::floor(ind.x_time)) + M + 1;
        ind.covariates.reserve(static_cast<std::size_t>(rows * width));
        for (int r = 0; r < rows; ++r) {
            ind.covariates.push_back(lat.l1[static_cast<std::size_t>(r)]);
            ind.covariates.push_back(lat.l2[static_cast<std::size_t>(r)]);
            if (config.expose_frailty) ind.covariates.push_back(lat.frailty);
        }
        meta.deaths += ind.death_observed ? 1 : 0;
        meta.censored += (!ind.death_observed && ind.x_time < tau) ? 1 : 0;
        meta.events += ind.event_times.size();
        meta.person_periods += static_cast<std::size_t>(std::ceil(ind.x_time));
    }

    meta.config = config;
    meta.c = c;
    meta.exposure_min = lo;
    meta.exposure_max = hi;
    {
        std::vector<double> effects, scaled;
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < K; ++k) {
                effects.push_back(effect(i, k));
                scaled.push_back(c * eta(i, k));
            }
        const double sd_effect = sd_of(effects);
        meta.realized_var_ratio = sd_effect > 0.0 ? std::pow(sd_of(scaled) / sd_effect, 2) : 0.0;
    }
    study.panel = Panel(std::move(people), M, K, tau, width);
    return study;
}

CallablePeriodFunction oracle_mu(const SimStudy& study) {
    const auto& meta = study.metadata;
    const double lo = meta.exposure_min;
    const double range = meta.exposure_max - meta.exposure_min;
    auto alpha = meta.config.alpha_true;
    std::unordered_map<std::string, std::size_t> where;
    for (std::size_t i = 0; i < study.panel.size(); ++i) where.emplace(study.panel[i].id, i);
    const auto* latent = &study.latent;
    return CallablePeriodFunction([=](const Panel& panel, const Individual& ind, int k, int m, double t) {
        const auto& lat = (*latent)[where.at(ind.id)];
        const double mean = (lat.raw_mean[static_cast<std::size_t>(k - m + panel.baseline_len())] - lo) / range;
        double exposure_hazard = 0.0;
        for (int l = 0; l <= m && l < static_cast<int>(alpha.size()); ++l)
            exposure_hazard += alpha[static_cast<std::size_t>(l)] * (l < m ? 1.0 : t - k);
        return mean - exposure_hazard / (range * range);
    });
}

}  // namespace sncure

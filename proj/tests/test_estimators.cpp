#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "oracle.hpp"
#include "sncure/errors.hpp"
#include "sncure/estimators.hpp"
#include "sncure/simulation.hpp"
#include "support.hpp"

using namespace sncure;
using sncure::testing::flat_individual;
using sncure::testing::make_individual;

namespace {

Panel toy_panel() {
    // M = 2, K = 2, tau = 3; exposures for k = -2..2.
    std::vector<Individual> people{
        make_individual("a", 2, 2, {0.1, 0.6, 0.3, 0.9, 0.2}, 2.4, true, {0.35, 1.2, 2.05}, 1,
                        [](int k, int) { return 0.2 * k; }),
        make_individual("b", 2, 2, {0.7, 0.2, 0.8, 0.4, 0.6}, 3.0, false, {1.75}, 1,
                        [](int k, int) { return 0.5 - 0.1 * k; }),
        make_individual("c", 2, 2, {0.4, 0.4, 0.0, 1.0, 0.5}, 1.3, true, {0.9, 1.1}, 1,
                        [](int, int) { return 0.3; })};
    return Panel(std::move(people), 2, 2, 3.0, 1);
}

double toy_mu(const Individual& ind, int k, int m, double t) {
    return 0.25 + 0.15 * (t - k) - 0.05 * m + 0.02 * ind.x_time;
}

const std::vector<double> kToyAlpha{0.6, -0.4};

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("estimator names round-trip") {
    for (auto kind : {EstimatorKind::parametric, EstimatorKind::nonparametric, EstimatorKind::robust})
        CHECK(parse_estimator(to_string(kind)) == kind);
    CHECK_THROWS_AS(parse_estimator("ipw"), UsageError);
}

TEST_CASE("config validation") {
    EstimatorConfig c;
    CHECK_NOTHROW(c.validate());
    c.lags = -1;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = {};
    c.kind = EstimatorKind::robust;
    c.folds = 1;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c = {};
    c.weight_cap = 0.5;
    CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("sequential solve matches the brute-force Riemann oracle") {
    Panel panel = toy_panel();
    const CallablePeriodFunction means(
        [](const Panel&, const Individual& ind, int k, int m, double t) { return toy_mu(ind, k, m, t); });
    AlphaWeights alpha{kToyAlpha, "hand-set"};
    const auto est = solve_sequential(panel, TimeGrid(400), means, alpha, 2);
    REQUIRE(est.beta.size() == 3);

    std::vector<double> prefix;
    for (int m = 0; m <= 2; ++m) {
        sncure::testing::RiemannOptions o;
        o.m = m;
        o.alpha = kToyAlpha;
        o.prefix = prefix;
        o.mu = toy_mu;
        const auto ref = sncure::testing::riemann_lag(panel, o);
        CHECK(est.diagnostics[static_cast<std::size_t>(m)].numerator == doctest::Approx(ref.numerator).epsilon(1e-6));
        CHECK(est.diagnostics[static_cast<std::size_t>(m)].denominator ==
              doctest::Approx(ref.denominator).epsilon(1e-6));
        const double beta = ref.numerator / ref.denominator;
        CHECK(est.beta[static_cast<std::size_t>(m)] == doctest::Approx(beta).epsilon(1e-5));
        prefix.push_back(est.beta[static_cast<std::size_t>(m)]);
    }
}

TEST_CASE("no events gives zero effects") {
    std::vector<Individual> people;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 12; ++i)
        people.push_back(sncure::testing::random_individual("p" + std::to_string(i), 2, 3, i % 3 == 0 ? 2.5 : 3.0,
                                                            i % 3 == 0, {}, rng));
    Panel panel(std::move(people), 2, 3, 3.0, 1);
    EstimatorConfig config;
    config.lags = 1;
    const auto est = fit_parametric(panel, config);
    CHECK(est.beta == std::vector<double>{0.0, 0.0});
}

TEST_CASE("zero exposure residual is a degenerate denominator") {
    Panel panel = toy_panel();
    const CallablePeriodFunction exact([](const Panel& p, const Individual& ind, int k, int m, double) {
        return p.exposure(ind, k - m);
    });
    AlphaWeights alpha{{0.0}, "none"};
    try {
        solve_sequential(panel, TimeGrid(5), exact, alpha, 0);
        FAIL("expected DegenerateDenominator");
    } catch (const NumericalError& e) {
        CHECK(e.name() == "DegenerateDenominator");
    }
}

TEST_CASE("estimates do not depend on input order") {
    SimConfig sim;
    sim.n = 300;
    sim.horizon = 8;
    sim.seed = 17;
    const auto study = simulate_study(sim);
    std::vector<std::size_t> reversed(study.panel.size());
    for (std::size_t i = 0; i < reversed.size(); ++i) reversed[i] = reversed.size() - 1 - i;
    const Panel flipped = study.panel.subset(reversed);
    EstimatorConfig config;
    config.lags = 2;
    CHECK(fit_parametric(study.panel, config).beta == fit_parametric(flipped, config).beta);
    config.kind = EstimatorKind::robust;
    config.mu_spec = config.rho_spec = LearnerSpec::linear();
    CHECK(run_estimator(study.panel, config).beta == run_estimator(flipped, config).beta);
}

TEST_CASE("earlier lags are unchanged when more lags are requested") {
    SimConfig sim;
    sim.n = 300;
    sim.horizon = 8;
    sim.seed = 5;
    const auto study = simulate_study(sim);
    EstimatorConfig short_config, long_config;
    short_config.lags = 2;
    long_config.lags = 4;
    const auto a = fit_parametric(study.panel, short_config).beta;
    const auto b = fit_parametric(study.panel, long_config).beta;
    REQUIRE(b.size() == 5);
    for (std::size_t m = 0; m < 3; ++m) CHECK(a[m] == b[m]);
}

TEST_CASE("quadrature converges with the true exposure means") {
    SimConfig sim;
    sim.n = 2000;
    sim.seed = 23;
    const auto study = simulate_study(sim);
    const auto means = oracle_mu(study);
    AlphaWeights alpha{sim.alpha_true, "true"};
    const auto coarse = solve_sequential(study.panel, TimeGrid(5), means, alpha, 1);
    const auto fine = solve_sequential(study.panel, TimeGrid(50), means, alpha, 1);
    CHECK(std::abs(coarse.beta[0] - fine.beta[0]) < 0.01 * std::abs(fine.beta[0]));
}

TEST_CASE("nonparametric estimator with the linear learner reuses the parametric fit") {
    SimConfig sim;
    sim.n = 300;
    sim.horizon = 8;
    sim.seed = 29;
    const auto study = simulate_study(sim);
    EstimatorConfig config;
    config.lags = 2;
    const auto parametric = fit_parametric(study.panel, config);
    config.kind = EstimatorKind::nonparametric;
    config.mu_spec = LearnerSpec::linear();
    const auto flexible = fit_parametric(study.panel, config);
    for (std::size_t m = 0; m < 3; ++m) CHECK(flexible.beta[m] == doctest::Approx(parametric.beta[m]).epsilon(1e-9));
    CHECK(flexible.method == EstimatorKind::nonparametric);
}

}

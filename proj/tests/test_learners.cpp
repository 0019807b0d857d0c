#include <random>

#include "doctest.h"
#include "sncure/errors.hpp"
#include "sncure/learners.hpp"

using namespace sncure;

namespace {

Dataset noisy_linear(int n, int p, std::uint64_t seed, bool unit_weights = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.1, 2.0);
    Dataset d;
    d.features.resize(n, p);
    d.targets.resize(n);
    d.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        double y = 0.3;
        for (int j = 0; j < p; ++j) {
            d.features(i, j) = z(rng);
            y += (j + 1) * 0.5 * d.features(i, j);
        }
        d.targets(i) = y + z(rng);
        d.weights(i) = unit_weights ? 1.0 : u(rng);
    }
    return d;
}

// Weighted least squares with an intercept, solved directly from the
// unstandardized normal equations.
Eigen::VectorXd normal_equations(const Dataset& d) {
    Eigen::MatrixXd x(d.rows(), d.width() + 1);
    x.col(0).setOnes();
    x.rightCols(d.width()) = d.features;
    const Eigen::MatrixXd xtw = x.transpose() * d.weights.asDiagonal();
    return (xtw * x).ldlt().solve(xtw * d.targets);
}

}  // namespace

TEST_SUITE("learners") {

TEST_CASE("constant target gives a constant predictor for every learner") {
    auto d = noisy_linear(200, 3, 1);
    d.targets.setConstant(1.75);
    for (const auto& spec : {LearnerSpec::linear(), LearnerSpec::boosted(50, 0.1), LearnerSpec::default_ensemble()}) {
        const auto pred = fit(spec, d)->predict(d.features);
        CHECK((pred.array() - 1.75).abs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("linear learner recovers an exact linear relation") {
    auto d = noisy_linear(100, 2, 2, true);
    d.targets = 2.0 * d.features.col(0) - d.features.col(1);
    const auto lin = fit_linear(d);
    CHECK(lin->coefficients()(0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(lin->coefficients()(1) == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(std::abs(lin->intercept()) < 1e-8);
}

TEST_CASE("linear learner matches the normal-equations solution") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const auto d = noisy_linear(300, 4, seed);
        const auto lin = fit_linear(d);
        const auto oracle = normal_equations(d);
        CHECK(lin->intercept() == doctest::Approx(oracle(0)).epsilon(1e-8));
        for (int j = 0; j < 4; ++j) CHECK(lin->coefficients()(j) == doctest::Approx(oracle(j + 1)).epsilon(1e-8));
    }
}

TEST_CASE("linear learner drops constant columns and flags collinear designs") {
    auto d = noisy_linear(50, 3, 3);
    d.features.col(1).setConstant(4.0);
    const auto lin = fit_linear(d);
    CHECK(lin->coefficients()(1) == 0.0);

    auto bad = noisy_linear(50, 3, 4);
    bad.features.col(2) = 2.0 * bad.features.col(0);
    CHECK_THROWS_WITH_AS(fit_linear(bad), doctest::Contains("DegenerateDesign"), NumericalError);
}

TEST_CASE("single distinct row with a varying feature is degenerate") {
    Dataset d;
    d.features.resize(1, 2);
    d.features << 1.0, 2.0;
    d.targets = Eigen::VectorXd::Constant(1, 3.0);
    d.weights = Eigen::VectorXd::Ones(1);
    // One row: every column is constant, so the fit is the intercept only.
    CHECK(fit_linear(d)->predict(d.features)(0) == doctest::Approx(3.0));
}

TEST_CASE("empty data and invalid weights") {
    Dataset d;
    d.features.resize(0, 2);
    CHECK_THROWS_WITH(fit(LearnerSpec::linear(), d), doctest::Contains("EmptyData"));
    auto z = noisy_linear(10, 2, 5);
    z.weights.setZero();
    CHECK_THROWS_WITH(fit(LearnerSpec::linear(), z), doctest::Contains("EmptyData"));
    z.weights(0) = -1.0;
    CHECK_THROWS_AS(fit(LearnerSpec::linear(), z), UsageError);
}

TEST_CASE("boosted trees reduce the training loss on a quadratic") {
    Dataset d;
    const int n = 500;
    d.features.resize(n, 1);
    d.targets.resize(n);
    d.weights = Eigen::VectorXd::Ones(n);
    for (int i = 0; i < n; ++i) {
        const double x = -1.0 + 2.0 * i / (n - 1);
        d.features(i, 0) = x;
        d.targets(i) = x * x;
    }
    const auto gbt = fit_boosted(GbtParams{200, 0.1, 3, 5}, d);
    const double mean_mse = weighted_mse(Eigen::VectorXd::Constant(n, d.targets.mean()), d);
    CHECK(weighted_mse(gbt->predict(d.features), d) < mean_mse);
    const auto& loss = gbt->train_loss();
    REQUIRE(loss.size() == 201);
    for (std::size_t r = 1; r < loss.size(); ++r) CHECK(loss[r] <= loss[r - 1] + 1e-15);
}

TEST_CASE("boosted trees respect the minimum leaf size") {
    auto d = noisy_linear(40, 2, 6);
    const auto gbt = fit_boosted(GbtParams{5, 0.5, 3, 15}, d);
    // With min_leaf 15 and 40 rows every tree has at most 2 leaves, so five
    // trees give at most 2^5 distinct predictions.
    const auto pred = gbt->predict(d.features);
    std::vector<double> distinct(pred.data(), pred.data() + pred.size());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    CHECK(distinct.size() <= 32);
    CHECK(gbt->tree_count() == 5);
}

TEST_CASE("predictions") {
    const LinearPredictor lin(0.0, (Eigen::VectorXd(2) << 2.0, -1.0).finished());
    Eigen::MatrixXd row(1, 2);
    row << 1.0, 1.0;
    CHECK(lin.predict(row)(0) == doctest::Approx(1.0));
    CHECK_THROWS_WITH_AS(lin.predict(Eigen::MatrixXd::Zero(1, 3)), doctest::Contains("WidthMismatch"), UsageError);

    auto c1 = std::make_shared<LinearPredictor>(2.0, Eigen::VectorXd::Zero(2));
    auto c2 = std::make_shared<LinearPredictor>(5.0, Eigen::VectorXd::Zero(2));
    const EnsemblePredictor ens(2, {c1, c2}, {0.25, 0.75});
    const Eigen::MatrixXd rows = Eigen::MatrixXd::Random(4, 2);
    const auto out = ens.predict(rows);
    for (int i = 0; i < 4; ++i) CHECK(out(i) == doctest::Approx(0.25 * 2.0 + 0.75 * 5.0));
    const auto constant = c1->predict(rows);
    CHECK((constant.array() == 2.0).all());
}

TEST_CASE("ensemble weights lie on the simplex") {
    for (std::uint64_t seed = 30; seed < 33; ++seed) {
        auto d = noisy_linear(150, 2, seed);
        for (int i = 0; i < d.rows(); ++i) d.targets(i) += std::sin(3.0 * d.features(i, 0));
        auto spec = LearnerSpec::default_ensemble();
        spec.seed = seed;
        const auto ens = std::dynamic_pointer_cast<const EnsemblePredictor>(fit(spec, d));
        REQUIRE(ens);
        double sum = 0.0;
        for (double w : ens->weights()) {
            CHECK(w > 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("simplex least squares finds the convex optimum") {
    // Target is exactly 0.3 * col0 + 0.7 * col1.
    Eigen::MatrixXd p(6, 3);
    p << 1, 0, 5, 2, 1, 5, 3, 5, 5, 0, 2, 5, 1, 1, 5, 4, 0, 5;
    const Eigen::VectorXd y = 0.3 * p.col(0) + 0.7 * p.col(1);
    const auto w = simplex_least_squares(p, y, Eigen::VectorXd::Ones(6), {true, true, true});
    CHECK(w[0] == doctest::Approx(0.3).epsilon(1e-8));
    CHECK(w[1] == doctest::Approx(0.7).epsilon(1e-8));
    CHECK(w[2] == doctest::Approx(0.0));
    const auto pinned = simplex_least_squares(p, y, Eigen::VectorXd::Ones(6), {false, true, true});
    CHECK(pinned[0] == 0.0);
}

TEST_CASE("fits are deterministic for a fixed seed") {
    const auto d = noisy_linear(120, 3, 40);
    auto spec = LearnerSpec::default_ensemble();
    spec.seed = 9;
    const auto a = fit(spec, d)->predict(d.features);
    const auto b = fit(spec, d)->predict(d.features);
    CHECK((a.array() == b.array()).all());
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(LearnerSpec::boosted(0, 0.1).validate(), UsageError);
    CHECK_THROWS_AS(LearnerSpec::boosted(10, 0.0).validate(), UsageError);
    CHECK_THROWS_AS(LearnerSpec::boosted(10, 0.1, 0).validate(), UsageError);
    auto ens = LearnerSpec::default_ensemble();
    CHECK(ens.members.size() == 5);
    ens.members.clear();
    CHECK_THROWS_AS(ens.validate(), UsageError);
}

}

#include "sncure/exposure_model.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

FeatureBuilder::FeatureBuilder(const Panel& panel, int k, int m, int exposure_window)
    : k_(k), m_(m), covariate_width_(panel.covariate_width()) {
    if (exposure_window < 0) throw UsageError("InvalidWindow", "exposure window must be >= 0");
    if (k - m < -panel.baseline_len())
        throw UsageError("MissingHistory", "exposure period k-m precedes the baseline window");
    lags_ = std::clamp(k - m + panel.baseline_len(), 0, exposure_window);
    if (history_width() == 0)
        throw UsageError("MissingHistory", "empty feature set");
}

void FeatureBuilder::fill(const Panel& panel, const Individual& ind, double t, double* row) const {
    int c = 0;
    for (int j = 1; j <= lags_; ++j) row[c++] = panel.exposure(ind, k_ - m_ - j);
    const auto cov = panel.covariates(ind, k_ - m_);
    for (double v : cov) row[c++] = v;
    row[c] = t - k_;
}

Eigen::MatrixXd FeatureBuilder::rows(const Panel& panel, std::span<const std::size_t> individuals,
                                     std::span<const double> times) const {
    // Row-major scratch then copy: fill() writes contiguous rows.
    const auto n = individuals.size();
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(static_cast<Eigen::Index>(n),
                                                                               width());
    for (std::size_t r = 0; r < n; ++r) fill(panel, panel[individuals[r]], times[r], out.row(static_cast<Eigen::Index>(r)).data());
    return out;
}

namespace {

std::vector<std::size_t> all_members(const Panel& panel, std::span<const std::size_t> members) {
    if (!members.empty()) return {members.begin(), members.end()};
    std::vector<std::size_t> out(panel.size());
    std::iota(out.begin(), out.end(), 0);
    return out;
}

}  // namespace

PseudoData build_pseudo_mu(const Panel& panel, int k, int m, const TimeGrid& grid,
                           const std::vector<double>& alpha, std::span<const std::size_t> members,
                           int exposure_window, std::optional<double> weight_cap) {
    const FeatureBuilder features(panel, k, m, exposure_window);
    const auto pool = all_members(panel, members);

    PseudoData out;
    for (auto i : pool)
        if (panel[i].x_time >= k) {
            for (int b = 0; b < grid.bins(); ++b) {
                out.individual.push_back(i);
                out.time.push_back(grid.midpoint(k, b));
            }
            ++out.contributors;
        }
    const auto rows = static_cast<Eigen::Index>(out.individual.size());
    out.data.features = features.rows(panel, out.individual, out.time);
    out.data.targets.resize(rows);
    out.data.weights.resize(rows);
    out.data.groups.resize(out.individual.size());
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto& ind = panel[out.individual[static_cast<std::size_t>(r)]];
        const double t = out.time[static_cast<std::size_t>(r)];
        out.data.targets(r) = panel.exposure(ind, k - m);
        out.data.weights(r) = at_risk(ind, t) * risk_set_weight(panel, ind, k, m, t, alpha, weight_cap);
        out.data.groups[static_cast<std::size_t>(r)] = static_cast<int>(out.individual[static_cast<std::size_t>(r)]);
    }
    return out;
}

PeriodFit::PeriodFit(FeatureBuilder features, PredictorPtr predictor, double scale)
    : features_(std::move(features)), predictor_(std::move(predictor)), scale_(scale) {}

double PeriodFit::eval(const Panel& panel, const Individual& ind, double t) const {
    if (!(t >= k() && t < k() + 1)) {
        std::ostringstream msg;
        msg << "t=" << t << " outside period [" << k() << ", " << k() + 1 << ")";
        throw UsageError("OutOfWindow", msg.str());
    }
    Eigen::MatrixXd row(1, features_.width());
    Eigen::Matrix<double, 1, Eigen::Dynamic> scratch(features_.width());
    features_.fill(panel, ind, t, scratch.data());
    row.row(0) = scratch;
    return scale_ * predictor_->predict(row)(0);
}

std::vector<double> PeriodFit::eval(const Panel& panel, std::span<const std::size_t> individuals,
                                    std::span<const double> times) const {
    for (double t : times)
        if (!(t >= k() && t < k() + 1)) throw UsageError("OutOfWindow", "evaluation time outside its period");
    const Eigen::VectorXd pred = predictor_->predict(features_.rows(panel, individuals, times));
    std::vector<double> out(static_cast<std::size_t>(pred.size()));
    for (Eigen::Index i = 0; i < pred.size(); ++i) out[static_cast<std::size_t>(i)] = scale_ * pred(i);
    return out;
}

MuFit fit_mu(const Panel& panel, int k, int m, const TimeGrid& grid, const std::vector<double>& alpha,
             const LearnerSpec& spec, MuFlavor flavor, std::span<const std::size_t> members, int exposure_window,
             std::optional<double> weight_cap) {
    if (flavor == MuFlavor::parametric && spec.kind != LearnerKind::linear)
        throw UsageError("InvalidLearner", "parametric exposure model requires the linear learner");
    PseudoData pseudo = build_pseudo_mu(panel, k, m, grid, alpha, members, exposure_window, weight_cap);
    FeatureBuilder features(panel, k, m, exposure_window);

    std::size_t weighted_individuals = 0;
    for (std::size_t r = 0; r < pseudo.individual.size(); r += static_cast<std::size_t>(grid.bins())) {
        bool any = false;
        for (int b = 0; b < grid.bins(); ++b) any = any || pseudo.data.weights(static_cast<Eigen::Index>(r) + b) > 0.0;
        weighted_individuals += any ? 1 : 0;
    }
    std::ostringstream where;
    where << "exposure model (k=" << k << ", m=" << m << ")";
    if (weighted_individuals == 0) throw degenerate_design(where.str() + ": no individual at risk");
    if (flavor == MuFlavor::parametric &&
        weighted_individuals < static_cast<std::size_t>(features.history_width()) + 1) {
        std::ostringstream msg;
        msg << where.str() << ": " << weighted_individuals << " at-risk individual(s) for "
            << features.history_width() << " history features";
        throw degenerate_design(msg.str());
    }
    try {
        auto predictor = fit(spec, pseudo.data);
        return MuFit(std::move(features), std::move(predictor), flavor);
    } catch (const NumericalError& e) {
        throw NumericalError(e.name(), where.str() + ": " + e.detail());
    }
}

}  // namespace sncure

#include "sncure/learners.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "sncure/errors.hpp"

namespace sncure {

Dataset Dataset::select(const std::vector<Eigen::Index>& rows) const {
    Dataset out;
    const auto n = static_cast<Eigen::Index>(rows.size());
    out.features.resize(n, features.cols());
    out.targets.resize(n);
    out.weights.resize(n);
    if (!groups.empty()) out.groups.resize(rows.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto r = rows[static_cast<std::size_t>(i)];
        out.features.row(i) = features.row(r);
        out.targets(i) = targets(r);
        out.weights(i) = weights(r);
        if (!groups.empty()) out.groups[static_cast<std::size_t>(i)] = groups[static_cast<std::size_t>(r)];
    }
    return out;
}

void check_dataset(const Dataset& data) {
    if (data.rows() == 0) throw UsageError("EmptyData", "dataset has no rows");
    if (data.targets.size() != data.rows() || data.weights.size() != data.rows())
        throw UsageError("InvalidDataset", "targets/weights length differs from feature rows");
    if (!data.groups.empty() && static_cast<Eigen::Index>(data.groups.size()) != data.rows())
        throw UsageError("InvalidDataset", "groups length differs from feature rows");
    bool any_positive = false;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        const double w = data.weights(i);
        if (!std::isfinite(w) || w < 0.0) throw UsageError("InvalidDataset", "weights must be finite and >= 0");
        any_positive = any_positive || w > 0.0;
        if (!std::isfinite(data.targets(i))) throw UsageError("InvalidDataset", "targets must be finite");
    }
    if (!data.features.allFinite()) throw UsageError("InvalidDataset", "features must be finite");
    if (!any_positive) throw UsageError("EmptyData", "no row has positive weight");
}

double weighted_mse(const Eigen::VectorXd& predictions, const Dataset& data) {
    const double total = data.weights.sum();
    return (data.weights.array() * (data.targets - predictions).array().square()).sum() / total;
}

// ---------------------------------------------------------------------------
// LearnerSpec

LearnerSpec LearnerSpec::linear() { return LearnerSpec{}; }

LearnerSpec LearnerSpec::boosted(int rounds, double learning_rate, int max_depth) {
    LearnerSpec spec;
    spec.kind = LearnerKind::gbt;
    spec.gbt.rounds = rounds;
    spec.gbt.learning_rate = learning_rate;
    spec.gbt.max_depth = max_depth;
    return spec;
}

LearnerSpec LearnerSpec::default_ensemble() {
    LearnerSpec spec;
    spec.kind = LearnerKind::ensemble;
    spec.members.push_back(linear());
    for (int rounds : {50, 200})
        for (double rate : {0.01, 0.1}) spec.members.push_back(boosted(rounds, rate));
    return spec;
}

void LearnerSpec::validate() const {
    switch (kind) {
        case LearnerKind::linear:
            return;
        case LearnerKind::gbt:
            if (gbt.rounds < 1) throw UsageError("InvalidLearner", "rounds must be >= 1");
            if (!(gbt.learning_rate > 0.0 && gbt.learning_rate <= 1.0))
                throw UsageError("InvalidLearner", "learning_rate must be in (0, 1]");
            if (gbt.max_depth < 1) throw UsageError("InvalidLearner", "max_depth must be >= 1");
            if (gbt.min_leaf < 1) throw UsageError("InvalidLearner", "min_leaf must be >= 1");
            return;
        case LearnerKind::ensemble:
            if (members.empty()) throw UsageError("InvalidLearner", "ensemble needs at least one member");
            if (stack_folds < 2) throw UsageError("InvalidLearner", "stack_folds must be >= 2");
            for (const auto& m : members) m.validate();
            return;
    }
}

std::string LearnerSpec::describe() const {
    std::ostringstream out;
    switch (kind) {
        case LearnerKind::linear:
            out << "linear";
            break;
        case LearnerKind::gbt:
            out << "gbt(rounds=" << gbt.rounds << ",lr=" << gbt.learning_rate << ",depth=" << gbt.max_depth
                << ",min_leaf=" << gbt.min_leaf << ")";
            break;
        case LearnerKind::ensemble:
            out << "ensemble[";
            for (std::size_t i = 0; i < members.size(); ++i) out << (i ? "," : "") << members[i].describe();
            out << "](folds=" << stack_folds << ")";
            break;
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Predictors

Eigen::VectorXd Predictor::predict(const Eigen::MatrixXd& rows) const {
    if (rows.cols() != width_) {
        std::ostringstream msg;
        msg << "predictor trained on " << width_ << " features, got " << rows.cols();
        throw UsageError("WidthMismatch", msg.str());
    }
    return predict_unchecked(rows);
}

LinearPredictor::LinearPredictor(double intercept, Eigen::VectorXd coefficients)
    : Predictor(coefficients.size()), intercept_(intercept), coefficients_(std::move(coefficients)) {}

Eigen::VectorXd LinearPredictor::predict_unchecked(const Eigen::MatrixXd& rows) const {
    Eigen::VectorXd out = rows * coefficients_;
    out.array() += intercept_;
    return out;
}

BoostedTreesPredictor::BoostedTreesPredictor(Eigen::Index width, double base, std::vector<Tree> trees,
                                             std::vector<double> train_loss)
    : Predictor(width), base_(base), trees_(std::move(trees)), train_loss_(std::move(train_loss)) {}

Eigen::VectorXd BoostedTreesPredictor::predict_unchecked(const Eigen::MatrixXd& rows) const {
    Eigen::VectorXd out = Eigen::VectorXd::Constant(rows.rows(), base_);
    for (Eigen::Index r = 0; r < rows.rows(); ++r) {
        double acc = base_;
        for (const auto& tree : trees_) {
            int node = 0;
            while (tree[static_cast<std::size_t>(node)].feature >= 0) {
                const auto& n = tree[static_cast<std::size_t>(node)];
                node = rows(r, n.feature) < n.threshold ? n.left : n.right;
            }
            acc += tree[static_cast<std::size_t>(node)].value;
        }
        out(r) = acc;
    }
    return out;
}

EnsemblePredictor::EnsemblePredictor(Eigen::Index width, std::vector<PredictorPtr> members,
                                     std::vector<double> weights)
    : Predictor(width), members_(std::move(members)), weights_(std::move(weights)) {}

Eigen::VectorXd EnsemblePredictor::predict_unchecked(const Eigen::MatrixXd& rows) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(rows.rows());
    for (std::size_t j = 0; j < members_.size(); ++j) {
        if (weights_[j] == 0.0) continue;
        out += weights_[j] * members_[j]->predict(rows);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Linear

std::shared_ptr<const LinearPredictor> fit_linear(const Dataset& data) {
    check_dataset(data);
    const Eigen::Index n = data.rows();
    const Eigen::Index p = data.width();
    const Eigen::VectorXd& w = data.weights;
    const double total = w.sum();

    const double y_mean = w.dot(data.targets) / total;
    Eigen::VectorXd x_mean = (data.features.transpose() * w) / total;

    Eigen::VectorXd x_sd(p);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double var = (w.array() * (data.features.col(j).array() - x_mean(j)).square()).sum() / total;
        const double scale = std::max(1.0, x_mean(j) * x_mean(j));
        x_sd(j) = std::sqrt(var);
        if (var > 1e-24 * scale) active.push_back(j);
    }

    Eigen::VectorXd coefficients = Eigen::VectorXd::Zero(p);
    if (!active.empty()) {
        const auto q = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd z(n, q);
        for (Eigen::Index c = 0; c < q; ++c) {
            const auto j = active[static_cast<std::size_t>(c)];
            z.col(c) = (data.features.col(j).array() - x_mean(j)) / x_sd(j);
        }
        const Eigen::MatrixXd wz = z.array().colwise() * w.array();
        Eigen::MatrixXd gram = (z.transpose() * wz) / total;
        const Eigen::VectorXd rhs = (wz.transpose() * (data.targets.array() - y_mean).matrix()) / total;

        const double jitter = 1e-9 * gram.trace() / static_cast<double>(q);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < 1e-12) {
            std::ostringstream msg;
            msg << "weighted normal equations singular (min eigenvalue " << eig.eigenvalues().minCoeff()
                << " of standardized design, " << q << " active features, " << n << " rows)";
            throw degenerate_design(msg.str());
        }
        gram.diagonal().array() += jitter;
        const Eigen::VectorXd solved = gram.ldlt().solve(rhs);
        for (Eigen::Index c = 0; c < q; ++c) {
            const auto j = active[static_cast<std::size_t>(c)];
            coefficients(j) = solved(c) / x_sd(j);
        }
    }
    const double intercept = y_mean - coefficients.dot(x_mean);
    return std::make_shared<LinearPredictor>(intercept, std::move(coefficients));
}

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees, exact greedy splits.

namespace {

struct FeatureBins {
    std::vector<double> thresholds;  // split threshold after bin b (size nbins - 1)
    std::vector<std::uint32_t> bin;  // per kept row
    std::uint32_t nbins = 0;
};

struct HistCell {
    double g = 0.0;  // sum w * residual
    double h = 0.0;  // sum w
    std::uint32_t c = 0;
};

struct Split {
    double gain = 0.0;
    int feature = -1;
    std::uint32_t bin = 0;  // rows with bin <= this go left
};

}  // namespace

std::shared_ptr<const BoostedTreesPredictor> fit_boosted(const GbtParams& params, const Dataset& data) {
    check_dataset(data);
    const Eigen::Index p = data.width();

    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < data.rows(); ++i)
        if (data.weights(i) > 0.0) kept.push_back(i);
    const auto n = kept.size();

    std::vector<double> w(n), y(n);
    double total_w = 0.0, sum_wy = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        w[r] = data.weights(kept[r]);
        y[r] = data.targets(kept[r]);
        total_w += w[r];
        sum_wy += w[r] * y[r];
    }
    const double base = sum_wy / total_w;

    std::vector<FeatureBins> bins(static_cast<std::size_t>(p));
    {
        std::vector<std::pair<double, std::uint32_t>> order(n);
        for (Eigen::Index f = 0; f < p; ++f) {
            auto& fb = bins[static_cast<std::size_t>(f)];
            for (std::size_t r = 0; r < n; ++r) order[r] = {data.features(kept[r], f), static_cast<std::uint32_t>(r)};
            std::sort(order.begin(), order.end());
            fb.bin.assign(n, 0);
            std::uint32_t b = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (i > 0 && order[i].first != order[i - 1].first) {
                    const double lo = order[i - 1].first, hi = order[i].first;
                    double thr = lo + 0.5 * (hi - lo);
                    if (!(thr > lo)) thr = hi;
                    fb.thresholds.push_back(thr);
                    ++b;
                }
                fb.bin[order[i].second] = b;
            }
            fb.nbins = b + 1;
        }
    }

    std::vector<double> residual(n);
    for (std::size_t r = 0; r < n; ++r) residual[r] = y[r] - base;
    auto loss = [&] {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r) acc += w[r] * residual[r] * residual[r];
        return acc / total_w;
    };

    std::vector<BoostedTreesPredictor::Tree> trees;
    trees.reserve(static_cast<std::size_t>(params.rounds));
    std::vector<double> train_loss{loss()};

    std::vector<int> node_of(n);      // index into level's node list, -1 when settled
    std::vector<int> tree_node_of(n); // node index within the tree
    std::vector<double> wr(n);
    std::vector<HistCell> hist;
    const auto min_leaf = static_cast<std::uint32_t>(params.min_leaf);

    for (int round = 0; round < params.rounds; ++round) {
        BoostedTreesPredictor::Tree tree(1);
        std::vector<int> level{0};  // tree node ids at this level
        std::fill(node_of.begin(), node_of.end(), 0);
        std::fill(tree_node_of.begin(), tree_node_of.end(), 0);
        for (std::size_t r = 0; r < n; ++r) wr[r] = w[r] * residual[r];

        for (int depth = 0; depth < params.max_depth && !level.empty(); ++depth) {
            const std::size_t nodes = level.size();
            std::vector<double> node_g(nodes, 0.0), node_h(nodes, 0.0);
            std::vector<std::uint32_t> node_c(nodes, 0);
            for (std::size_t r = 0; r < n; ++r) {
                const int nd = node_of[r];
                if (nd < 0) continue;
                node_g[static_cast<std::size_t>(nd)] += wr[r];
                node_h[static_cast<std::size_t>(nd)] += w[r];
                ++node_c[static_cast<std::size_t>(nd)];
            }

            std::vector<Split> best(nodes);
            for (Eigen::Index f = 0; f < p; ++f) {
                const auto& fb = bins[static_cast<std::size_t>(f)];
                if (fb.nbins < 2) continue;
                hist.assign(nodes * fb.nbins, HistCell{});
                for (std::size_t r = 0; r < n; ++r) {
                    const int nd = node_of[r];
                    if (nd < 0) continue;
                    auto& cell = hist[static_cast<std::size_t>(nd) * fb.nbins + fb.bin[r]];
                    cell.g += wr[r];
                    cell.h += w[r];
                    ++cell.c;
                }
                for (std::size_t nd = 0; nd < nodes; ++nd) {
                    const double G = node_g[nd], H = node_h[nd];
                    const std::uint32_t C = node_c[nd];
                    if (C < 2 * min_leaf) continue;
                    const double parent = G * G / H;
                    double gl = 0.0, hl = 0.0;
                    std::uint32_t cl = 0;
                    const HistCell* row = hist.data() + nd * fb.nbins;
                    for (std::uint32_t b = 0; b + 1 < fb.nbins; ++b) {
                        gl += row[b].g;
                        hl += row[b].h;
                        cl += row[b].c;
                        if (cl < min_leaf) continue;
                        if (C - cl < min_leaf) break;
                        const double hr = H - hl;
                        if (hl <= 0.0 || hr <= 0.0) continue;
                        const double gr = G - gl;
                        const double gain = gl * gl / hl + gr * gr / hr - parent;
                        if (gain > best[nd].gain) best[nd] = {gain, static_cast<int>(f), b};
                    }
                }
            }

            std::vector<int> next_level;
            std::vector<int> left_slot(nodes, -1);
            for (std::size_t nd = 0; nd < nodes; ++nd) {
                const int id = level[nd];
                if (best[nd].feature < 0) continue;
                const auto& fb = bins[static_cast<std::size_t>(best[nd].feature)];
                const int left = static_cast<int>(tree.size());
                tree.emplace_back();
                tree.emplace_back();
                auto& node = tree[static_cast<std::size_t>(id)];
                node.feature = best[nd].feature;
                node.threshold = fb.thresholds[best[nd].bin];
                node.left = left;
                node.right = left + 1;
                left_slot[nd] = static_cast<int>(next_level.size());
                next_level.push_back(left);
                next_level.push_back(left + 1);
            }
            for (std::size_t r = 0; r < n; ++r) {
                const int nd = node_of[r];
                if (nd < 0) continue;
                const auto slot = left_slot[static_cast<std::size_t>(nd)];
                if (slot < 0) {
                    node_of[r] = -1;
                    continue;
                }
                const auto& split = best[static_cast<std::size_t>(nd)];
                const bool go_left = bins[static_cast<std::size_t>(split.feature)].bin[r] <= split.bin;
                node_of[r] = go_left ? slot : slot + 1;
                tree_node_of[r] = next_level[static_cast<std::size_t>(node_of[r])];
            }
            level = std::move(next_level);
        }

        std::vector<double> leaf_g(tree.size(), 0.0), leaf_h(tree.size(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            leaf_g[static_cast<std::size_t>(tree_node_of[r])] += wr[r];
            leaf_h[static_cast<std::size_t>(tree_node_of[r])] += w[r];
        }
        for (std::size_t id = 0; id < tree.size(); ++id) {
            if (tree[id].feature >= 0) continue;
            tree[id].value = leaf_h[id] > 0.0 ? params.learning_rate * leaf_g[id] / leaf_h[id] : 0.0;
        }
        for (std::size_t r = 0; r < n; ++r) residual[r] -= tree[static_cast<std::size_t>(tree_node_of[r])].value;
        train_loss.push_back(loss());
        trees.push_back(std::move(tree));
    }
    return std::make_shared<BoostedTreesPredictor>(p, base, std::move(trees), std::move(train_loss));
}

// ---------------------------------------------------------------------------
// Convex stacking

std::vector<double> simplex_least_squares(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& targets,
                                          const Eigen::VectorXd& weights, const std::vector<bool>& usable,
                                          double tolerance) {
    const auto k = static_cast<std::size_t>(predictions.cols());
    const double total = weights.sum();
    const Eigen::MatrixXd wp = predictions.array().colwise() * weights.array();
    const Eigen::MatrixXd gram = (predictions.transpose() * wp) / total;
    const Eigen::VectorXd lin = (wp.transpose() * targets) / total;

    std::vector<double> out(k, 0.0);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    // Start from the best single member.
    int start = -1;
    double start_obj = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        if (!usable[j]) continue;
        const auto jj = static_cast<Eigen::Index>(j);
        const double obj = gram(jj, jj) - 2.0 * lin(jj);
        if (start < 0 || obj < start_obj) {
            start = static_cast<int>(j);
            start_obj = obj;
        }
    }
    if (start < 0) throw degenerate_design("no usable ensemble member");
    x(start) = 1.0;

    for (int iter = 0; iter < 100000; ++iter) {
        const Eigen::VectorXd grad = 2.0 * (gram * x - lin);
        Eigen::Index up = -1, down = -1;
        for (std::size_t j = 0; j < k; ++j) {
            if (!usable[j]) continue;
            const auto jj = static_cast<Eigen::Index>(j);
            if (up < 0 || grad(jj) < grad(up)) up = jj;
            if (x(jj) > 0.0 && (down < 0 || grad(jj) > grad(down))) down = jj;
        }
        const double gap = grad(down) - grad(up);
        if (up == down || gap <= tolerance * (1.0 + grad.cwiseAbs().maxCoeff())) break;
        const double curvature = 2.0 * (gram(up, up) + gram(down, down) - 2.0 * gram(up, down));
        double step = curvature > 0.0 ? gap / curvature : x(down);
        step = std::min(step, x(down));
        x(up) += step;
        x(down) -= step;
        if (x(down) < 1e-300) x(down) = 0.0;
    }
    const double sum = x.sum();
    for (std::size_t j = 0; j < k; ++j) out[j] = std::max(0.0, x(static_cast<Eigen::Index>(j)) / sum);
    return out;
}

namespace {

std::vector<std::vector<Eigen::Index>> stacking_folds(const Dataset& data, int folds, std::uint64_t seed) {
    // Units are groups when provided, else rows. Units are shuffled and dealt round-robin.
    std::vector<int> unit_of(static_cast<std::size_t>(data.rows()));
    std::vector<int> unit_ids;
    if (data.groups.empty()) {
        std::iota(unit_of.begin(), unit_of.end(), 0);
        unit_ids = unit_of;
    } else {
        unit_ids = data.groups;
        std::sort(unit_ids.begin(), unit_ids.end());
        unit_ids.erase(std::unique(unit_ids.begin(), unit_ids.end()), unit_ids.end());
        for (std::size_t i = 0; i < unit_of.size(); ++i)
            unit_of[i] = static_cast<int>(std::lower_bound(unit_ids.begin(), unit_ids.end(), data.groups[i]) -
                                          unit_ids.begin());
    }
    const auto units = unit_ids.size();
    const auto v = std::min<std::size_t>(static_cast<std::size_t>(folds), units);
    std::vector<std::size_t> order(units);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> fold_of_unit(units);
    for (std::size_t i = 0; i < units; ++i) fold_of_unit[order[i]] = static_cast<int>(i % v);
    std::vector<std::vector<Eigen::Index>> out(v);
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        out[static_cast<std::size_t>(fold_of_unit[static_cast<std::size_t>(unit_of[static_cast<std::size_t>(r)])])]
            .push_back(r);
    return out;
}

PredictorPtr fit_ensemble(const LearnerSpec& spec, const Dataset& data) {
    const auto k = spec.members.size();
    std::vector<PredictorPtr> finals(k);
    std::vector<bool> usable(k, true);
    for (std::size_t j = 0; j < k; ++j) {
        try {
            finals[j] = fit(spec.members[j], data);
        } catch (const NumericalError&) {
            usable[j] = false;
        }
    }
    if (std::none_of(usable.begin(), usable.end(), [](bool u) { return u; }))
        throw degenerate_design("every ensemble member failed to fit");

    const auto folds = stacking_folds(data, spec.stack_folds, spec.seed);
    std::vector<double> weights(k, 0.0);
    if (folds.size() < 2) {
        // Too few units to cross-validate: keep the first usable member.
        weights[static_cast<std::size_t>(std::find(usable.begin(), usable.end(), true) - usable.begin())] = 1.0;
    } else {
        Eigen::MatrixXd cv = Eigen::MatrixXd::Zero(data.rows(), static_cast<Eigen::Index>(k));
        for (std::size_t v = 0; v < folds.size(); ++v) {
            std::vector<Eigen::Index> train;
            for (std::size_t u = 0; u < folds.size(); ++u)
                if (u != v) train.insert(train.end(), folds[u].begin(), folds[u].end());
            const Dataset train_data = data.select(train);
            const Dataset held = data.select(folds[v]);
            const bool trainable = (train_data.weights.array() > 0.0).any();
            for (std::size_t j = 0; j < k; ++j) {
                if (!usable[j]) continue;
                try {
                    if (!trainable) throw degenerate_design("training fold has no positive weight");
                    const Eigen::VectorXd pred = fit(spec.members[j], train_data)->predict(held.features);
                    for (std::size_t i = 0; i < folds[v].size(); ++i)
                        cv(folds[v][i], static_cast<Eigen::Index>(j)) = pred(static_cast<Eigen::Index>(i));
                } catch (const NumericalError&) {
                    usable[j] = false;
                }
            }
        }
        if (std::none_of(usable.begin(), usable.end(), [](bool u) { return u; }))
            throw degenerate_design("every ensemble member failed cross-validation");
        weights = simplex_least_squares(cv, data.targets, data.weights, usable);
    }

    std::vector<PredictorPtr> members;
    std::vector<double> kept_weights;
    for (std::size_t j = 0; j < k; ++j) {
        if (weights[j] <= 0.0) continue;
        members.push_back(finals[j]);
        kept_weights.push_back(weights[j]);
    }
    return std::make_shared<EnsemblePredictor>(data.width(), std::move(members), std::move(kept_weights));
}

}  // namespace

PredictorPtr fit(const LearnerSpec& spec, const Dataset& data) {
    spec.validate();
    check_dataset(data);
    switch (spec.kind) {
        case LearnerKind::linear:
            return fit_linear(data);
        case LearnerKind::gbt:
            return fit_boosted(spec.gbt, data);
        case LearnerKind::ensemble:
            return fit_ensemble(spec, data);
    }
    throw UsageError("InvalidLearner", "unknown learner kind");
}

}  // namespace sncure

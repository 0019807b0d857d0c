#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sncure {

/// Weighted regression data. Rows are observations.
///
/// `groups` is optional; when present, rows sharing a group id are kept in
/// the same cross-validation fold (pseudo-data replicates of one individual).
struct Dataset {
    Eigen::MatrixXd features;
    Eigen::VectorXd targets;
    Eigen::VectorXd weights;
    std::vector<int> groups;

    Eigen::Index rows() const { return features.rows(); }
    Eigen::Index width() const { return features.cols(); }
    Dataset select(const std::vector<Eigen::Index>& rows) const;
};

/// Throws EmptyData / InvalidDataset when the invariants fail.
void check_dataset(const Dataset& data);

enum class LearnerKind { linear, gbt, ensemble };

struct GbtParams {
    int rounds = 200;
    double learning_rate = 0.1;
    int max_depth = 3;
    int min_leaf = 5;
};

struct LearnerSpec {
    LearnerKind kind = LearnerKind::linear;
    GbtParams gbt;
    std::vector<LearnerSpec> members;  // ensemble only
    int stack_folds = 5;
    std::uint64_t seed = 0;

    static LearnerSpec linear();
    static LearnerSpec boosted(int rounds, double learning_rate, int max_depth = 3);
    /// Linear member plus boosted trees over rounds {50, 200} x rate {0.01, 0.1}.
    static LearnerSpec default_ensemble();

    void validate() const;
    std::string describe() const;
};

class Predictor {
  public:
    virtual ~Predictor() = default;

    /// Throws WidthMismatch when `rows.cols() != width()`.
    Eigen::VectorXd predict(const Eigen::MatrixXd& rows) const;
    Eigen::Index width() const { return width_; }

  protected:
    explicit Predictor(Eigen::Index width) : width_(width) {}
    virtual Eigen::VectorXd predict_unchecked(const Eigen::MatrixXd& rows) const = 0;

  private:
    Eigen::Index width_;
};

using PredictorPtr = std::shared_ptr<const Predictor>;

class LinearPredictor final : public Predictor {
  public:
    LinearPredictor(double intercept, Eigen::VectorXd coefficients);
    double intercept() const { return intercept_; }
    const Eigen::VectorXd& coefficients() const { return coefficients_; }

  private:
    Eigen::VectorXd predict_unchecked(const Eigen::MatrixXd& rows) const override;
    double intercept_;
    Eigen::VectorXd coefficients_;
};

class BoostedTreesPredictor final : public Predictor {
  public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };
    using Tree = std::vector<Node>;

    BoostedTreesPredictor(Eigen::Index width, double base, std::vector<Tree> trees,
                          std::vector<double> train_loss);

    double base() const { return base_; }
    std::size_t tree_count() const { return trees_.size(); }
    /// Weighted training MSE before any tree, then after each round.
    const std::vector<double>& train_loss() const { return train_loss_; }

  private:
    Eigen::VectorXd predict_unchecked(const Eigen::MatrixXd& rows) const override;
    double base_;
    std::vector<Tree> trees_;
    std::vector<double> train_loss_;
};

class EnsemblePredictor final : public Predictor {
  public:
    EnsemblePredictor(Eigen::Index width, std::vector<PredictorPtr> members, std::vector<double> weights);
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<PredictorPtr>& members() const { return members_; }

  private:
    Eigen::VectorXd predict_unchecked(const Eigen::MatrixXd& rows) const override;
    std::vector<PredictorPtr> members_;
    std::vector<double> weights_;
};

PredictorPtr fit(const LearnerSpec& spec, const Dataset& data);

/// Weighted least squares with an intercept. Constant columns receive a
/// zero coefficient; a ridge jitter of 1e-9 * trace / p is added to the
/// standardized normal equations.
std::shared_ptr<const LinearPredictor> fit_linear(const Dataset& data);

std::shared_ptr<const BoostedTreesPredictor> fit_boosted(const GbtParams& params, const Dataset& data);

/// Minimize (y - P w)' W (y - P w) over the probability simplex by pairwise
/// coordinate descent. `usable[j] == false` pins w_j to 0.
std::vector<double> simplex_least_squares(const Eigen::MatrixXd& predictions, const Eigen::VectorXd& targets,
                                          const Eigen::VectorXd& weights, const std::vector<bool>& usable,
                                          double tolerance = 1e-10);

double weighted_mse(const Eigen::VectorXd& predictions, const Dataset& data);

}  // namespace sncure

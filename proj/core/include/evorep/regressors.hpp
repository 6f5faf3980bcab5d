#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace evorep {

/// A fitted regression function; immutable after fit.
class RegressionModel {
 public:
  virtual ~RegressionModel() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;
  virtual Eigen::Index input_dim() const noexcept = 0;
  virtual std::string_view kind_name() const noexcept = 0;
  virtual void save(std::ostream& out) const = 0;
};

/// Reads any model written by RegressionModel::save.
std::shared_ptr<const RegressionModel> load_regression_model(std::istream& in);

// ---------------------------------------------------------------------------
// Ridge

class RidgeModel final : public RegressionModel {
 public:
  RidgeModel(Eigen::VectorXd coef, double intercept, double lambda)
      : coef_(std::move(coef)), intercept_(intercept), lambda_(lambda) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  Eigen::Index input_dim() const noexcept override { return coef_.size(); }
  std::string_view kind_name() const noexcept override { return "ridge"; }
  void save(std::ostream& out) const override;

  const Eigen::VectorXd& coef() const noexcept { return coef_; }
  double intercept() const noexcept { return intercept_; }
  double lambda() const noexcept { return lambda_; }

 private:
  Eigen::VectorXd coef_;
  double intercept_;
  double lambda_;
};

/// Minimizes sum_i w_i (y_i - x_i b - b0)^2 + lambda ||b||^2 with the
/// intercept unpenalized. `weights` may be empty (all ones).
RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     const Eigen::VectorXd& weights = {});

struct RidgeOptions {
  std::vector<double> lambdas{0.1, 1.0, 10.0};
  /// 0 selects exact leave-one-out through the hat matrix; otherwise K-fold.
  std::size_t folds = 0;
  std::uint64_t seed = 0;
};

/// Cross-validated choice of lambda (weighted held-out squared error; ties go
/// to the smaller lambda), then a refit on all rows.
RidgeModel fit_ridge_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options,
                        const Eigen::VectorXd& weights = {});

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::size_t depth() const;
};

/// Greedy weighted least-squares tree. A node splits on the (feature,
/// threshold) with the largest reduction in weighted squared error, each
/// child holding at least `min_leaf` rows; thresholds are midpoints between
/// adjacent distinct values; ties go to the lower feature then the lower
/// threshold. Leaves hold the weighted mean target.
RegressionTree fit_regression_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                                   const Eigen::VectorXd& weights, std::size_t max_depth, std::size_t min_leaf);

struct GbrtOptions {
  std::size_t trees = 100;
  std::size_t depth = 3;
  double learning_rate = 0.1;
  std::size_t min_leaf = 5;
  std::uint64_t seed = 0;
};

class GbrtModel final : public RegressionModel {
 public:
  GbrtModel(double init, double learning_rate, std::vector<RegressionTree> trees, Eigen::Index input_dim)
      : init_(init), learning_rate_(learning_rate), trees_(std::move(trees)), input_dim_(input_dim) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  Eigen::Index input_dim() const noexcept override { return input_dim_; }
  std::string_view kind_name() const noexcept override { return "gbrt"; }
  void save(std::ostream& out) const override;

  double init() const noexcept { return init_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }

 private:
  double init_;
  double learning_rate_;
  std::vector<RegressionTree> trees_;
  Eigen::Index input_dim_;
};

/// Squared-error boosting from the (weighted) mean: each tree fits the
/// current residuals and is shrunk by the learning rate. Boosting stops early
/// once the residuals admit no split and average to zero.
GbrtModel fit_gbrt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbrtOptions& options,
                   const Eigen::VectorXd& weights = {});

// ---------------------------------------------------------------------------
// Logistic regression (propensity)

struct LogisticOptions {
  double l2 = 1e-3;
  std::size_t iterations = 1000;
  double step = 0.5;
};

class LogisticModel {
 public:
  LogisticModel() = default;
  LogisticModel(Eigen::VectorXd mean, Eigen::VectorXd scale, Eigen::VectorXd coef, double intercept)
      : mean_(std::move(mean)), scale_(std::move(scale)), coef_(std::move(coef)), intercept_(intercept) {}

  /// Unclipped P(W = 1 | x) for each row.
  Eigen::VectorXd probability(const Eigen::MatrixXd& x) const;
  Eigen::Index input_dim() const noexcept { return coef_.size(); }
  const Eigen::VectorXd& coef() const noexcept { return coef_; }
  double intercept() const noexcept { return intercept_; }

  void save(std::ostream& out) const;
  static LogisticModel load(std::istream& in);

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  Eigen::VectorXd coef_;
  double intercept_ = 0.0;
};

/// Full-batch gradient descent on mean log-loss + l2 ||b||^2 over
/// internally standardized features.
LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, const LogisticOptions& options = {});

}  // namespace evorep

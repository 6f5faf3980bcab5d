#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evorep/dataset.hpp"
#include "evorep/regressors.hpp"

namespace evorep {

enum class BaseKind { ridge_cv, gbrt };

std::string_view to_string(BaseKind kind) noexcept;
BaseKind parse_base_kind(std::string_view name);

/// A regression method: fit(X, y[, weights]) -> model.
class BaseLearner {
 public:
  virtual ~BaseLearner() = default;
  virtual BaseKind kind() const noexcept = 0;
  virtual std::shared_ptr<const RegressionModel> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                     const Eigen::VectorXd& weights, std::uint64_t seed) const = 0;
};

class RidgeCvLearner final : public BaseLearner {
 public:
  explicit RidgeCvLearner(RidgeOptions options = {}) : options_(std::move(options)) {}
  BaseKind kind() const noexcept override { return BaseKind::ridge_cv; }
  /// Folds shrink to the row count on small inputs.
  std::shared_ptr<const RegressionModel> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& weights, std::uint64_t seed) const override;
  const RidgeOptions& options() const noexcept { return options_; }

 private:
  RidgeOptions options_;
};

class GbrtLearner final : public BaseLearner {
 public:
  explicit GbrtLearner(GbrtOptions options = {}) : options_(options) {}
  BaseKind kind() const noexcept override { return BaseKind::gbrt; }
  std::shared_ptr<const RegressionModel> fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& weights, std::uint64_t seed) const override;
  const GbrtOptions& options() const noexcept { return options_; }

 private:
  GbrtOptions options_;
};

std::unique_ptr<BaseLearner> make_base_learner(BaseKind kind);

// ---------------------------------------------------------------------------
// Propensity

struct PropensityModel {
  static constexpr double kDefaultClip = 0.01;

  LogisticModel full;                   // fitted on all rows, for new points
  std::vector<LogisticModel> fold_models;
  std::vector<std::size_t> fold_of;     // fold of each training row
  Eigen::VectorXd out_of_fold;          // clipped e(x_i) from the model excluding fold_of[i]
  double clip = kDefaultClip;

  /// Clipped propensity for new rows.
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
};

/// Cross-fitted L2-regularized logistic propensity, clipped to [clip, 1-clip].
/// Throws ConfigError when W has a single class.
PropensityModel fit_propensity(const Eigen::MatrixXd& x, const Eigen::VectorXi& w, std::size_t folds,
                               std::uint64_t seed, const LogisticOptions& options = {});

// ---------------------------------------------------------------------------
// CATE models

enum class LearnerKind { s, t, x, x_direct_t, x_direct_s, r };

std::string_view to_string(LearnerKind kind) noexcept;
LearnerKind parse_learner_kind(std::string_view name);

enum class XWeighting { constant, propensity };

struct MetaOptions {
  std::size_t folds = 5;  // R-learner cross-fitting
  std::uint64_t seed = 0;
  XWeighting x_weighting = XWeighting::constant;
  /// g in tau_X = g tau0 + (1 - g) tau1 under constant weighting.
  double x_weight = 0.5;
};

/// A fitted CATE estimator, tau_hat(x).
class CateModel {
 public:
  struct Stage {
    std::string role;  // mu, mu0, mu1, tau0, tau1, tau
    std::shared_ptr<const RegressionModel> model;
  };

  CateModel(LearnerKind kind, BaseKind base, Eigen::Index input_dim, std::vector<Stage> stages,
            double x_weight = 0.5, std::optional<LogisticModel> weight_model = std::nullopt);

  LearnerKind kind() const noexcept { return kind_; }
  BaseKind base() const noexcept { return base_; }
  Eigen::Index input_dim() const noexcept { return input_dim_; }
  const std::vector<Stage>& stages() const noexcept { return stages_; }
  const Stage& stage(std::string_view role) const;
  double x_weight() const noexcept { return x_weight_; }
  const std::optional<LogisticModel>& weight_model() const noexcept { return weight_model_; }

  /// Row-wise tau_hat; throws DimensionError on a width mismatch.
  Eigen::VectorXd predict_cate(const Eigen::MatrixXd& x) const;

 private:
  LearnerKind kind_;
  BaseKind base_;
  Eigen::Index input_dim_;
  std::vector<Stage> stages_;
  double x_weight_;
  std::optional<LogisticModel> weight_model_;
};

/// [X | W] with W as the last column; the S-learner's design.
Eigen::MatrixXd augment_with_treatment(const Eigen::MatrixXd& x, double w);
Eigen::MatrixXd augment_with_treatment(const Eigen::MatrixXd& x, const Eigen::VectorXi& w);

CateModel s_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});
/// Throws ConfigError naming the empty arm.
CateModel t_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});
CateModel x_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});
/// One regression of the pooled imputed effects {Y - mu0(X)}_treated and {mu1(X) - Y}_control on X.
CateModel x_learner_direct_t(const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});
/// As above with mu(x, w) from a single S-learner fit.
CateModel x_learner_direct_s(const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});
/// Cross-fitted m(x) and e(x), then a weighted regression of (Y - m)/(W - e)
/// on X with weights (W - e)^2.
CateModel r_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});

CateModel fit_cate(LearnerKind kind, const Dataset& train, const BaseLearner& base, const MetaOptions& options = {});

Eigen::VectorXd predict_cate(const CateModel& model, const Eigen::MatrixXd& x);

/// Imputed individual effects used by the X-learner family: Y - mu0(X) on
/// treated rows, mu1(X) - Y on control rows, in row order.
Eigen::VectorXd imputed_effects(const Dataset& data, const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1);

// Manifest layout (directory):
//   manifest.txt   evorep-cate-model 1 / learner / base / input_dim / x_weight /
//                  [weight_model <file>] / stage <role> <file> ...
//   stage_<i>.txt  one RegressionModel::save record each
void save_cate_model(const std::filesystem::path& dir, const CateModel& model);
CateModel load_cate_model(const std::filesystem::path& dir);

}  // namespace evorep

#include "evorep/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "evorep/errors.hpp"
#include "evorep/random.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

namespace {

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                  const char* who) {
  if (x.rows() != y.size()) throw DimensionError(std::string(who) + ": row count mismatch");
  if (weights.size() != 0 && weights.size() != y.size()) {
    throw DimensionError(std::string(who) + ": weight count mismatch");
  }
  if (!x.allFinite() || !y.allFinite() || !weights.allFinite()) {
    throw DataError(std::string(who) + ": inputs must be finite");
  }
  if (weights.size() != 0 && (weights.array() < 0.0).any()) {
    throw DataError(std::string(who) + ": weights must be non-negative");
  }
}

Eigen::VectorXd weights_or_ones(const Eigen::VectorXd& weights, Eigen::Index n) {
  return weights.size() == 0 ? Eigen::VectorXd::Ones(n) : weights;
}

void check_predict_width(Eigen::Index expected, Eigen::Index got, std::string_view who) {
  if (expected != got) {
    throw DimensionError(std::string(who) + " model expects " + std::to_string(expected) + " columns, got " +
                         std::to_string(got));
  }
}

double read_double(std::istream& in, std::string_view what) {
  std::string token;
  if (!(in >> token)) throw DataError(std::string(what) + ": truncated model file");
  return parse_double(token, what);
}

long read_count(std::istream& in, std::string_view what) {
  long value = -1;
  if (!(in >> value) || value < 0) throw DataError(std::string(what) + ": bad count in model file");
  return value;
}

}  // namespace

// ---------------------------------------------------------------------------
// Ridge

Eigen::VectorXd RidgeModel::predict(const Eigen::MatrixXd& x) const {
  check_predict_width(coef_.size(), x.cols(), "ridge");
  return (x * coef_).array() + intercept_;
}

void RidgeModel::save(std::ostream& out) const {
  out << "ridge " << coef_.size() << ' ' << format_double(intercept_) << ' ' << format_double(lambda_);
  for (Eigen::Index j = 0; j < coef_.size(); ++j) out << ' ' << format_double(coef_[j]);
  out << '\n';
}

RidgeModel fit_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double lambda,
                     const Eigen::VectorXd& weights) {
  check_inputs(x, y, weights, "fit_ridge");
  if (x.rows() < 1) throw ConfigError("fit_ridge: no rows");
  if (!(lambda >= 0.0)) throw ConfigError("fit_ridge: lambda must be non-negative");
  const Eigen::VectorXd w = weights_or_ones(weights, x.rows());
  const double total = w.sum();
  if (!(total > 0.0)) throw DataError("fit_ridge: weights sum to zero");

  const Eigen::RowVectorXd x_mean = (w.transpose() * x) / total;
  const double y_mean = w.dot(y) / total;
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = xc.transpose() * w.asDiagonal() * xc;
  gram.diagonal().array() += lambda;
  const Eigen::VectorXd rhs = xc.transpose() * w.asDiagonal() * yc;
  Eigen::VectorXd coef = gram.ldlt().solve(rhs);
  if (!coef.allFinite()) throw DataError("fit_ridge: singular system");
  const double intercept = y_mean - x_mean.dot(coef);
  return RidgeModel(std::move(coef), intercept, lambda);
}

namespace {

// Exact leave-one-out scores of the weighted ridge smoother, one per lambda:
// sum_i w_i ((y_i - yhat_i) / (1 - h_ii))^2 with the intercept in the hat matrix.
std::vector<double> loo_scores(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                               const std::vector<double>& grid) {
  const double total = w.sum();
  const Eigen::RowVectorXd x_mean = (w.transpose() * x) / total;
  const double y_mean = w.dot(y) / total;
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  const Eigen::MatrixXd xtw = xc.transpose() * w.asDiagonal();
  const Eigen::MatrixXd gram0 = xtw * xc;
  const Eigen::VectorXd rhs = xtw * yc;
  std::vector<double> scores(grid.size(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Eigen::MatrixXd gram = gram0;
    gram.diagonal().array() += grid[k];
    const auto ldlt = gram.ldlt();
    const Eigen::VectorXd coef = ldlt.solve(rhs);
    const Eigen::MatrixXd solved = ldlt.solve(xc.transpose());  // d x n
    double score = 0.0;
    bool usable = coef.allFinite();
    for (Eigen::Index i = 0; usable && i < x.rows(); ++i) {
      if (w[i] == 0.0) continue;
      const double h = w[i] / total + w[i] * xc.row(i).dot(solved.col(i));
      if (!(1.0 - h > 1e-12)) {
        usable = false;
        break;
      }
      const double r = (yc[i] - xc.row(i).dot(coef)) / (1.0 - h);
      score += w[i] * r * r;
    }
    if (usable) scores[k] = score;
  }
  return scores;
}

std::vector<double> kfold_scores(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                                 const std::vector<double>& grid, std::size_t folds, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto fold = assign_folds(n, folds, seed);
  std::vector<double> sse(grid.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<Eigen::Index> in_rows;
    std::vector<Eigen::Index> out_rows;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? out_rows : in_rows).push_back(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd x_in = x(in_rows, Eigen::all);
    const Eigen::VectorXd y_in = y(in_rows);
    const Eigen::VectorXd w_in = w(in_rows);
    const Eigen::MatrixXd x_out = x(out_rows, Eigen::all);
    const Eigen::VectorXd y_out = y(out_rows);
    const Eigen::VectorXd w_out = w(out_rows);
    if (!(w_in.sum() > 0.0)) continue;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const RidgeModel model = fit_ridge(x_in, y_in, grid[k], w_in);
      sse[k] += w_out.dot((model.predict(x_out) - y_out).cwiseAbs2());
    }
  }
  return sse;
}

}  // namespace

RidgeModel fit_ridge_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const RidgeOptions& options,
                        const Eigen::VectorXd& weights) {
  check_inputs(x, y, weights, "fit_ridge_cv");
  const auto n = static_cast<std::size_t>(x.rows());
  if (options.lambdas.empty()) throw ConfigError("fit_ridge_cv: empty lambda grid");
  if (options.folds == 0 ? n < 2 : (options.folds < 2 || n < options.folds)) {
    throw ConfigError("fit_ridge_cv: need n >= folds >= 2, or n >= 2 for leave-one-out (n=" + std::to_string(n) +
                      ")");
  }
  std::vector<double> grid = options.lambdas;
  std::sort(grid.begin(), grid.end());
  if (grid.front() < 0.0) throw ConfigError("fit_ridge_cv: lambdas must be non-negative");

  const Eigen::VectorXd w = weights_or_ones(weights, x.rows());
  if (!(w.sum() > 0.0)) throw DataError("fit_ridge_cv: weights sum to zero");
  const std::vector<double> scores =
      options.folds == 0 ? loo_scores(x, y, w, grid) : kfold_scores(x, y, w, grid, options.folds, options.seed);
  // No usable score at all happens only when every fit interpolates; the
  // strongest penalty is the safe fallback.
  std::size_t best = std::isfinite(scores[0]) ? 0 : grid.size() - 1;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (scores[k] < scores[best]) best = k;
  return fit_ridge(x, y, grid[best], weights);
}

// ---------------------------------------------------------------------------
// Trees

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int node = 0;
  while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> level(nodes.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (nodes[i].feature >= 0) {
      level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& target, const Eigen::VectorXd& weights,
              std::size_t max_depth, std::size_t min_leaf)
      : x_(x), target_(target), weights_(weights), max_depth_(max_depth), min_leaf_(std::max<std::size_t>(1, min_leaf)) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto d = static_cast<std::size_t>(x.cols());
    side_.assign(n, 0);
    sorted_.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      auto& order = sorted_[j];
      order.resize(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return x_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(j)) <
               x_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j));
      });
    }
  }

  RegressionTree build() {
    RegressionTree tree;
    tree.nodes.emplace_back();
    grow(tree, 0, sorted_, 0);
    return tree;
  }

 private:
  using Orders = std::vector<std::vector<std::size_t>>;

  void grow(RegressionTree& tree, std::size_t node_index, const Orders& orders, std::size_t depth) {
    const auto& rows = orders.front();
    double sum_w = 0.0;
    double sum_wr = 0.0;
    double sum_wrr = 0.0;
    for (auto i : rows) {
      const double w = weights_[static_cast<Eigen::Index>(i)];
      const double r = target_[static_cast<Eigen::Index>(i)];
      sum_w += w;
      sum_wr += w * r;
      sum_wrr += w * r * r;
    }
    tree.nodes[node_index].value = sum_w > 0.0 ? sum_wr / sum_w : 0.0;
    if (depth >= max_depth_ || rows.size() < 2 * min_leaf_ || !(sum_w > 0.0)) return;

    const double parent_score = sum_wr * sum_wr / sum_w;
    const double min_gain = 1e-12 * sum_wrr;
    double best_gain = min_gain;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (std::size_t j = 0; j < orders.size(); ++j) {
      const auto& order = orders[j];
      const auto col = static_cast<Eigen::Index>(j);
      double left_w = 0.0;
      double left_wr = 0.0;
      for (std::size_t pos = 0; pos + 1 < order.size(); ++pos) {
        const auto i = static_cast<Eigen::Index>(order[pos]);
        left_w += weights_[i];
        left_wr += weights_[i] * target_[i];
        const std::size_t left_count = pos + 1;
        if (left_count < min_leaf_) continue;
        if (order.size() - left_count < min_leaf_) break;
        const double here = x_(i, col);
        const double there = x_(static_cast<Eigen::Index>(order[pos + 1]), col);
        if (!(here < there)) continue;
        const double right_w = sum_w - left_w;
        if (!(left_w > 0.0) || !(right_w > 0.0)) continue;
        const double right_wr = sum_wr - left_wr;
        const double gain = left_wr * left_wr / left_w + right_wr * right_wr / right_w - parent_score;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          best_threshold = 0.5 * (here + there);
        }
      }
    }
    if (best_feature < 0) return;

    const auto fcol = static_cast<Eigen::Index>(best_feature);
    for (auto i : rows) side_[i] = x_(static_cast<Eigen::Index>(i), fcol) <= best_threshold ? 1 : 2;
    Orders left(orders.size());
    Orders right(orders.size());
    for (std::size_t j = 0; j < orders.size(); ++j) {
      for (auto i : orders[j]) (side_[i] == 1 ? left[j] : right[j]).push_back(i);
    }

    const auto left_index = tree.nodes.size();
    tree.nodes.emplace_back();
    const auto right_index = tree.nodes.size();
    tree.nodes.emplace_back();
    TreeNode& node = tree.nodes[node_index];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = static_cast<int>(left_index);
    node.right = static_cast<int>(right_index);
    grow(tree, left_index, left, depth + 1);
    grow(tree, right_index, right, depth + 1);
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& target_;
  const Eigen::VectorXd& weights_;
  std::size_t max_depth_;
  std::size_t min_leaf_;
  std::vector<unsigned char> side_;
  Orders sorted_;
};

}  // namespace

RegressionTree fit_regression_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& target,
                                   const Eigen::VectorXd& weights, std::size_t max_depth, std::size_t min_leaf) {
  check_inputs(x, target, weights, "fit_regression_tree");
  if (x.rows() < 1 || x.cols() < 1) throw ConfigError("fit_regression_tree: empty input");
  const Eigen::VectorXd w = weights_or_ones(weights, x.rows());
  return TreeBuilder(x, target, w, max_depth, min_leaf).build();
}

Eigen::VectorXd GbrtModel::predict(const Eigen::MatrixXd& x) const {
  check_predict_width(input_dim_, x.cols(), "gbrt");
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), init_);
  for (const auto& tree : trees_)
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] += learning_rate_ * tree.predict_row(x.row(i));
  return out;
}

void GbrtModel::save(std::ostream& out) const {
  out << "gbrt " << input_dim_ << ' ' << format_double(init_) << ' ' << format_double(learning_rate_) << ' '
      << trees_.size() << '\n';
  for (const auto& tree : trees_) {
    out << "tree " << tree.nodes.size() << '\n';
    for (const auto& n : tree.nodes) {
      out << n.feature << ' ' << format_double(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << format_double(n.value) << '\n';
    }
  }
}

GbrtModel fit_gbrt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GbrtOptions& options,
                   const Eigen::VectorXd& weights) {
  check_inputs(x, y, weights, "fit_gbrt");
  if (x.rows() < 2) throw ConfigError("fit_gbrt: need at least two rows");
  if (!(options.learning_rate > 0.0)) throw ConfigError("fit_gbrt: learning rate must be positive");
  const Eigen::VectorXd w = weights_or_ones(weights, x.rows());
  const double total = w.sum();
  if (!(total > 0.0)) throw DataError("fit_gbrt: weights sum to zero");

  const double init = w.dot(y) / total;
  Eigen::VectorXd fitted = Eigen::VectorXd::Constant(x.rows(), init);
  std::vector<RegressionTree> trees;
  for (std::size_t t = 0; t < options.trees; ++t) {
    const Eigen::VectorXd residual = y - fitted;
    RegressionTree tree = TreeBuilder(x, residual, w, options.depth, options.min_leaf).build();
    if (tree.nodes.size() == 1) break;
    for (Eigen::Index i = 0; i < x.rows(); ++i) fitted[i] += options.learning_rate * tree.predict_row(x.row(i));
    trees.push_back(std::move(tree));
  }
  return GbrtModel(init, options.learning_rate, std::move(trees), x.cols());
}

// ---------------------------------------------------------------------------
// Logistic

Eigen::VectorXd LogisticModel::probability(const Eigen::MatrixXd& x) const {
  check_predict_width(coef_.size(), x.cols(), "logistic");
  const Eigen::MatrixXd xs = (x.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
  const Eigen::VectorXd z = (xs * coef_).array() + intercept_;
  return z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

void LogisticModel::save(std::ostream& out) const {
  out << "logistic " << coef_.size() << ' ' << format_double(intercept_);
  for (const auto* v : {&mean_, &scale_, &coef_})
    for (Eigen::Index j = 0; j < v->size(); ++j) out << ' ' << format_double((*v)[j]);
  out << '\n';
}

LogisticModel LogisticModel::load(std::istream& in) {
  std::string kind;
  if (!(in >> kind) || kind != "logistic") throw DataError("expected a logistic model");
  const long d = read_count(in, "logistic");
  const double intercept = read_double(in, "logistic");
  Eigen::VectorXd mean(d);
  Eigen::VectorXd scale(d);
  Eigen::VectorXd coef(d);
  for (auto* v : {&mean, &scale, &coef})
    for (long j = 0; j < d; ++j) (*v)[j] = read_double(in, "logistic");
  return LogisticModel(std::move(mean), std::move(scale), std::move(coef), intercept);
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& w, const LogisticOptions& options) {
  check_inputs(x, w, Eigen::VectorXd{}, "fit_logistic");
  const Eigen::Index n = x.rows();
  if (n < 1) throw ConfigError("fit_logistic: no rows");
  Eigen::VectorXd mean = x.colwise().mean().transpose();
  Eigen::VectorXd scale(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double ss = (x.col(j).array() - mean[j]).square().sum();
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    scale[j] = sd > 1e-12 * std::max(1.0, std::fabs(mean[j])) ? sd : 1.0;
  }
  const Eigen::MatrixXd xs = (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();

  Eigen::VectorXd coef = Eigen::VectorXd::Zero(x.cols());
  double intercept = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < options.iterations; ++it) {
    const Eigen::VectorXd z = (xs * coef).array() + intercept;
    const Eigen::VectorXd p = z.unaryExpr([](double v) {
      if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
    const Eigen::VectorXd err = p - w;
    coef -= options.step * (inv_n * (xs.transpose() * err) + 2.0 * options.l2 * coef);
    intercept -= options.step * inv_n * err.sum();
  }
  return LogisticModel(std::move(mean), std::move(scale), std::move(coef), intercept);
}

// ---------------------------------------------------------------------------

std::shared_ptr<const RegressionModel> load_regression_model(std::istream& in) {
  std::string kind;
  if (!(in >> kind)) throw DataError("empty model file");
  if (kind == "ridge") {
    const long d = read_count(in, "ridge");
    const double intercept = read_double(in, "ridge");
    const double lambda = read_double(in, "ridge");
    Eigen::VectorXd coef(d);
    for (long j = 0; j < d; ++j) coef[j] = read_double(in, "ridge");
    return std::make_shared<RidgeModel>(std::move(coef), intercept, lambda);
  }
  if (kind == "gbrt") {
    const long d = read_count(in, "gbrt");
    const double init = read_double(in, "gbrt");
    const double lr = read_double(in, "gbrt");
    const long count = read_count(in, "gbrt");
    std::vector<RegressionTree> trees(static_cast<std::size_t>(count));
    for (auto& tree : trees) {
      std::string word;
      if (!(in >> word) || word != "tree") throw DataError("gbrt: expected 'tree'");
      const long nodes = read_count(in, "gbrt");
      tree.nodes.resize(static_cast<std::size_t>(nodes));
      for (auto& node : tree.nodes) {
        if (!(in >> node.feature)) throw DataError("gbrt: bad node");
        node.threshold = read_double(in, "gbrt");
        if (!(in >> node.left >> node.right)) throw DataError("gbrt: bad node");
        node.value = read_double(in, "gbrt");
        if (node.feature >= d || (node.feature >= 0 && (node.left <= 0 || node.right <= 0 || node.left >= nodes ||
                                                          node.right >= nodes))) {
          throw DataError("gbrt: node references out of range");
        }
      }
    }
    return std::make_shared<GbrtModel>(init, lr, std::move(trees), d);
  }
  throw DataError("unknown model kind '" + kind + "'");
}

}  // namespace evorep

#include "evorep/metalearners.hpp"

#include <fstream>
#include <sstream>

#include "evorep/errors.hpp"
#include "evorep/random.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

std::string_view to_string(BaseKind kind) noexcept {
  switch (kind) {
    case BaseKind::ridge_cv: return "ridge";
    case BaseKind::gbrt: return "gbrt";
  }
  return "ridge";
}

BaseKind parse_base_kind(std::string_view name) {
  if (name == "ridge" || name == "ridge_cv") return BaseKind::ridge_cv;
  if (name == "gbrt" || name == "trees") return BaseKind::gbrt;
  throw ConfigError("unknown base learner '" + std::string(name) + "'");
}

std::string_view to_string(LearnerKind kind) noexcept {
  switch (kind) {
    case LearnerKind::s: return "S";
    case LearnerKind::t: return "T";
    case LearnerKind::x: return "X";
    case LearnerKind::x_direct_t: return "XT";
    case LearnerKind::x_direct_s: return "XS";
    case LearnerKind::r: return "R";
  }
  return "S";
}

LearnerKind parse_learner_kind(std::string_view name) {
  if (name == "S" || name == "s") return LearnerKind::s;
  if (name == "T" || name == "t") return LearnerKind::t;
  if (name == "X" || name == "x") return LearnerKind::x;
  if (name == "XT" || name == "xt") return LearnerKind::x_direct_t;
  if (name == "XS" || name == "xs") return LearnerKind::x_direct_s;
  if (name == "R" || name == "r") return LearnerKind::r;
  throw ConfigError("unknown learner '" + std::string(name) + "'");
}

std::shared_ptr<const RegressionModel> RidgeCvLearner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                           const Eigen::VectorXd& weights, std::uint64_t seed) const {
  if (x.rows() < 2) throw ConfigError("ridge base learner needs at least two rows");
  RidgeOptions opts = options_;
  opts.seed = seed;
  if (opts.folds > 0) opts.folds = std::min<std::size_t>(opts.folds, static_cast<std::size_t>(x.rows()));
  if (opts.lambdas.size() == 1) {
    return std::make_shared<RidgeModel>(fit_ridge(x, y, opts.lambdas.front(), weights));
  }
  return std::make_shared<RidgeModel>(fit_ridge_cv(x, y, opts, weights));
}

std::shared_ptr<const RegressionModel> GbrtLearner::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                                        const Eigen::VectorXd& weights, std::uint64_t seed) const {
  GbrtOptions opts = options_;
  opts.seed = seed;
  return std::make_shared<GbrtModel>(fit_gbrt(x, y, opts, weights));
}

std::unique_ptr<BaseLearner> make_base_learner(BaseKind kind) {
  switch (kind) {
    case BaseKind::ridge_cv: return std::make_unique<RidgeCvLearner>();
    case BaseKind::gbrt: return std::make_unique<GbrtLearner>();
  }
  throw ConfigError("unknown base learner kind");
}

// ---------------------------------------------------------------------------
// Propensity

namespace {

Eigen::VectorXd clip_probability(Eigen::VectorXd p, double clip) {
  return p.cwiseMax(clip).cwiseMin(1.0 - clip);
}

std::vector<Eigen::Index> rows_where(const std::vector<std::size_t>& fold, std::size_t f, bool equal) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if ((fold[i] == f) == equal) rows.push_back(static_cast<Eigen::Index>(i));
  return rows;
}

}  // namespace

Eigen::VectorXd PropensityModel::predict(const Eigen::MatrixXd& x) const {
  return clip_probability(full.probability(x), clip);
}

PropensityModel fit_propensity(const Eigen::MatrixXd& x, const Eigen::VectorXi& w, std::size_t folds,
                               std::uint64_t seed, const LogisticOptions& options) {
  if (x.rows() != w.size()) throw DimensionError("fit_propensity: row count mismatch");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto treated = static_cast<std::size_t>(w.sum());
  if (treated == 0 || treated == n) throw ConfigError("fit_propensity: treatment has a single class");
  if (folds < 2 || n < folds) throw ConfigError("fit_propensity: need n >= folds >= 2");

  const Eigen::VectorXd wd = w.cast<double>();
  PropensityModel model;
  model.fold_of = assign_folds(n, folds, seed);
  model.out_of_fold.resize(x.rows());
  for (std::size_t f = 0; f < folds; ++f) {
    const auto in_rows = rows_where(model.fold_of, f, false);
    const auto out_rows = rows_where(model.fold_of, f, true);
    LogisticModel fm = fit_logistic(x(in_rows, Eigen::all), wd(in_rows), options);
    model.out_of_fold(out_rows) = clip_probability(fm.probability(x(out_rows, Eigen::all)), model.clip);
    model.fold_models.push_back(std::move(fm));
  }
  model.full = fit_logistic(x, wd, options);
  return model;
}

// ---------------------------------------------------------------------------
// CATE models

CateModel::CateModel(LearnerKind kind, BaseKind base, Eigen::Index input_dim, std::vector<Stage> stages,
                     double x_weight, std::optional<LogisticModel> weight_model)
    : kind_(kind),
      base_(base),
      input_dim_(input_dim),
      stages_(std::move(stages)),
      x_weight_(x_weight),
      weight_model_(std::move(weight_model)) {}

const CateModel::Stage& CateModel::stage(std::string_view role) const {
  for (const auto& s : stages_)
    if (s.role == role) return s;
  throw ConfigError("CATE model has no stage '" + std::string(role) + "'");
}

Eigen::MatrixXd augment_with_treatment(const Eigen::MatrixXd& x, double w) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out << x, Eigen::VectorXd::Constant(x.rows(), w);
  return out;
}

Eigen::MatrixXd augment_with_treatment(const Eigen::MatrixXd& x, const Eigen::VectorXi& w) {
  Eigen::MatrixXd out(x.rows(), x.cols() + 1);
  out << x, w.cast<double>();
  return out;
}

Eigen::VectorXd CateModel::predict_cate(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim_) {
    throw DimensionError("CATE model trained on " + std::to_string(input_dim_) + " features, got " +
                         std::to_string(x.cols()));
  }
  switch (kind_) {
    case LearnerKind::s: {
      const auto& mu = *stage("mu").model;
      return mu.predict(augment_with_treatment(x, 1.0)) - mu.predict(augment_with_treatment(x, 0.0));
    }
    case LearnerKind::t:
      return stage("mu1").model->predict(x) - stage("mu0").model->predict(x);
    case LearnerKind::x: {
      const Eigen::VectorXd tau0 = stage("tau0").model->predict(x);
      const Eigen::VectorXd tau1 = stage("tau1").model->predict(x);
      if (weight_model_) {
        const Eigen::VectorXd g =
            clip_probability(weight_model_->probability(x), PropensityModel::kDefaultClip);
        return (g.array() * tau0.array() + (1.0 - g.array()) * tau1.array()).matrix();
      }
      return x_weight_ * tau0 + (1.0 - x_weight_) * tau1;
    }
    case LearnerKind::x_direct_t:
    case LearnerKind::x_direct_s:
    case LearnerKind::r:
      return stage("tau").model->predict(x);
  }
  throw ConfigError("unknown learner kind");
}

Eigen::VectorXd predict_cate(const CateModel& model, const Eigen::MatrixXd& x) { return model.predict_cate(x); }

namespace {

struct Arms {
  std::vector<Eigen::Index> treated;
  std::vector<Eigen::Index> control;
};

Arms arms_of(const Dataset& data) {
  Arms arms;
  for (Eigen::Index i = 0; i < data.rows(); ++i) (data.treatment()[i] == 1 ? arms.treated : arms.control).push_back(i);
  return arms;
}

Arms require_both_arms(const Dataset& data) {
  Arms arms = arms_of(data);
  if (arms.control.empty()) throw ConfigError("empty control arm");
  if (arms.treated.empty()) throw ConfigError("empty treated arm");
  return arms;
}

std::uint64_t stage_seed(const MetaOptions& options, std::string_view stage) {
  return derive_seed(options.seed, hash_label(stage));
}

struct ArmModels {
  std::shared_ptr<const RegressionModel> mu0;
  std::shared_ptr<const RegressionModel> mu1;
};

ArmModels fit_arm_models(const Dataset& train, const Arms& arms, const BaseLearner& base, const MetaOptions& options) {
  const Eigen::MatrixXd& x = train.features();
  const Eigen::VectorXd& y = train.outcome();
  ArmModels m;
  m.mu0 = base.fit(x(arms.control, Eigen::all), y(arms.control), Eigen::VectorXd{}, stage_seed(options, "mu0"));
  m.mu1 = base.fit(x(arms.treated, Eigen::all), y(arms.treated), Eigen::VectorXd{}, stage_seed(options, "mu1"));
  return m;
}

}  // namespace

Eigen::VectorXd imputed_effects(const Dataset& data, const Eigen::VectorXd& mu0, const Eigen::VectorXd& mu1) {
  if (mu0.size() != data.rows() || mu1.size() != data.rows()) throw DimensionError("imputed_effects: size mismatch");
  Eigen::VectorXd d(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    d[i] = data.treatment()[i] == 1 ? data.outcome()[i] - mu0[i] : mu1[i] - data.outcome()[i];
  }
  return d;
}

CateModel s_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  auto mu = base.fit(augment_with_treatment(train.features(), train.treatment()), train.outcome(), Eigen::VectorXd{},
                     stage_seed(options, "mu"));
  return CateModel(LearnerKind::s, base.kind(), train.cols(), {{"mu", std::move(mu)}});
}

CateModel t_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  const Arms arms = require_both_arms(train);
  ArmModels m = fit_arm_models(train, arms, base, options);
  return CateModel(LearnerKind::t, base.kind(), train.cols(), {{"mu0", std::move(m.mu0)}, {"mu1", std::move(m.mu1)}});
}

CateModel x_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  const Arms arms = require_both_arms(train);
  ArmModels m = fit_arm_models(train, arms, base, options);
  const Eigen::MatrixXd& x = train.features();
  const Eigen::VectorXd d = imputed_effects(train, m.mu0->predict(x), m.mu1->predict(x));

  auto tau1 = base.fit(x(arms.treated, Eigen::all), d(arms.treated), Eigen::VectorXd{}, stage_seed(options, "tau1"));
  auto tau0 = base.fit(x(arms.control, Eigen::all), d(arms.control), Eigen::VectorXd{}, stage_seed(options, "tau0"));

  std::optional<LogisticModel> weight_model;
  if (options.x_weighting == XWeighting::propensity) {
    weight_model = fit_logistic(x, train.treatment_real());
  }
  return CateModel(LearnerKind::x, base.kind(), train.cols(),
                   {{"mu0", std::move(m.mu0)}, {"mu1", std::move(m.mu1)}, {"tau0", std::move(tau0)},
                    {"tau1", std::move(tau1)}},
                   options.x_weight, std::move(weight_model));
}

CateModel x_learner_direct_t(const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  const Arms arms = require_both_arms(train);
  ArmModels m = fit_arm_models(train, arms, base, options);
  const Eigen::MatrixXd& x = train.features();
  const Eigen::VectorXd d = imputed_effects(train, m.mu0->predict(x), m.mu1->predict(x));
  auto tau = base.fit(x, d, Eigen::VectorXd{}, stage_seed(options, "tau"));
  return CateModel(LearnerKind::x_direct_t, base.kind(), train.cols(),
                   {{"mu0", std::move(m.mu0)}, {"mu1", std::move(m.mu1)}, {"tau", std::move(tau)}});
}

CateModel x_learner_direct_s(const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  const Eigen::MatrixXd& x = train.features();
  auto mu = base.fit(augment_with_treatment(x, train.treatment()), train.outcome(), Eigen::VectorXd{},
                     stage_seed(options, "mu"));
  const Eigen::VectorXd d =
      imputed_effects(train, mu->predict(augment_with_treatment(x, 0.0)), mu->predict(augment_with_treatment(x, 1.0)));
  auto tau = base.fit(x, d, Eigen::VectorXd{}, stage_seed(options, "tau"));
  return CateModel(LearnerKind::x_direct_s, base.kind(), train.cols(), {{"mu", std::move(mu)}, {"tau", std::move(tau)}});
}

CateModel r_learner(const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  require_both_arms(train);
  const auto n = static_cast<std::size_t>(train.rows());
  if (options.folds < 2 || n < 2 * options.folds) {
    throw ConfigError("R-learner needs at least 2 * folds rows");
  }
  const Eigen::MatrixXd& x = train.features();
  const Eigen::VectorXd& y = train.outcome();

  const auto fold = assign_folds(n, options.folds, stage_seed(options, "folds"));
  Eigen::VectorXd m_hat(train.rows());
  for (std::size_t f = 0; f < options.folds; ++f) {
    const auto in_rows = rows_where(fold, f, false);
    const auto out_rows = rows_where(fold, f, true);
    auto model = base.fit(x(in_rows, Eigen::all), y(in_rows), Eigen::VectorXd{},
                          derive_seed(stage_seed(options, "m"), f));
    m_hat(out_rows) = model->predict(x(out_rows, Eigen::all));
  }
  const PropensityModel e = fit_propensity(x, train.treatment(), options.folds, stage_seed(options, "e"));

  const Eigen::VectorXd w_resid = train.treatment_real() - e.out_of_fold;
  const Eigen::VectorXd pseudo = (y - m_hat).array() / w_resid.array();
  const Eigen::VectorXd weights = w_resid.cwiseAbs2();
  auto tau = base.fit(x, pseudo, weights, stage_seed(options, "tau"));
  return CateModel(LearnerKind::r, base.kind(), train.cols(), {{"tau", std::move(tau)}});
}

CateModel fit_cate(LearnerKind kind, const Dataset& train, const BaseLearner& base, const MetaOptions& options) {
  switch (kind) {
    case LearnerKind::s: return s_learner(train, base, options);
    case LearnerKind::t: return t_learner(train, base, options);
    case LearnerKind::x: return x_learner(train, base, options);
    case LearnerKind::x_direct_t: return x_learner_direct_t(train, base, options);
    case LearnerKind::x_direct_s: return x_learner_direct_s(train, base, options);
    case LearnerKind::r: return r_learner(train, base, options);
  }
  throw ConfigError("unknown learner kind");
}

// ---------------------------------------------------------------------------
// Serialization

void save_cate_model(const std::filesystem::path& dir, const CateModel& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create '" + dir.string() + "': " + ec.message());

  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot write manifest in '" + dir.string() + "'");
  manifest << "evorep-cate-model 1\n";
  manifest << "learner " << to_string(model.kind()) << '\n';
  manifest << "base " << to_string(model.base()) << '\n';
  manifest << "input_dim " << model.input_dim() << '\n';
  manifest << "x_weight " << format_double(model.x_weight()) << '\n';
  if (model.weight_model()) {
    manifest << "weight_model weight_model.txt\n";
    std::ofstream out(dir / "weight_model.txt");
    model.weight_model()->save(out);
  }
  for (std::size_t i = 0; i < model.stages().size(); ++i) {
    const auto& s = model.stages()[i];
    const std::string file = "stage_" + std::to_string(i) + ".txt";
    manifest << "stage " << s.role << ' ' << file << '\n';
    std::ofstream out(dir / file);
    if (!out) throw DataError("cannot write '" + (dir / file).string() + "'");
    s.model->save(out);
  }
}

CateModel load_cate_model(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.txt");
  if (!manifest) throw DataError("cannot open manifest in '" + dir.string() + "'");
  std::string key;
  std::string value;
  manifest >> key >> value;
  if (key != "evorep-cate-model" || value != "1") throw DataError("not a CATE model manifest");

  LearnerKind kind = LearnerKind::s;
  BaseKind base = BaseKind::ridge_cv;
  Eigen::Index input_dim = 0;
  double x_weight = 0.5;
  std::optional<LogisticModel> weight_model;
  std::vector<CateModel::Stage> stages;
  while (manifest >> key) {
    if (key == "learner") {
      manifest >> value;
      kind = parse_learner_kind(value);
    } else if (key == "base") {
      manifest >> value;
      base = parse_base_kind(value);
    } else if (key == "input_dim") {
      manifest >> input_dim;
    } else if (key == "x_weight") {
      manifest >> value;
      x_weight = parse_double(value, "manifest");
    } else if (key == "weight_model") {
      manifest >> value;
      std::ifstream in(dir / value);
      weight_model = LogisticModel::load(in);
    } else if (key == "stage") {
      std::string role;
      manifest >> role >> value;
      std::ifstream in(dir / value);
      if (!in) throw DataError("missing stage file '" + value + "'");
      stages.push_back({role, load_regression_model(in)});
    } else {
      throw DataError("unknown manifest key '" + key + "'");
    }
  }
  if (input_dim < 1) throw DataError("manifest lacks input_dim");
  return CateModel(kind, base, input_dim, std::move(stages), x_weight, std::move(weight_model));
}

}  // namespace evorep

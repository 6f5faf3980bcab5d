#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "evorep/errors.hpp"
#include "evorep/neuralnet.hpp"
#include "oracles.hpp"

namespace evorep {
namespace {

Dataset regression_data(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXi w(n);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = normal(rng);
    w[i] = x(i, 0) + 0.5 * normal(rng) > 0.0 ? 1 : 0;
    y[i] = std::sin(x(i, 0)) + 0.5 * x(i, 1 % d) + 0.1 * normal(rng);
  }
  return Dataset(x, w, y);
}

OutcomeNetParams random_outcome_net(Eigen::Index d, Eigen::Index m, Activation a, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 0.8);
  OutcomeNetParams p = OutcomeNetParams::zeros(d, m, a);
  for (Eigen::Index i = 0; i < p.m1.size(); ++i) p.m1.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < m; ++i) {
    p.b1[i] = normal(rng);
    p.m2[i] = normal(rng);
  }
  p.b2 = normal(rng);
  return p;
}

TEST(Glorot, VarianceMatchesFanSum) {
  Rng rng(1);
  const Eigen::MatrixXd w = glorot_init(300, 500, rng);
  const double var = w.squaredNorm() / static_cast<double>(w.size());
  EXPECT_NEAR(var, 2.0 / 800.0, 0.05 * 2.0 / 800.0);
  EXPECT_NEAR(w.mean(), 0.0, 1e-3);
}

TEST(Forward, RowsAgreeWithSingleRow) {
  Rng rng(2);
  const auto p = random_outcome_net(3, 5, Activation::tanh, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 3);
  const Eigen::VectorXd f = forward_outcome_rows(p, x);
  const Eigen::MatrixXd phi = representation_rows(p, x);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_NEAR(f[i], forward_outcome(p, x.row(i).transpose()), 1e-14);
    EXPECT_NEAR(f[i], p.m2.dot(phi.row(i).transpose()) + p.b2, 1e-14);
  }
  EXPECT_LT((phi - p.representation_map().apply_rows(x)).norm(), 1e-14);
}

TEST(Forward, TreatmentHeadIsProbability) {
  TreatmentHeadParams h = TreatmentHeadParams::zeros(4, 3);
  h.m4 << 50.0, 50.0, 50.0;
  h.m3.setConstant(10.0);
  const Eigen::MatrixXd reps = Eigen::MatrixXd::Constant(2, 4, 1.0);
  const Eigen::VectorXd g = forward_treatment_rows(h, reps);
  EXPECT_TRUE((g.array() <= 1.0).all() && (g.array() >= 0.0).all());
  EXPECT_NEAR(forward_treatment(TreatmentHeadParams::zeros(4, 3), reps.row(0).transpose()), 0.5, 1e-15);
}

TEST(Backprop, OutcomeMatchesFiniteDifferences) {
  Rng rng(11);
  std::uniform_int_distribution<int> dim(1, 4);
  std::bernoulli_distribution keep(0.8);
  int checked = 0;
  for (int net = 0; net < 50; ++net) {
    const Activation a = net % 2 == 0 ? Activation::tanh : Activation::elu;
    const Eigen::Index d = dim(rng);
    const Eigen::Index m = dim(rng) + 1;
    const Eigen::Index batch = dim(rng) + 2;
    OutcomeNetParams p = random_outcome_net(d, m, a, rng);
    Eigen::MatrixXd x(batch, d);
    Eigen::VectorXd y(batch);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < batch; ++i) y[i] = normal(rng);
    Eigen::MatrixXd mask;
    if (net % 3 == 0) {
      mask.resize(batch, m);
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? 1.25 : 0.0;
    }
    const double l2 = net % 4 == 0 ? 0.0 : 1e-2;
    const Eigen::VectorXd analytic = pack(backprop_outcome(p, x, y, mask, l2));
    OutcomeNetParams probe = p;
    const Eigen::VectorXd numeric = oracle::numeric_gradient(pack(p), [&](const Eigen::VectorXd& flat) {
      unpack(flat, probe);
      return oracle::outcome_loss(probe, x, y, mask, l2);
    });
    const double rel = (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), 1e-12});
    EXPECT_LE(rel, 1e-5) << "network " << net;
    ++checked;
  }
  EXPECT_EQ(checked, 50);
}

TEST(Backprop, TreatmentMatchesFiniteDifferences) {
  Rng rng(12);
  std::normal_distribution<double> normal(0.0, 0.8);
  for (int net = 0; net < 50; ++net) {
    const Eigen::Index m = 2 + net % 3;
    const Eigen::Index k = 1 + net % 4;
    const Eigen::Index batch = 3 + net % 5;
    TreatmentHeadParams h = TreatmentHeadParams::zeros(m, k, net % 2 == 0 ? Activation::tanh : Activation::elu);
    for (Eigen::Index i = 0; i < h.m3.size(); ++i) h.m3.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < k; ++i) {
      h.b3[i] = normal(rng);
      h.m4[i] = normal(rng);
    }
    h.b4 = normal(rng);
    Eigen::MatrixXd reps(batch, m);
    for (Eigen::Index i = 0; i < reps.size(); ++i) reps.data()[i] = std::tanh(normal(rng));
    Eigen::VectorXd w(batch);
    for (Eigen::Index i = 0; i < batch; ++i) w[i] = static_cast<double>(i % 2);
    Eigen::MatrixXd mask;
    if (net % 2 == 1) mask = Eigen::MatrixXd::Constant(batch, k, 1.25);
    const double l2 = 1e-3;
    const Eigen::VectorXd analytic = pack(backprop_treatment(h, reps, w, mask, l2));
    TreatmentHeadParams probe = h;
    const Eigen::VectorXd numeric = oracle::numeric_gradient(pack(h), [&](const Eigen::VectorXd& flat) {
      unpack(flat, probe);
      return oracle::treatment_loss(probe, reps, w, mask, l2);
    });
    const double rel = (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), 1e-12});
    EXPECT_LE(rel, 1e-5) << "head " << net;
  }
}

TEST(Backprop, RejectsBadMask) {
  Rng rng(1);
  const auto p = random_outcome_net(2, 3, Activation::tanh, rng);
  EXPECT_THROW(backprop_outcome(p, Eigen::MatrixXd::Zero(4, 2), Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Ones(4, 2), 0.0),
               DimensionError);
}

TEST(Adam, MatchesScalarReference) {
  TrainConfig config;
  config.learning_rate = 0.01;
  Rng rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = 7;
  Eigen::VectorXd params(n);
  for (Eigen::Index i = 0; i < n; ++i) params[i] = normal(rng);
  std::vector<double> ref(params.data(), params.data() + n);
  std::vector<double> m(static_cast<std::size_t>(n), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  AdamState state(n);
  for (int step = 1; step <= 100; ++step) {
    Eigen::VectorXd grad(n);
    for (Eigen::Index i = 0; i < n; ++i) grad[i] = normal(rng) + 0.1 * params[i];
    for (std::size_t i = 0; i < ref.size(); ++i) {
      const double g = grad[static_cast<Eigen::Index>(i)];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1.0 - std::pow(0.9, step));
      const double vh = v[i] / (1.0 - std::pow(0.999, step));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    adam_step(params, state, grad, config);
  }
  EXPECT_EQ(state.step, 100u);
  for (Eigen::Index i = 0; i < n; ++i) EXPECT_NEAR(params[i], ref[static_cast<std::size_t>(i)], 1e-12);
}

TEST(Packing, RoundTrip) {
  Rng rng(9);
  const auto p = random_outcome_net(3, 4, Activation::tanh, rng);
  OutcomeNetParams q = OutcomeNetParams::zeros(3, 4);
  unpack(pack(p), q);
  EXPECT_EQ(p, q);
  const Eigen::VectorXd flat = pack(p);
  EXPECT_EQ(flat.size(), 3 * 4 + 4 + 4 + 1);
  EXPECT_EQ(flat[1], p.m1(0, 1));  // row-major weights first
  EXPECT_THROW(unpack(Eigen::VectorXd::Zero(3), q), DimensionError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(TrainOutcome, ImprovesOnInitializationAndIsDeterministic) {
  const Dataset train = regression_data(300, 3, 1);
  const Dataset valid = regression_data(100, 3, 2);
  TrainConfig config;
  config.seed = 17;
  const OutcomeFit a = train_outcome(train, valid, 8, config);
  const OutcomeFit b = train_outcome(train, valid, 8, config);
  EXPECT_EQ(a.params, b.params);
  EXPECT_LT(a.valid_mse, 0.5 * a.initial_valid_mse);
  EXPECT_LE(a.best_epoch, a.epochs_run);
  const double mse = (forward_outcome_rows(a.params, valid.features()) - valid.outcome()).squaredNorm() / 100.0;
  EXPECT_NEAR(mse, a.valid_mse, 1e-9);
}

TEST(TrainOutcome, EarlyStoppingKeepsInitializationWhenNothingHelps) {
  const Dataset train = regression_data(40, 2, 3);
  const Dataset valid = regression_data(40, 2, 4);
  TrainConfig config;
  config.max_epochs = 0;
  const OutcomeFit fit = train_outcome(train, valid, 4, config);
  EXPECT_EQ(fit.best_epoch, 0u);
  EXPECT_EQ(fit.epochs_run, 0u);
  EXPECT_DOUBLE_EQ(fit.valid_mse, fit.initial_valid_mse);
}

TEST(RefineOutcome, FrozenHiddenLayerDoesNotMove) {
  const Dataset train = regression_data(120, 3, 5);
  const Dataset valid = regression_data(60, 3, 6);
  TrainConfig config;
  config.seed = 3;
  const OutcomeFit base = train_outcome(train, valid, 5, config);
  config.max_epochs = 30;
  const OutcomeFit refined = refine_outcome(base.params, train, valid, config, true, true);
  EXPECT_EQ(refined.params.m1, base.params.m1);
  EXPECT_EQ(refined.params.b1, base.params.b1);
  EXPECT_NE(refined.params.m2, base.params.m2);
}

TEST(TreatmentHead, ScoreIsValidationSquaredError) {
  const Dataset train = regression_data(200, 3, 7);
  const Dataset valid = regression_data(80, 3, 8);
  TrainConfig config;
  config.seed = 1;
  const OutcomeFit theta = train_outcome(train, valid, 6, config);
  const HeadFit head = train_treatment_head(theta.params, train, valid, 4, config);
  const Eigen::VectorXd g = forward_treatment_rows(head.head, representation_rows(theta.params, valid.features()));
  EXPECT_NEAR(head.score, (g - valid.treatment_real()).squaredNorm() / 80.0, 1e-12);
  EXPECT_GT(head.score, 0.0);
  EXPECT_LT(head.score, 0.25 + 1e-9 + 0.2);
}

TEST(OutcomeNet, SaveLoadIsExact) {
  Rng rng(4);
  const auto p = random_outcome_net(3, 2, Activation::relu, rng);
  std::stringstream s;
  save_outcome_net(s, p);
  EXPECT_EQ(load_outcome_net(s), p);
  std::stringstream bad("evorep-outcome-net 2\n");
  EXPECT_THROW(load_outcome_net(bad), DataError);
}

TEST(OutcomeNet, ValidateShapes) {
  OutcomeNetParams p = OutcomeNetParams::zeros(3, 2);
  EXPECT_NO_THROW(p.validate());
  p.b1.resize(3);
  EXPECT_THROW(p.validate(), DimensionError);
  p = OutcomeNetParams::zeros(3, 2);
  p.m2[0] = std::nan("");
  EXPECT_THROW(p.validate(), DataError);
}

}  // namespace
}  // namespace evorep

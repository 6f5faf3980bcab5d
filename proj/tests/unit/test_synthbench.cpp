#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "evorep/errors.hpp"
#include "evorep/synthbench.hpp"

namespace evorep {
namespace {

Eigen::RowVectorXd row(std::initializer_list<double> values, Eigen::Index d) {
  Eigen::RowVectorXd x = Eigen::RowVectorXd::Zero(d);
  Eigen::Index i = 0;
  for (double v : values) x[i++] = v;
  return x;
}

TEST(SetupA, WorkedExamples) {
  const auto x = row({std::sqrt(0.5), std::sqrt(0.5), 0.5, 0.0, 0.0}, 24);
  EXPECT_DOUBLE_EQ(setup_a_propensity(x), 0.9);  // sin(pi/2) = 1, clipped
  EXPECT_NEAR(setup_a_cate(row({0.5, 0.5}, 24)), 0.5, 1e-15);
  EXPECT_NEAR(setup_a_baseline(row({0.0, 0.0, 0.5, 0.0, 0.0}, 24)), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(setup_a_propensity(row({0.0, 0.3}, 24)), 0.1);
  EXPECT_NEAR(setup_a_baseline(row({1.0, 0.5, 1.0, 0.2, 0.4}, 24)), 1.0 + 0.5 + 0.2 + 0.2, 1e-12);
}

TEST(SetupC, WorkedExamples) {
  EXPECT_DOUBLE_EQ(setup_c_propensity(row({0.0, 0.0, 0.0}, 12)), 0.5);
  EXPECT_NEAR(setup_c_baseline(row({0.0, 0.0, 0.0}, 12)), 2.0 * std::numbers::ln2, 1e-15);
  EXPECT_NEAR(setup_c_propensity(row({0.0, 1.0, 1.0}, 12)), 1.0 / (1.0 + std::exp(2.0)), 1e-15);
  EXPECT_NEAR(setup_c_baseline(row({400.0, 300.0, 300.0}, 12)), 2000.0, 1e-9);
  EXPECT_EQ(setup_c_cate(row({3.0}, 12)), 1.0);
}

TEST(Generators, ShapesAndEffectRange) {
  const Dataset a = generate(SynthSpec::setup_a(), 1);
  EXPECT_EQ(a.rows(), 200);
  EXPECT_EQ(a.cols(), 24);
  ASSERT_TRUE(a.true_cate().has_value());
  EXPECT_GE(a.true_cate()->minCoeff(), 0.0);
  EXPECT_LE(a.true_cate()->maxCoeff(), 1.0);
  EXPECT_GE(a.features().minCoeff(), 0.0);
  EXPECT_LE(a.features().maxCoeff(), 1.0);

  const Dataset c = generate(SynthSpec::setup_c(), 1);
  EXPECT_EQ(c.rows(), 500);
  EXPECT_EQ(c.cols(), 12);
  EXPECT_TRUE((c.true_cate()->array() == 1.0).all());
}

TEST(Generators, DeterministicAndSeedSensitive) {
  const auto spec = SynthSpec::setup_c();
  const Dataset a = generate(spec, 5);
  const Dataset b = generate(spec, 5);
  const Dataset c = generate(spec, 6);
  EXPECT_EQ(a.features(), b.features());
  EXPECT_EQ(a.outcome(), b.outcome());
  EXPECT_NE(a.features(), c.features());
}

TEST(Generators, NoiseOnlyChangesOutcome) {
  SynthSpec quiet = SynthSpec::setup_a();
  quiet.sigma = 0.0;
  const Dataset d = generate(quiet, 8);
  const Dataset noisy = generate(SynthSpec::setup_a(), 8);
  EXPECT_EQ(d.features(), noisy.features());
  EXPECT_EQ(d.treatment(), noisy.treatment());
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const auto x = d.features().row(i);
    EXPECT_NEAR(d.outcome()[i], setup_a_baseline(x) + (d.treatment()[i] - 0.5) * setup_a_cate(x), 1e-12);
  }
}

TEST(Generators, SetupAMoments) {
  SynthSpec spec = SynthSpec::setup_a();
  spec.n = 100000;
  const Dataset data = generate(spec, 3);
  const Eigen::RowVectorXd means = data.features().colwise().mean();
  EXPECT_LT((means.array() - 0.5).abs().maxCoeff(), 0.02);
  EXPECT_NEAR(data.true_cate()->mean(), 0.5, 0.02);
  double mean_e = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) mean_e += setup_a_propensity(data.features().row(i));
  mean_e /= static_cast<double>(data.rows());
  EXPECT_NEAR(data.treatment_real().mean(), mean_e, 0.02);
}

TEST(Generators, SetupCMomentsAndPropensityBuckets) {
  SynthSpec spec = SynthSpec::setup_c();
  spec.n = 100000;
  const Dataset data = generate(spec, 4);
  const Eigen::MatrixXd& x = data.features();
  const Eigen::RowVectorXd means = x.colwise().mean();
  const Eigen::RowVectorXd vars = (x.rowwise() - means).array().square().colwise().mean();
  EXPECT_LT(means.cwiseAbs().maxCoeff(), 0.03);
  EXPECT_LT((vars.array() - 1.0).abs().maxCoeff(), 0.03);

  std::array<double, 5> sum_e{}, sum_w{};
  std::array<int, 5> count{};
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double e = setup_c_propensity(x.row(i));
    const auto b = std::min<std::size_t>(4, static_cast<std::size_t>(e * 5.0));
    sum_e[b] += e;
    sum_w[b] += data.treatment()[i];
    ++count[b];
  }
  for (std::size_t b = 0; b < 5; ++b) {
    ASSERT_GT(count[b], 1000);
    EXPECT_NEAR(sum_w[b] / count[b], sum_e[b] / count[b], 0.03) << "bucket " << b;
  }
}

TEST(SynthSpec, Validation) {
  SynthSpec s = SynthSpec::setup_a();
  s.d = 4;
  EXPECT_THROW(s.validate(), ConfigError);
  s = SynthSpec::setup_c();
  s.sigma = -1.0;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_EQ(parse_setup("C"), Setup::c);
  EXPECT_THROW(parse_setup("B"), ConfigError);
}

// Predicts the true effect of the test rows.
class OracleLearner final : public TrialLearner {
 public:
  std::string label() const override { return "oracle"; }
  Eigen::VectorXd fit_predict(const Dataset&, const Dataset& test, std::uint64_t) const override {
    return *test.true_cate();
  }
};

class FailingLearner final : public TrialLearner {
 public:
  std::string label() const override { return "broken"; }
  Eigen::VectorXd fit_predict(const Dataset&, const Dataset&, std::uint64_t) const override {
    throw TrainingError("always fails");
  }
};

TrialOptions quick_options() {
  TrialOptions o;
  o.evolve.hidden_width = 4;
  o.evolve.head_width = 2;
  o.evolve.generations = 2;
  o.evolve.offspring_epochs = 3;
  o.evolve.candidate.max_epochs = 3;
  o.evolve.head.max_epochs = 3;
  return o;
}

TEST(Trial, OracleScoresZeroAndFailuresAreRecorded) {
  SynthSpec spec = SynthSpec::setup_c();
  spec.n = 120;
  const LearnerSet learners{std::make_shared<OracleLearner>(), std::make_shared<FailingLearner>()};
  const TrialReport r = run_trial(spec, learners, quick_options(), 11);
  ASSERT_EQ(r.learners.size(), 2u);
  for (Arm arm : kArms) {
    ASSERT_TRUE(r.cell("oracle", arm).has_value());
    EXPECT_EQ(*r.cell("oracle", arm), 0.0);
    EXPECT_FALSE(r.cell("broken", arm).has_value());
  }
  EXPECT_EQ(r.failures.size(), 3u);
}

TEST(Trial, DeterministicGivenSeed) {
  SynthSpec spec = SynthSpec::setup_c();
  spec.n = 120;
  const LearnerSet learners = parse_learners("T-ridge,S-gbrt");
  const TrialReport a = run_trial(spec, learners, quick_options(), 3);
  const TrialReport b = run_trial(spec, learners, quick_options(), 3);
  EXPECT_EQ(a.mse, b.mse);
  const TrialReport c = run_trial(spec, learners, quick_options(), 4);
  EXPECT_NE(a.mse, c.mse);
}

TEST(Learners, ParseLabels) {
  const LearnerSet set = parse_learners("T-ridge, X-gbrt,XT-ridge");
  ASSERT_EQ(set.size(), 3u);
  EXPECT_EQ(set[0]->label(), "T-ridge");
  EXPECT_EQ(set[1]->label(), "X-gbrt");
  EXPECT_EQ(set[2]->label(), "XT-ridge");
  EXPECT_THROW(parse_learners("T"), ConfigError);
  EXPECT_THROW(parse_learners("Q-ridge"), ConfigError);
  EXPECT_EQ(default_learners().size(), 8u);
}

TrialReport fake_report(std::uint64_t seed, double init, double nofit, double trans) {
  TrialReport r;
  r.seed = seed;
  r.learners = {"L"};
  r.mse.push_back({init, nofit, trans});
  return r;
}

TEST(Aggregate, MeansAndPairedTests) {
  std::vector<TrialReport> reports{fake_report(1, 1.0, 1.1, 0.5), fake_report(2, 2.0, 2.0, 0.7),
                                   fake_report(3, 3.0, 2.9, 1.6)};
  reports[2].mse[0][1].reset();
  const BenchmarkTable t = aggregate(SynthSpec::setup_a(), reports);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(t.row("L", Arm::initial).mean, 2.0);
  EXPECT_DOUBLE_EQ(t.row("L", Arm::transformed).mean, 0.9333333333333333);
  EXPECT_EQ(t.row("L", Arm::no_fitness).present, 2u);
  EXPECT_EQ(t.row("L", Arm::no_fitness).pairs, 2u);
  EXPECT_FALSE(t.row("L", Arm::initial).vs_initial.has_value());
  const auto& test = *t.row("L", Arm::transformed).vs_initial;
  // differences -0.5, -1.3, -1.4: mean -16/15, sd sqrt(0.2433...)
  const double mean = -3.2 / 3.0;
  const double var = ((-0.5 - mean) * (-0.5 - mean) + (-1.3 - mean) * (-1.3 - mean) + (-1.4 - mean) * (-1.4 - mean)) / 2.0;
  EXPECT_NEAR(test.t, mean / std::sqrt(var / 3.0), 1e-12);
}

TEST(Aggregate, TrialOrderDoesNotChangeSummaries) {
  std::vector<TrialReport> reports{fake_report(1, 1.0, 1.1, 0.5), fake_report(2, 2.0, 2.0, 0.7),
                                   fake_report(3, 3.0, 2.9, 1.6)};
  const BenchmarkTable a = aggregate(SynthSpec::setup_a(), reports);
  std::swap(reports[0], reports[2]);
  const BenchmarkTable b = aggregate(SynthSpec::setup_a(), reports);
  for (Arm arm : kArms) {
    EXPECT_NEAR(a.row("L", arm).mean, b.row("L", arm).mean, 1e-15);
    if (arm != Arm::initial) {
      EXPECT_NEAR(a.row("L", arm).vs_initial->p, b.row("L", arm).vs_initial->p, 1e-15);
    }
  }
}

TEST(Benchmark, JobsDoNotChangeTheTable) {
  SynthSpec spec = SynthSpec::setup_c();
  spec.n = 100;
  const LearnerSet learners = parse_learners("T-ridge");
  const BenchmarkTable one = run_benchmark(spec, learners, quick_options(), 3, 7, 1);
  const BenchmarkTable two = run_benchmark(spec, learners, quick_options(), 3, 7, 2);
  std::ostringstream a, b;
  one.write_csv(a);
  two.write_csv(b);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(one.trial_seeds, (std::vector<std::uint64_t>{8, 9, 10}));
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "learner,arm,trial_1,trial_2,trial_3,mean,present,pairs,t,p");
  EXPECT_THROW(run_benchmark(spec, learners, quick_options(), 1, 7, 1), ConfigError);
}

TEST(Bins, TenRowsGiveFiveBinsOfTwo) {
  Eigen::VectorXd tau_hat = Eigen::VectorXd::Constant(10, 0.3);
  Eigen::VectorXi w(10);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    w[i] = i % 2;
    y[i] = i;
  }
  const BinReport r = quintile_calibration(tau_hat, w, y);
  ASSERT_EQ(r.bins.size(), 5u);
  for (std::size_t b = 0; b < 5; ++b) {
    EXPECT_EQ(r.bins[b].count, 2u);
    EXPECT_EQ(r.bins[b].treated, 1u);
    EXPECT_DOUBLE_EQ(*r.bins[b].realized, 1.0);
    EXPECT_FALSE(r.bins[b].realized_se.has_value());
  }
  // Constant predictions fall back to row order.
  EXPECT_EQ(r.bin_of, (std::vector<std::size_t>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4}));
  EXPECT_TRUE(r.all_defined());
}

TEST(Bins, SortedByPredictionWithRemainderLow) {
  Eigen::VectorXd tau_hat(7);
  tau_hat << 0.7, 0.1, 0.5, 0.3, 0.6, 0.2, 0.4;
  const Eigen::VectorXi w = Eigen::VectorXi::Ones(7);
  const BinReport r = quintile_calibration(tau_hat, w, Eigen::VectorXd::Zero(7), 3);
  EXPECT_EQ(r.bins[0].count, 3u);
  EXPECT_EQ(r.bins[1].count, 2u);
  EXPECT_EQ(r.bins[2].count, 2u);
  EXPECT_DOUBLE_EQ(r.bins[0].lower, 0.1);
  EXPECT_DOUBLE_EQ(r.bins[0].upper, 0.3);
  EXPECT_DOUBLE_EQ(r.bins[2].upper, 0.7);
  EXPECT_NEAR(r.bins[1].mean_predicted, 0.45, 1e-15);
  EXPECT_FALSE(r.bins[0].realized.has_value());  // no control rows
  EXPECT_FALSE(r.all_defined());
  EXPECT_THROW(rms_bin_discrepancy(r), ConfigError);
  EXPECT_THROW(quintile_calibration(tau_hat.head(2), w.head(2), Eigen::VectorXd::Zero(2), 3), ConfigError);
}

TEST(Bins, WelchStandardError) {
  Eigen::VectorXd tau_hat = Eigen::VectorXd::Zero(6);
  Eigen::VectorXi w(6);
  w << 1, 1, 1, 0, 0, 0;
  Eigen::VectorXd y(6);
  y << 1.0, 2.0, 3.0, 0.0, 0.0, 3.0;
  const BinReport r = quintile_calibration(tau_hat, w, y, 1);
  EXPECT_DOUBLE_EQ(*r.bins[0].realized, 1.0);
  EXPECT_NEAR(*r.bins[0].realized_se, std::sqrt(1.0 / 3.0 + 3.0 / 3.0), 1e-12);
}

TEST(Bins, RmsDiscrepancy) {
  BinReport one;
  Bin b;
  b.mean_predicted = 2.0;
  b.realized = 5.0;
  one.bins.push_back(b);
  EXPECT_DOUBLE_EQ(rms_bin_discrepancy(one), 3.0);

  BinReport many;
  for (double d : {1.0, -2.0, 0.5, 4.0}) {
    Bin bin;
    bin.mean_predicted = d;
    bin.realized = 0.0;
    many.bins.push_back(bin);
  }
  const double rms = rms_bin_discrepancy(many);
  EXPECT_NEAR(rms, std::sqrt((1.0 + 4.0 + 0.25 + 16.0) / 4.0), 1e-15);
  std::reverse(many.bins.begin(), many.bins.end());
  EXPECT_DOUBLE_EQ(rms_bin_discrepancy(many), rms);
}

TEST(Bins, CsvHeader) {
  Eigen::VectorXi w(4);
  w << 0, 1, 0, 1;
  const BinReport r = quintile_calibration(Eigen::VectorXd::Zero(4), w, Eigen::VectorXd::Zero(4), 2);
  std::ostringstream out;
  r.write_csv(out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
            "bin,count,treated,control,lower,upper,mean_predicted,realized,realized_se");
}

TEST(Metrics, MeanSquaredError) {
  Eigen::VectorXd a(3), b(3);
  a << 1.0, 2.0, 3.0;
  b << 1.0, 0.0, 6.0;
  EXPECT_DOUBLE_EQ(mean_squared_error(a, b), 13.0 / 3.0);
  EXPECT_THROW(mean_squared_error(a, b.head(2)), DimensionError);
}

}  // namespace
}  // namespace evorep

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "evorep/dataset.hpp"
#include "evorep/metalearners.hpp"
#include "evorep/neuroevolution.hpp"
#include "evorep/stats.hpp"

namespace evorep {

// ---------------------------------------------------------------------------
// Synthetic setups

enum class Setup { a, c };

std::string_view to_string(Setup setup) noexcept;
Setup parse_setup(std::string_view name);

struct SynthSpec {
  Setup setup = Setup::a;
  Eigen::Index d = 24;
  Eigen::Index n = 200;
  double sigma = 1.0;

  void validate() const;
  static SynthSpec setup_a() { return {Setup::a, 24, 200, 1.0}; }
  static SynthSpec setup_c() { return {Setup::c, 12, 500, 1.0}; }
};

// Setup A: X ~ U[0,1]^d.
double setup_a_propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x);
double setup_a_baseline(const Eigen::Ref<const Eigen::RowVectorXd>& x);
double setup_a_cate(const Eigen::Ref<const Eigen::RowVectorXd>& x);
// Setup C: X ~ N(0, I_d).
double setup_c_propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x);
double setup_c_baseline(const Eigen::Ref<const Eigen::RowVectorXd>& x);
double setup_c_cate(const Eigen::Ref<const Eigen::RowVectorXd>& x);

/// Y | X, W ~ N(b(X) + (W - 1/2) tau(X), sigma^2) with W ~ Bernoulli(e(X)).
/// Features, treatments and noise draw from independent substreams of `seed`.
Dataset gen_setup_a(const SynthSpec& spec, std::uint64_t seed);
Dataset gen_setup_c(const SynthSpec& spec, std::uint64_t seed);
Dataset generate(const SynthSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Ablation harness

enum class Arm : std::size_t { initial = 0, no_fitness = 1, transformed = 2 };
inline constexpr std::array<Arm, 3> kArms{Arm::initial, Arm::no_fitness, Arm::transformed};

std::string_view to_string(Arm arm) noexcept;

/// Anything that turns a fitting set into CATE predictions on a test set.
class TrialLearner {
 public:
  virtual ~TrialLearner() = default;
  virtual std::string label() const = 0;
  /// `fit` and `test` share a feature space; `test` carries no outcome
  /// information the learner is allowed to use.
  virtual Eigen::VectorXd fit_predict(const Dataset& fit, const Dataset& test, std::uint64_t seed) const = 0;
};

class MetaTrialLearner final : public TrialLearner {
 public:
  MetaTrialLearner(LearnerKind kind, BaseKind base) : kind_(kind), base_(base) {}
  std::string label() const override;
  Eigen::VectorXd fit_predict(const Dataset& fit, const Dataset& test, std::uint64_t seed) const override;

 private:
  LearnerKind kind_;
  BaseKind base_;
};

using LearnerSet = std::vector<std::shared_ptr<const TrialLearner>>;

/// Parses "T-ridge,X-gbrt,..." style labels.
LearnerSet parse_learners(std::string_view list);
/// S, T, X and R over both bases.
LearnerSet default_learners();

struct TrialReport {
  std::uint64_t seed = 0;
  std::vector<std::string> learners;
  /// mse[learner][arm]; empty when the fit failed.
  std::vector<std::array<std::optional<double>, 3>> mse;
  std::vector<std::string> failures;

  std::optional<double> cell(std::string_view learner, Arm arm) const;
};

struct TrialOptions {
  SplitSpec split;  // seed is overridden per trial
  EvolveConfig evolve;  // seed is overridden per trial
};

/// One simulated dataset, one 70/15/15 split shared by all arms and learners.
/// Features are standardized with training-set moments; the initial arm uses
/// them directly and the feature maps are evolved on them. Learners fit on
/// train + valid and are scored by MSE against the true CATE on test.
TrialReport run_trial(const SynthSpec& spec, const LearnerSet& learners, const TrialOptions& options,
                      std::uint64_t trial_seed);

struct BenchmarkRow {
  std::string learner;
  Arm arm = Arm::initial;
  std::vector<std::optional<double>> mse;  // one per trial
  double mean = 0.0;   // over present trials
  std::size_t present = 0;
  /// Paired test against the initial arm over trials where both are present.
  std::optional<stats::TTestResult> vs_initial;
  std::size_t pairs = 0;
};

struct BenchmarkTable {
  SynthSpec spec;
  std::vector<std::uint64_t> trial_seeds;
  std::vector<BenchmarkRow> rows;  // learner-major, arms in kArms order

  const BenchmarkRow& row(std::string_view learner, Arm arm) const;

  /// learner,arm,trial_1..trial_T,mean,present,pairs,t,p
  void write_csv(std::ostream& out) const;
  /// Human-readable table: first three and last three trials plus averages.
  void write_summary(std::ostream& out) const;
};

BenchmarkTable aggregate(const SynthSpec& spec, const std::vector<TrialReport>& reports);

/// Trials use seeds master+1 .. master+trials and run on `jobs` threads; the
/// table does not depend on `jobs`.
BenchmarkTable run_benchmark(const SynthSpec& spec, const LearnerSet& learners, const TrialOptions& options,
                             std::size_t trials, std::uint64_t master_seed, std::size_t jobs = 1);

// ---------------------------------------------------------------------------
// Calibration by predicted-effect bins

struct Bin {
  std::size_t count = 0;
  std::size_t treated = 0;
  std::size_t control = 0;
  double lower = 0.0;  // smallest predicted effect in the bin
  double upper = 0.0;  // largest predicted effect in the bin
  double mean_predicted = 0.0;
  /// Mean treated outcome minus mean control outcome; empty when an arm is missing.
  std::optional<double> realized;
  /// Standard error of `realized` (Welch); empty when either arm has < 2 rows.
  std::optional<double> realized_se;
};

struct BinReport {
  std::vector<Bin> bins;
  std::vector<std::size_t> bin_of;  // per input row
  bool all_defined() const noexcept;
  /// bin,count,treated,control,lower,upper,mean_predicted,realized,realized_se
  void write_csv(std::ostream& out) const;
};

/// Equal-count bins over rows sorted by predicted effect (ties by row
/// index); remainder rows go one each to the lowest bins.
BinReport quintile_calibration(const Eigen::VectorXd& tau_hat, const Eigen::VectorXi& w, const Eigen::VectorXd& y,
                               std::size_t bins = 5);

/// sqrt(mean over bins of (mean_predicted - realized)^2). Throws ConfigError
/// when a bin's realized effect is undefined.
double rms_bin_discrepancy(const BinReport& report);

double mean_squared_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

}  // namespace evorep

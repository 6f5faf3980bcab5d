// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "evorep/synthbench.hpp"

namespace {

namespace fs = std::filesystem;
using namespace evorep;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

BenchmarkTable run_setup(const SynthSpec& spec, std::size_t generations, std::size_t trials, const fs::path& out_dir,
                         const std::string& name) {
  TrialOptions options;
  options.evolve.generations = generations;
  const BenchmarkTable table = run_benchmark(spec, default_learners(), options, trials, 0, worker_count());
  std::ofstream csv(out_dir / (name + ".csv"));
  table.write_csv(csv);
  std::cout << "== " << name << " (" << trials << " trials, g=" << generations << ")\n";
  table.write_summary(std::cout);
  std::cout << '\n';
  return table;
}

Outcome ratio_and_significance(const BenchmarkTable& t, const std::string& learner) {
  const auto& init = t.row(learner, Arm::initial);
  const auto& trans = t.row(learner, Arm::transformed);
  const double ratio = trans.mean / init.mean;
  const double p = trans.vs_initial ? trans.vs_initial->p : 1.0;
  const bool complete = init.present == t.trial_seeds.size() && trans.present == t.trial_seeds.size();
  return {complete && ratio <= 0.8 && p < 0.05,
          learner + " transformed " + fmt(trans.mean) + " vs initial " + fmt(init.mean) + ", ratio " + fmt(ratio) +
              ", p " + fmt(p) + (complete ? "" : ", missing trials")};
}

Outcome strict_improvement(const BenchmarkTable& t, const std::vector<std::string>& learners) {
  Outcome o{true, ""};
  for (const auto& l : learners) {
    const double a = t.row(l, Arm::initial).mean;
    const double b = t.row(l, Arm::transformed).mean;
    o.pass = o.pass && b < a;
    o.detail += (o.detail.empty() ? "" : "; ") + l + " " + fmt(b) + " vs " + fmt(a);
  }
  return o;
}

Outcome direction_only(const BenchmarkTable& a, const BenchmarkTable& c) {
  const std::vector<std::string> learners{"S-gbrt", "T-gbrt", "X-gbrt", "R-ridge", "R-gbrt"};
  Outcome o{true, ""};
  std::string failures;
  for (const auto& l : learners) {
    const double ca = c.row(l, Arm::initial).mean;
    const double ct = c.row(l, Arm::transformed).mean;
    if (!(ct <= 1.1 * ca)) {
      o.pass = false;
      failures += " C:" + l + " " + fmt(ct) + " > 1.1 x " + fmt(ca);
    }
    const double aa = a.row(l, Arm::initial).mean;
    const double at = a.row(l, Arm::transformed).mean;
    if (!(at < aa)) {
      o.pass = false;
      failures += " A:" + l + " " + fmt(at) + " >= " + fmt(aa);
    }
  }
  o.detail = o.pass ? "all tree and R arms within bounds" : "violations:" + failures;
  return o;
}

Outcome oracle_calibration() {
  SynthSpec spec = SynthSpec::setup_a();
  spec.n = 2000;
  const Dataset data = generate(spec, 0);
  const Eigen::VectorXd& tau = *data.true_cate();
  const BinReport oracle = quintile_calibration(tau, data.treatment(), data.outcome());
  const BinReport constant =
      quintile_calibration(Eigen::VectorXd::Constant(tau.size(), tau.mean()), data.treatment(), data.outcome());
  if (!oracle.all_defined() || !constant.all_defined()) return {false, "a bin lacks treated or control rows"};

  bool within = true;
  double worst = 0.0;
  for (const auto& bin : oracle.bins) {
    if (!bin.realized_se) return {false, "a bin has too few rows for a standard error"};
    const double z = std::abs(*bin.realized - bin.mean_predicted) / *bin.realized_se;
    worst = std::max(worst, z);
    within = within && z <= 3.0;
  }
  const double rms_oracle = rms_bin_discrepancy(oracle);
  const double rms_constant = rms_bin_discrepancy(constant);
  return {within && rms_oracle <= rms_constant,
          "max |realized - predicted| / se " + fmt(worst) + ", rms oracle " + fmt(rms_oracle) + " vs constant " +
              fmt(rms_constant)};
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome properties(const std::string& unit_tests, const std::string& cli, const fs::path& out_dir) {
  const std::string filter =
      "Backprop.*FiniteDifferences:CrossHiddenLayers.RowsComeJointlyFromOneParent:"
      "EvolveFixture.CrossoverReplaysCoinsAndFreezesHiddenLayer:EvolveFixture.CohortComposition*:"
      "Generators.*Moments*:PairedTTest.MatchesSeriesOracleOnRandomCases:StudentT.MatchesSeriesOracleAcrossDf:"
      "Ridge.MatchesNormalEquations:MetaLearners.RecoverNoiselessLinearEffects";
  const std::string log = (out_dir / "property_suites.log").string();
  const int suites = std::system((quote(unit_tests) + " --gtest_filter=" + quote(filter) + " > " + quote(log) + " 2>&1").c_str());

  bool same = true;
  for (int run = 1; run <= 2; ++run) {
    const std::string csv = (out_dir / ("determinism_" + std::to_string(run) + ".csv")).string();
    const std::string cmd = quote(cli) +
                            " bench --setup A --trials 3 --learners T-ridge,X-gbrt --seed 0 --out " + quote(csv) +
                            " --summary " + quote((out_dir / "determinism.txt").string()) + " > /dev/null 2>&1";
    same = same && std::system(cmd.c_str()) == 0;
  }
  const std::string first = slurp(out_dir / "determinism_1.csv");
  same = same && !first.empty() && first == slurp(out_dir / "determinism_2.csv");
  return {suites == 0 && same, std::string("property suites ") + (suites == 0 ? "passed" : "FAILED (see " + log + ")") +
                                   ", bench CSV bytes " + (same ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string cli;
  std::string unit_tests;
  std::string out_dir = "acceptance_out";
  app.add_option("--cli", cli, "evorep executable")->required();
  app.add_option("--unit-tests", unit_tests, "Unit test executable")->required();
  app.add_option("--out-dir", out_dir, "Where tables and logs go");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out_dir);

  std::vector<Outcome> results(6);
  try {
    const BenchmarkTable a = run_setup(SynthSpec::setup_a(), 5, 20, out_dir, "setup_a");
    const BenchmarkTable c = run_setup(SynthSpec::setup_c(), 2, 30, out_dir, "setup_c");
    results[0] = ratio_and_significance(a, "T-ridge");
    results[1] = ratio_and_significance(a, "X-ridge");
    results[2] = strict_improvement(c, {"T-ridge", "X-ridge"});
    results[3] = direction_only(a, c);
    results[4] = oracle_calibration();
    results[5] = properties(unit_tests, cli, out_dir);
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << '\n';
    return 1;
  }

  bool all = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::cout << "criterion " << i + 1 << ": " << (results[i].pass ? "PASS" : "FAIL") << "  " << results[i].detail
              << '\n';
    all = all && results[i].pass;
  }
  return all ? 0 : 1;
}

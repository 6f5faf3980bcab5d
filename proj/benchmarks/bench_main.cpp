#include <random>

#include <benchmark/benchmark.h>

#include "evorep/neuralnet.hpp"
#include "evorep/neuroevolution.hpp"
#include "evorep/regressors.hpp"
#include "evorep/stats.hpp"
#include "evorep/synthbench.hpp"

namespace {

using namespace evorep;

Eigen::MatrixXd gaussian(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return x;
}

void BM_ForwardOutcome(benchmark::State& state) {
  Rng rng(1);
  OutcomeNetParams p = OutcomeNetParams::zeros(24, state.range(0));
  p.m1 = glorot_init(p.hidden_dim(), 24, rng);
  const Eigen::MatrixXd x = gaussian(256, 24, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward_outcome_rows(p, x));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_ForwardOutcome)->Arg(20)->Arg(100);

void BM_BackpropOutcome(benchmark::State& state) {
  Rng rng(1);
  OutcomeNetParams p = OutcomeNetParams::zeros(24, state.range(0));
  p.m1 = glorot_init(p.hidden_dim(), 24, rng);
  const Eigen::MatrixXd x = gaussian(32, 24, 3);
  const Eigen::VectorXd y = gaussian(32, 1, 4).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(backprop_outcome(p, x, y, Eigen::MatrixXd{}, 1e-4));
}
BENCHMARK(BM_BackpropOutcome)->Arg(20)->Arg(100);

void BM_GbrtFit(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian(state.range(0), 12, 5);
  const Eigen::VectorXd y = x.col(0).array().sin() + x.col(1).array();
  for (auto _ : state) benchmark::DoNotOptimize(fit_gbrt(x, y, GbrtOptions{}));
}
BENCHMARK(BM_GbrtFit)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_RidgeCv(benchmark::State& state) {
  const Eigen::MatrixXd x = gaussian(state.range(0), 24, 6);
  const Eigen::VectorXd y = x.col(0) + 0.1 * gaussian(state.range(0), 1, 7).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(fit_ridge_cv(x, y, RidgeOptions{}));
}
BENCHMARK(BM_RidgeCv)->Arg(200)->Arg(1000);

void BM_IncompleteBeta(benchmark::State& state) {
  double x = 0.01;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::incomplete_beta(9.5, 0.5, x));
    x = x < 0.98 ? x + 0.01 : 0.01;
  }
}
BENCHMARK(BM_IncompleteBeta);

void BM_EvolveSmall(benchmark::State& state) {
  const Dataset data = generate(SynthSpec::setup_a(), 1);
  const DataSplit parts = split(data, SplitSpec{});
  EvolveConfig config;
  config.candidate.max_epochs = 20;
  config.head.max_epochs = 20;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(parts.train, parts.valid, config));
}
BENCHMARK(BM_EvolveSmall)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
BENCHMARK_MAIN();

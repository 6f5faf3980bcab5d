#include "evorep/synthbench.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "evorep/errors.hpp"
#include "evorep/random.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

std::string_view to_string(Setup setup) noexcept { return setup == Setup::a ? "A" : "C"; }

Setup parse_setup(std::string_view name) {
  if (name == "a" || name == "A") return Setup::a;
  if (name == "c" || name == "C") return Setup::c;
  throw ConfigError("unknown setup '" + std::string(name) + "' (expected A or C)");
}

void SynthSpec::validate() const {
  if (setup == Setup::a && d < 5) throw ConfigError("setup A needs d >= 5");
  if (setup == Setup::c && d < 3) throw ConfigError("setup C needs d >= 3");
  if (n < 10) throw ConfigError("synthetic data needs n >= 10");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("noise sd must be finite and non-negative");
}

double setup_a_propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return std::max(0.1, std::min(std::sin(std::numbers::pi * x[0] * x[1]), 0.9));
}

double setup_a_baseline(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double centered = x[2] - 0.5;
  return std::sin(std::numbers::pi * x[0] * x[1]) + 2.0 * centered * centered + x[3] + 0.5 * x[4];
}

double setup_a_cate(const Eigen::Ref<const Eigen::RowVectorXd>& x) { return (x[0] + x[1]) / 2.0; }

double setup_c_propensity(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return 1.0 / (1.0 + std::exp(x[1] + x[2]));
}

double setup_c_baseline(const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double s = x[0] + x[1] + x[2];
  // log(1 + e^s) without overflow for large s.
  const double softplus = s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s));
  return 2.0 * softplus;
}

double setup_c_cate(const Eigen::Ref<const Eigen::RowVectorXd>&) { return 1.0; }

namespace {

template <class FeatureDraw, class Propensity, class Baseline, class Cate>
Dataset simulate(const SynthSpec& spec, std::uint64_t seed, FeatureDraw draw, Propensity e, Baseline b, Cate tau) {
  spec.validate();
  Rng feature_rng(derive_seed(seed, hash_label("features")));
  Rng treatment_rng(derive_seed(seed, hash_label("treatment")));
  Rng noise_rng(derive_seed(seed, hash_label("noise")));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  Eigen::MatrixXd x(spec.n, spec.d);
  for (Eigen::Index i = 0; i < spec.n; ++i)
    for (Eigen::Index j = 0; j < spec.d; ++j) x(i, j) = draw(feature_rng);

  Eigen::VectorXi w(spec.n);
  Eigen::VectorXd y(spec.n);
  Eigen::VectorXd truth(spec.n);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const auto row = x.row(i);
    w[i] = unit(treatment_rng) < e(row) ? 1 : 0;
    truth[i] = tau(row);
    y[i] = b(row) + (w[i] - 0.5) * truth[i] + spec.sigma * noise(noise_rng);
  }
  return Dataset(std::move(x), std::move(w), std::move(y), std::move(truth));
}

}  // namespace

Dataset gen_setup_a(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.setup != Setup::a) throw ConfigError("gen_setup_a called with a non-A spec");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return simulate(spec, seed, [&](Rng& rng) { return unit(rng); }, setup_a_propensity, setup_a_baseline, setup_a_cate);
}

Dataset gen_setup_c(const SynthSpec& spec, std::uint64_t seed) {
  if (spec.setup != Setup::c) throw ConfigError("gen_setup_c called with a non-C spec");
  std::normal_distribution<double> normal(0.0, 1.0);
  return simulate(spec, seed, [&](Rng& rng) { return normal(rng); }, setup_c_propensity, setup_c_baseline, setup_c_cate);
}

Dataset generate(const SynthSpec& spec, std::uint64_t seed) {
  return spec.setup == Setup::a ? gen_setup_a(spec, seed) : gen_setup_c(spec, seed);
}

// ---------------------------------------------------------------------------
// Learners

std::string_view to_string(Arm arm) noexcept {
  switch (arm) {
    case Arm::initial: return "initial";
    case Arm::no_fitness: return "no_fitness";
    case Arm::transformed: return "transformed";
  }
  return "initial";
}

std::string MetaTrialLearner::label() const {
  return std::string(to_string(kind_)) + "-" + std::string(to_string(base_));
}

Eigen::VectorXd MetaTrialLearner::fit_predict(const Dataset& fit, const Dataset& test, std::uint64_t seed) const {
  const auto base = make_base_learner(base_);
  MetaOptions options;
  options.seed = seed;
  return fit_cate(kind_, fit, *base, options).predict_cate(test.features());
}

LearnerSet parse_learners(std::string_view list) {
  LearnerSet out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (!item.empty()) {
      const auto dash = item.find('-');
      if (dash == std::string_view::npos) {
        throw ConfigError("learner '" + std::string(item) + "' must look like KIND-BASE, e.g. T-ridge");
      }
      out.push_back(std::make_shared<MetaTrialLearner>(parse_learner_kind(item.substr(0, dash)),
                                                       parse_base_kind(item.substr(dash + 1))));
    }
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("no learners selected");
  return out;
}

LearnerSet default_learners() { return parse_learners("S-ridge,T-ridge,X-ridge,R-ridge,S-gbrt,T-gbrt,X-gbrt,R-gbrt"); }

std::optional<double> TrialReport::cell(std::string_view learner, Arm arm) const {
  for (std::size_t i = 0; i < learners.size(); ++i)
    if (learners[i] == learner) return mse[i][static_cast<std::size_t>(arm)];
  throw ConfigError("trial report has no learner '" + std::string(learner) + "'");
}

double mean_squared_error(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.size() != truth.size() || truth.size() == 0) throw DimensionError("mean_squared_error: size mismatch");
  return (predicted - truth).squaredNorm() / static_cast<double>(truth.size());
}

TrialReport run_trial(const SynthSpec& spec, const LearnerSet& learners, const TrialOptions& options,
                      std::uint64_t trial_seed) {
  TrialReport report;
  report.seed = trial_seed;
  for (const auto& l : learners) report.learners.push_back(l->label());
  report.mse.resize(learners.size());

  const Dataset data = generate(spec, derive_seed(trial_seed, hash_label("data")));
  SplitSpec split_spec = options.split;
  split_spec.seed = derive_seed(trial_seed, hash_label("split"));
  const DataSplit parts = split(data, split_spec);

  const Standardizer standardizer = Standardizer::fit(parts.train);
  const Dataset train_std = standardizer.transform(parts.train);
  const Dataset valid_std = standardizer.transform(parts.valid);
  EvolveConfig evolve_config = options.evolve;
  evolve_config.seed = derive_seed(trial_seed, hash_label("evolve"));

  std::array<std::optional<RepresentationMap>, 3> maps;
  try {
    maps[static_cast<std::size_t>(Arm::no_fitness)] =
        no_fitness_baseline(train_std, valid_std, evolve_config)
            .compose_standardization(standardizer.mean(), standardizer.scale());
  } catch (const Error& e) {
    report.failures.push_back(std::string("no_fitness: ") + e.what());
  }
  try {
    maps[static_cast<std::size_t>(Arm::transformed)] =
        evolve(train_std, valid_std, evolve_config).map.compose_standardization(standardizer.mean(), standardizer.scale());
  } catch (const Error& e) {
    report.failures.push_back(std::string("transformed: ") + e.what());
  }

  const Dataset fit_set = Dataset::concat(parts.train, parts.valid);
  const Eigen::VectorXd& truth = *parts.test.true_cate();
  for (Arm arm : kArms) {
    const auto a = static_cast<std::size_t>(arm);
    if (arm != Arm::initial && !maps[a]) continue;
    // The initial arm sees the same train-fitted standardization the maps fold in.
    const Dataset fit_arm =
        arm == Arm::initial ? standardizer.transform(fit_set) : apply_representation(fit_set, *maps[a]);
    const Dataset test_arm =
        arm == Arm::initial ? standardizer.transform(parts.test) : apply_representation(parts.test, *maps[a]);
    for (std::size_t li = 0; li < learners.size(); ++li) {
      const std::uint64_t seed = derive_seed(trial_seed, hash_label("learner"), hash_label(report.learners[li]));
      try {
        const double mse = mean_squared_error(learners[li]->fit_predict(fit_arm, test_arm, seed), truth);
        if (std::isfinite(mse)) {
          report.mse[li][a] = mse;
        } else {
          report.failures.push_back(report.learners[li] + "/" + std::string(to_string(arm)) + ": non-finite MSE");
        }
      } catch (const Error& e) {
        report.failures.push_back(report.learners[li] + "/" + std::string(to_string(arm)) + ": " + e.what());
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Aggregation

const BenchmarkRow& BenchmarkTable::row(std::string_view learner, Arm arm) const {
  for (const auto& r : rows)
    if (r.learner == learner && r.arm == arm) return r;
  throw ConfigError("benchmark table has no row for '" + std::string(learner) + "'");
}

BenchmarkTable aggregate(const SynthSpec& spec, const std::vector<TrialReport>& reports) {
  BenchmarkTable table;
  table.spec = spec;
  if (reports.empty()) return table;
  for (const auto& r : reports) table.trial_seeds.push_back(r.seed);

  const auto& learners = reports.front().learners;
  for (std::size_t li = 0; li < learners.size(); ++li) {
    for (Arm arm : kArms) {
      BenchmarkRow row;
      row.learner = learners[li];
      row.arm = arm;
      double sum = 0.0;
      for (const auto& r : reports) {
        const auto cell = r.mse.at(li)[static_cast<std::size_t>(arm)];
        row.mse.push_back(cell);
        if (cell) {
          sum += *cell;
          ++row.present;
        }
      }
      row.mean = row.present > 0 ? sum / static_cast<double>(row.present)
                                 : std::numeric_limits<double>::quiet_NaN();
      if (arm != Arm::initial) {
        std::vector<double> ours;
        std::vector<double> base;
        for (const auto& r : reports) {
          const auto& cells = r.mse.at(li);
          const auto mine = cells[static_cast<std::size_t>(arm)];
          const auto init = cells[static_cast<std::size_t>(Arm::initial)];
          if (mine && init) {
            ours.push_back(*mine);
            base.push_back(*init);
          }
        }
        row.pairs = ours.size();
        if (row.pairs >= 2) row.vs_initial = stats::paired_t_test(ours, base);
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

BenchmarkTable run_benchmark(const SynthSpec& spec, const LearnerSet& learners, const TrialOptions& options,
                             std::size_t trials, std::uint64_t master_seed, std::size_t jobs) {
  spec.validate();
  options.evolve.validate();
  options.split.validate();
  if (trials < 2) throw ConfigError("a benchmark needs at least two trials");
  if (learners.empty()) throw ConfigError("no learners selected");

  std::vector<TrialReport> reports(trials);
  std::vector<std::exception_ptr> errors(trials);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t t = next++; t < trials; t = next++) {
      try {
        reports[t] = run_trial(spec, learners, options, master_seed + 1 + t);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::min(jobs, trials); ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return aggregate(spec, reports);
}

void BenchmarkTable::write_csv(std::ostream& out) const {
  out << "learner,arm";
  for (std::size_t t = 0; t < trial_seeds.size(); ++t) out << ",trial_" << (t + 1);
  out << ",mean,present,pairs,t,p\n";
  for (const auto& r : rows) {
    out << r.learner << ',' << to_string(r.arm);
    for (const auto& v : r.mse) {
      out << ',';
      if (v) out << format_double(*v);
    }
    out << ',' << (r.present > 0 ? format_double(r.mean) : "") << ',' << r.present << ',' << r.pairs << ',';
    if (r.vs_initial) out << format_double(r.vs_initial->t) << ',' << format_double(r.vs_initial->p);
    else out << ',';
    out << '\n';
  }
}

void BenchmarkTable::write_summary(std::ostream& out) const {
  const std::size_t trials = trial_seeds.size();
  std::vector<std::size_t> shown;
  if (trials <= 6) {
    for (std::size_t t = 0; t < trials; ++t) shown.push_back(t);
  } else {
    shown = {0, 1, 2, trials - 3, trials - 2, trials - 1};
  }
  out << "MSE over " << trials << " trials, setup " << to_string(spec.setup) << " (n=" << spec.n << ", d=" << spec.d
      << ", sigma=" << spec.sigma << ")\n";
  std::ostringstream header;
  header << std::left << std::setw(12) << "learner" << std::setw(13) << "features";
  for (std::size_t k = 0; k < shown.size(); ++k) {
    if (trials > 6 && k == 3) header << std::setw(8) << "...";
    header << std::setw(8) << ("tr." + std::to_string(shown[k] + 1));
  }
  header << std::setw(8) << "avg." << "p vs initial";
  out << header.str() << '\n';
  const auto fmt = [](std::optional<double> v) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << *v;
    return s.str();
  };
  std::string last_learner;
  for (const auto& r : rows) {
    out << std::left << std::setw(12) << (r.learner == last_learner ? "" : r.learner) << std::setw(13)
        << to_string(r.arm);
    last_learner = r.learner;
    for (std::size_t k = 0; k < shown.size(); ++k) {
      if (trials > 6 && k == 3) out << std::setw(8) << "...";
      out << std::setw(8) << fmt(r.mse[shown[k]]);
    }
    out << std::setw(8) << fmt(r.present > 0 ? std::optional<double>(r.mean) : std::nullopt);
    if (r.vs_initial) {
      std::ostringstream p;
      p << std::setprecision(3) << r.vs_initial->p;
      out << p.str();
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Calibration

bool BinReport::all_defined() const noexcept {
  return std::all_of(bins.begin(), bins.end(), [](const Bin& b) { return b.realized.has_value(); });
}

void BinReport::write_csv(std::ostream& out) const {
  out << "bin,count,treated,control,lower,upper,mean_predicted,realized,realized_se\n";
  for (std::size_t b = 0; b < bins.size(); ++b) {
    const Bin& bin = bins[b];
    out << (b + 1) << ',' << bin.count << ',' << bin.treated << ',' << bin.control << ',' << format_double(bin.lower)
        << ',' << format_double(bin.upper) << ',' << format_double(bin.mean_predicted) << ',';
    if (bin.realized) out << format_double(*bin.realized);
    out << ',';
    if (bin.realized_se) out << format_double(*bin.realized_se);
    out << '\n';
  }
}

BinReport quintile_calibration(const Eigen::VectorXd& tau_hat, const Eigen::VectorXi& w, const Eigen::VectorXd& y,
                               std::size_t bins) {
  const auto n = static_cast<std::size_t>(tau_hat.size());
  if (static_cast<std::size_t>(w.size()) != n || static_cast<std::size_t>(y.size()) != n) {
    throw DimensionError("quintile_calibration: input lengths differ");
  }
  if (bins < 1) throw ConfigError("quintile_calibration: need at least one bin");
  if (n < bins) throw ConfigError("quintile_calibration: fewer rows than bins");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tau_hat[static_cast<Eigen::Index>(a)] < tau_hat[static_cast<Eigen::Index>(b)];
  });

  BinReport report;
  report.bins.resize(bins);
  report.bin_of.assign(n, 0);
  const std::size_t base = n / bins;
  const std::size_t extra = n % bins;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    Bin& bin = report.bins[b];
    bin.count = size;
    std::vector<double> treated_y;
    std::vector<double> control_y;
    double sum_pred = 0.0;
    bin.lower = tau_hat[static_cast<Eigen::Index>(order[pos])];
    bin.upper = tau_hat[static_cast<Eigen::Index>(order[pos + size - 1])];
    for (std::size_t k = pos; k < pos + size; ++k) {
      const auto i = static_cast<Eigen::Index>(order[k]);
      report.bin_of[order[k]] = b;
      sum_pred += tau_hat[i];
      (w[i] == 1 ? treated_y : control_y).push_back(y[i]);
    }
    pos += size;
    bin.mean_predicted = sum_pred / static_cast<double>(size);
    bin.treated = treated_y.size();
    bin.control = control_y.size();
    if (!treated_y.empty() && !control_y.empty()) {
      bin.realized = stats::mean(treated_y) - stats::mean(control_y);
      if (treated_y.size() >= 2 && control_y.size() >= 2) {
        bin.realized_se = std::sqrt(stats::sample_variance(treated_y) / static_cast<double>(treated_y.size()) +
                                    stats::sample_variance(control_y) / static_cast<double>(control_y.size()));
      }
    }
  }
  return report;
}

double rms_bin_discrepancy(const BinReport& report) {
  if (report.bins.empty()) throw ConfigError("rms_bin_discrepancy: no bins");
  double ss = 0.0;
  for (const auto& bin : report.bins) {
    if (!bin.realized) throw ConfigError("rms_bin_discrepancy: a bin lacks treated or control rows");
    const double diff = bin.mean_predicted - *bin.realized;
    ss += diff * diff;
  }
  return std::sqrt(ss / static_cast<double>(report.bins.size()));
}

}  // namespace evorep

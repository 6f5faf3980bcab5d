#include "evorep/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "evorep/dataset.hpp"
#include "evorep/errors.hpp"
#include "evorep/metalearners.hpp"
#include "evorep/neuroevolution.hpp"
#include "evorep/random.hpp"
#include "evorep/representation.hpp"
#include "evorep/synthbench.hpp"
#include "evorep/text_io.hpp"

namespace evorep::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown flag, missing or malformed argument)\n"
    "  3  configuration error (missing or malformed config file, invalid settings)\n"
    "  4  data error (missing file, bad CSV, invalid treatment values)\n"
    "  5  training error (non-finite loss)\n"
    "  6  dimension mismatch\n";

// Resolved settings printed before a command runs, in the config-file
// syntax accepted by --config.
class Resolved {
 public:
  explicit Resolved(std::string section) : section_(std::move(section)) {}

  void add(const std::string& key, const std::string& value) { lines_.emplace_back(key, quote(value)); }
  void add(const std::string& key, const char* value) { add(key, std::string(value)); }
  void add(const std::string& key, double value) { lines_.emplace_back(key, format_double(value)); }
  void add(const std::string& key, std::uint64_t value) { lines_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, std::size_t value, int) { lines_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, long long value) { lines_.emplace_back(key, std::to_string(value)); }
  void add(const std::string& key, const std::vector<std::string>& values) {
    std::string list = "[";
    for (std::size_t i = 0; i < values.size(); ++i) list += (i ? "," : "") + quote(values[i]);
    lines_.emplace_back(key, list + "]");
  }

  void print(std::ostream& out) const {
    out << "# resolved configuration\n[" << section_ << "]\n";
    for (const auto& [key, value] : lines_) out << key << "=" << value << '\n';
    out << std::flush;
  }

 private:
  static std::string quote(const std::string& s) { return '"' + s + '"'; }
  std::string section_;
  std::vector<std::pair<std::string, std::string>> lines_;
};

struct SchemaFlags {
  std::string treatment = "w";
  std::string outcome = "y";
  std::string true_cate = "tau";
  std::vector<std::string> features;

  CsvSchema schema() const { return CsvSchema{features, treatment, outcome, true_cate}; }

  void attach(CLI::App* app) {
    app->add_option("--treatment", treatment, "Treatment column (0/1)");
    app->add_option("--outcome", outcome, "Outcome column");
    app->add_option("--true-cate", true_cate, "True CATE column, used when present");
    app->add_option("--features", features, "Feature columns (default: all other columns)")->delimiter(',');
  }

  void report(Resolved& r) const {
    r.add("treatment", treatment);
    r.add("outcome", outcome);
    r.add("true-cate", true_cate);
    r.add("features", features);
  }
};

struct SynthFlags {
  std::string setup = "A";
  std::optional<long long> n;
  std::optional<long long> d;
  double sigma = 1.0;

  void attach(CLI::App* app) {
    app->add_option("--setup", setup, "Synthetic setup")->check(CLI::IsMember({"A", "C"}, CLI::ignore_case));
    app->add_option("--n", n, "Sample count (setup default: A 200, C 500)");
    app->add_option("--d", d, "Feature count (setup default: A 24, C 12)");
    app->add_option("--sigma", sigma, "Outcome noise sd");
  }

  SynthSpec spec() const {
    SynthSpec s = parse_setup(setup) == Setup::a ? SynthSpec::setup_a() : SynthSpec::setup_c();
    if (n) s.n = static_cast<Eigen::Index>(*n);
    if (d) s.d = static_cast<Eigen::Index>(*d);
    s.sigma = sigma;
    s.validate();
    return s;
  }

  static void report(Resolved& r, const SynthSpec& s) {
    r.add("setup", std::string(to_string(s.setup)));
    r.add("n", static_cast<long long>(s.n));
    r.add("d", static_cast<long long>(s.d));
    r.add("sigma", s.sigma);
  }
};

struct SplitFlags {
  double train = 0.70;
  double valid = 0.15;
  double test = 0.15;

  void attach(CLI::App* app) {
    app->add_option("--train-frac", train, "Training fraction");
    app->add_option("--valid-frac", valid, "Validation fraction");
    app->add_option("--test-frac", test, "Test fraction");
  }

  SplitSpec spec(std::uint64_t seed) const {
    SplitSpec s{train, valid, test, seed};
    s.validate();
    return s;
  }

  void report(Resolved& r) const {
    r.add("train-frac", train);
    r.add("valid-frac", valid);
    r.add("test-frac", test);
  }
};

struct EvolveFlags {
  std::size_t c = 4;
  std::size_t l = 2;
  std::size_t g = 5;
  long long m = 20;
  long long k = 10;
  std::size_t offspring_epochs = 30;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::size_t batch = 32;
  double lr = 1e-3;
  double dropout = 0.2;
  double l2 = 1e-4;
  std::string activation = "tanh";

  void attach(CLI::App* app) {
    app->add_option("--c", c, "Cohort size");
    app->add_option("--l", l, "Progenitors per generation");
    app->add_option("--g", g, "Generations");
    app->add_option("--m", m, "Representation width");
    app->add_option("--k", k, "Treatment-head width used by the fitness");
    app->add_option("--offspring-epochs", offspring_epochs, "Epochs for an offspring's fresh output layer");
    app->add_option("--epochs", epochs, "Maximum training epochs");
    app->add_option("--patience", patience, "Early-stopping patience in epochs");
    app->add_option("--batch", batch, "Minibatch size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--dropout", dropout, "Dropout rate after the hidden activation");
    app->add_option("--l2", l2, "L2 penalty on weight matrices");
    app->add_option("--activation", activation, "Hidden activation")
        ->check(CLI::IsMember({"tanh", "relu", "elu"}));
  }

  EvolveConfig config(std::uint64_t seed, std::size_t jobs) const {
    EvolveConfig e;
    e.cohort_size = c;
    e.progenitors = l;
    e.generations = g;
    e.hidden_width = static_cast<Eigen::Index>(m);
    e.head_width = static_cast<Eigen::Index>(k);
    e.offspring_epochs = offspring_epochs;
    TrainConfig t;
    t.max_epochs = epochs;
    t.patience = patience;
    t.batch_size = batch;
    t.learning_rate = lr;
    t.dropout = dropout;
    t.l2 = l2;
    t.activation = parse_activation(activation);
    t.validate();
    e.candidate = t;
    e.head = t;
    e.seed = seed;
    e.jobs = jobs;
    if (m < 1 || k < 1) throw ConfigError("--m and --k must be positive");
    e.validate();
    return e;
  }

  void report(Resolved& r) const {
    r.add("c", c, 0);
    r.add("l", l, 0);
    r.add("g", g, 0);
    r.add("m", m);
    r.add("k", k);
    r.add("offspring-epochs", offspring_epochs, 0);
    r.add("epochs", epochs, 0);
    r.add("patience", patience, 0);
    r.add("batch", batch, 0);
    r.add("lr", lr);
    r.add("dropout", dropout);
    r.add("l2", l2);
    r.add("activation", activation);
  }
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::pair<LearnerKind, BaseKind> parse_label(const std::string& label) {
  const auto dash = label.find('-');
  if (dash == std::string::npos) throw ConfigError("learner '" + label + "' must look like KIND-BASE, e.g. T-ridge");
  return {parse_learner_kind(label.substr(0, dash)), parse_base_kind(label.substr(dash + 1))};
}

// Evolves on standardized train/valid features and returns a map that
// accepts raw features.
struct LearnedMap {
  RepresentationMap map;
  std::optional<EvolveResult> result;
};

LearnedMap learn_map(const DataSplit& parts, const EvolveConfig& config, bool with_fitness) {
  const Standardizer s = Standardizer::fit(parts.train);
  const Dataset train = s.transform(parts.train);
  const Dataset valid = s.transform(parts.valid);
  if (!with_fitness) return {no_fitness_baseline(train, valid, config).compose_standardization(s.mean(), s.scale()), {}};
  EvolveResult result = evolve(train, valid, config);
  RepresentationMap map = result.map.compose_standardization(s.mean(), s.scale());
  return {std::move(map), std::move(result)};
}

RepresentationMap load_map(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open representation '" + path.string() + "'");
  return load_representation(in);
}

std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, hash_label("split")); }
std::uint64_t evolve_seed(std::uint64_t seed) { return derive_seed(seed, hash_label("evolve")); }

// ---------------------------------------------------------------------------

struct SynthCmd {
  SynthFlags synth;
  std::uint64_t seed = 0;
  std::string out_path;

  void attach(CLI::App* app) {
    synth.attach(app);
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--out", out_path, "Output CSV")->required();
  }

  int run(std::ostream& out) const {
    const SynthSpec spec = synth.spec();
    Resolved r("synth");
    SynthFlags::report(r, spec);
    r.add("seed", seed);
    r.add("out", out_path);
    r.print(out);
    const Dataset data = generate(spec, seed);
    save_csv(out_path, data);
    out << "wrote " << data.rows() << " rows to " << out_path << '\n';
    return kOk;
  }
};

struct EvolveCmd {
  std::string in_path;
  std::string out_dir;
  SchemaFlags schema;
  SplitFlags split_flags;
  EvolveFlags evolve_flags;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("--in", in_path, "Input CSV")->required();
    app->add_option("--out-dir", out_dir, "Directory for representation.txt, transformed.csv, lineage.csv, split.csv")
        ->required();
    schema.attach(app);
    split_flags.attach(app);
    evolve_flags.attach(app);
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--jobs", jobs, "Worker threads per generation")->check(CLI::PositiveNumber);
  }

  int run(std::ostream& out) const {
    const SplitSpec split_spec = split_flags.spec(split_seed(seed));
    const EvolveConfig config = evolve_flags.config(evolve_seed(seed), jobs);
    Resolved r("evolve");
    r.add("in", in_path);
    r.add("out-dir", out_dir);
    schema.report(r);
    split_flags.report(r);
    evolve_flags.report(r);
    r.add("seed", seed);
    r.add("jobs", jobs, 0);
    r.print(out);

    const Dataset data = load_csv(in_path, schema.schema());
    const DataSplit parts = split(data, split_spec);
    const LearnedMap learned = learn_map(parts, config, true);

    const fs::path dir(out_dir);
    fs::create_directories(dir);
    {
      auto f = open_output(dir / "representation.txt");
      save_representation(f, learned.map);
    }
    {
      auto f = open_output(dir / "lineage.csv");
      write_lineage(f, learned.result->lineage);
    }
    {
      auto f = open_output(dir / "transformed.csv");
      write_csv(f, apply_representation(data, learned.map), schema.schema());
    }
    {
      auto f = open_output(dir / "split.csv");
      f << "row,part\n";
      std::vector<std::string> part(static_cast<std::size_t>(data.rows()));
      for (auto i : parts.train_rows) part[i] = "train";
      for (auto i : parts.valid_rows) part[i] = "valid";
      for (auto i : parts.test_rows) part[i] = "test";
      for (std::size_t i = 0; i < part.size(); ++i) f << i << ',' << part[i] << '\n';
    }
    const auto& best = learned.result->best;
    out << "best candidate " << learned.result->best_index << " of generation " << config.generations
        << ": fitness " << format_double(best.fitness) << ", outcome mse " << format_double(best.outcome_mse)
        << '\n';
    return kOk;
  }
};

struct BenchCmd {
  SynthFlags synth;
  EvolveFlags evolve_flags;
  SplitFlags split_flags;
  std::size_t trials = 20;
  std::string learners = "S-ridge,T-ridge,X-ridge,R-ridge,S-gbrt,T-gbrt,X-gbrt,R-gbrt";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out_path;
  std::string summary_path;

  void attach(CLI::App* app) {
    synth.attach(app);
    evolve_flags.attach(app);
    split_flags.attach(app);
    app->add_option("--trials", trials, "Independent trials (seeds master+1..master+trials)");
    app->add_option("--learners", learners, "Comma-separated KIND-BASE labels (S,T,X,XT,XS,R x ridge,gbrt)");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--jobs", jobs, "Trials run concurrently")->check(CLI::PositiveNumber);
    app->add_option("--out", out_path, "Benchmark table CSV")->required();
    app->add_option("--summary", summary_path, "Summary text file (default: standard output)");
  }

  int run(std::ostream& out) const {
    const SynthSpec spec = synth.spec();
    const LearnerSet set = parse_learners(learners);
    TrialOptions options;
    options.split = split_flags.spec(0);
    options.evolve = evolve_flags.config(0, 1);
    if (trials < 2) throw ConfigError("--trials must be at least 2");

    Resolved r("bench");
    SynthFlags::report(r, spec);
    evolve_flags.report(r);
    split_flags.report(r);
    r.add("trials", trials, 0);
    r.add("learners", learners);
    r.add("seed", seed);
    r.add("jobs", jobs, 0);
    r.add("out", out_path);
    r.add("summary", summary_path);
    r.print(out);

    const BenchmarkTable table = run_benchmark(spec, set, options, trials, seed, jobs);
    {
      auto f = open_output(out_path);
      table.write_csv(f);
    }
    if (summary_path.empty()) {
      table.write_summary(out);
    } else {
      auto f = open_output(summary_path);
      table.write_summary(f);
    }
    return kOk;
  }
};

Eigen::VectorXd read_prediction_file(const fs::path& path, Eigen::Index expected) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions '" + path.string() + "'");
  std::string line;
  std::vector<double> values;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string cell = line.substr(0, line.find(','));
    if (first) {
      first = false;
      // A non-numeric first line is a header.
      try {
        values.push_back(parse_double(cell, path.string()));
      } catch (const DataError&) {
      }
      continue;
    }
    values.push_back(parse_double(cell, path.string()));
  }
  if (static_cast<Eigen::Index>(values.size()) != expected) {
    throw DimensionError("predictions file has " + std::to_string(values.size()) + " values for " +
                         std::to_string(expected) + " rows");
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

struct BinsCmd {
  std::string in_path;
  std::string out_path;
  SchemaFlags schema;
  std::size_t bins = 5;
  std::string tau_hat_column;
  std::string predictions_path;
  std::string learner;
  std::string representation_path;
  std::size_t folds = 5;
  std::uint64_t seed = 0;

  void attach(CLI::App* app) {
    app->add_option("--in", in_path, "Input CSV")->required();
    app->add_option("--out", out_path, "Bin report CSV")->required();
    schema.attach(app);
    app->add_option("--bins", bins, "Number of equal-count bins")->check(CLI::PositiveNumber);
    auto* col = app->add_option("--tau-hat-column", tau_hat_column, "Column of the input holding predictions");
    auto* file = app->add_option("--predictions", predictions_path, "File with one prediction per input row");
    auto* fit = app->add_option("--learner", learner, "Fit this KIND-BASE learner with cross-fitting");
    col->excludes(file)->excludes(fit);
    file->excludes(fit);
    app->add_option("--representation", representation_path, "Map applied to features before --learner");
    app->add_option("--folds", folds, "Cross-fitting folds for --learner")->check(CLI::Range(2, 1000));
    app->add_option("--seed", seed, "Master seed");
  }

  int run(std::ostream& out) const {
    if (tau_hat_column.empty() && predictions_path.empty() && learner.empty()) {
      throw ConfigError("one of --tau-hat-column, --predictions or --learner is required");
    }
    Resolved r("bins");
    r.add("in", in_path);
    r.add("out", out_path);
    schema.report(r);
    r.add("bins", bins, 0);
    r.add("tau-hat-column", tau_hat_column);
    r.add("predictions", predictions_path);
    r.add("learner", learner);
    r.add("representation", representation_path);
    r.add("folds", folds, 0);
    r.add("seed", seed);
    r.print(out);

    CsvSchema s = schema.schema();
    Eigen::VectorXd tau_hat;
    Dataset data = [&] {
      if (tau_hat_column.empty()) return load_csv(in_path, s);
      // Keep the prediction column out of the feature set.
      if (s.features.empty()) {
        const Dataset all = load_csv(in_path, s);
        for (const auto& name : all.feature_names())
          if (name != tau_hat_column) s.features.push_back(name);
      }
      CsvSchema only = s;
      only.features = {tau_hat_column};
      tau_hat = load_csv(in_path, only).features().col(0);
      return load_csv(in_path, s);
    }();

    if (!predictions_path.empty()) tau_hat = read_prediction_file(predictions_path, data.rows());
    if (!learner.empty()) {
      const auto set = parse_learners(learner);
      if (!representation_path.empty()) data = apply_representation(data, load_map(representation_path));
      const auto fold_of = assign_folds(static_cast<std::size_t>(data.rows()), folds, split_seed(seed));
      tau_hat.resize(data.rows());
      for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> in_fold;
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? in_fold : rest).push_back(i);
        const Eigen::VectorXd pred =
            set.front()->fit_predict(data.subset(rest), data.subset(in_fold), derive_seed(seed, hash_label("fold"), f));
        for (std::size_t j = 0; j < in_fold.size(); ++j) tau_hat[static_cast<Eigen::Index>(in_fold[j])] = pred[static_cast<Eigen::Index>(j)];
      }
    }

    const BinReport report = quintile_calibration(tau_hat, data.treatment(), data.outcome(), bins);
    {
      auto f = open_output(out_path);
      report.write_csv(f);
    }
    out << "wrote " << report.bins.size() << " bins to " << out_path << '\n';
    if (report.all_defined()) {
      out << "rms_bin_discrepancy=" << format_double(rms_bin_discrepancy(report)) << '\n';
    } else {
      out << "rms_bin_discrepancy undefined: a bin lacks treated or control rows\n";
    }
    return kOk;
  }
};

struct EvalCmd {
  std::string in_path;
  SchemaFlags schema;
  SplitFlags split_flags;
  EvolveFlags evolve_flags;
  std::string learner = "T-ridge";
  std::string arm = "initial";
  std::string representation_path;
  std::string predictions_out;
  std::string model_dir;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void attach(CLI::App* app) {
    app->add_option("--in", in_path, "Input CSV")->required();
    schema.attach(app);
    split_flags.attach(app);
    evolve_flags.attach(app);
    app->add_option("--learner", learner, "KIND-BASE learner label");
    app->add_option("--arm", arm, "Feature arm")->check(CLI::IsMember({"initial", "no_fitness", "transformed"}));
    app->add_option("--representation", representation_path,
                    "Saved map for the transformed arm (default: evolve one on the split)");
    app->add_option("--predictions-out", predictions_out, "CSV of test-row predictions");
    app->add_option("--model-dir", model_dir, "Directory to save the fitted CATE model");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--jobs", jobs, "Worker threads per generation")->check(CLI::PositiveNumber);
  }

  int run(std::ostream& out) const {
    const auto [kind, base] = parse_label(learner);
    const SplitSpec split_spec = split_flags.spec(split_seed(seed));
    const EvolveConfig config = evolve_flags.config(evolve_seed(seed), jobs);
    if (!representation_path.empty() && arm != "transformed") {
      throw ConfigError("--representation applies only to --arm transformed");
    }
    Resolved r("eval");
    r.add("in", in_path);
    schema.report(r);
    split_flags.report(r);
    evolve_flags.report(r);
    r.add("learner", learner);
    r.add("arm", arm);
    r.add("representation", representation_path);
    r.add("predictions-out", predictions_out);
    r.add("model-dir", model_dir);
    r.add("seed", seed);
    r.add("jobs", jobs, 0);
    r.print(out);

    const Dataset data = load_csv(in_path, schema.schema());
    const DataSplit parts = split(data, split_spec);
    Dataset fit_set = Dataset::concat(parts.train, parts.valid);
    Dataset test = parts.test;
    if (arm != "initial") {
      const RepresentationMap map = !representation_path.empty() ? load_map(representation_path)
                                                                 : learn_map(parts, config, arm == "transformed").map;
      fit_set = apply_representation(fit_set, map);
      test = apply_representation(test, map);
    }
    const auto base_learner = make_base_learner(base);
    MetaOptions options;
    options.seed = derive_seed(seed, hash_label("learner"));
    const CateModel model = fit_cate(kind, fit_set, *base_learner, options);
    const Eigen::VectorXd tau_hat = model.predict_cate(test.features());

    if (!model_dir.empty()) save_cate_model(model_dir, model);
    if (!predictions_out.empty()) {
      auto f = open_output(predictions_out);
      f << "row,tau_hat" << (test.true_cate() ? ",tau" : "") << '\n';
      for (Eigen::Index i = 0; i < tau_hat.size(); ++i) {
        f << parts.test_rows[static_cast<std::size_t>(i)] << ',' << format_double(tau_hat[i]);
        if (test.true_cate()) f << ',' << format_double((*test.true_cate())[i]);
        f << '\n';
      }
    }
    out << "test_rows=" << test.rows() << '\n';
    out << "mean_tau_hat=" << format_double(tau_hat.mean()) << '\n';
    if (test.true_cate()) {
      out << "test_mse=" << format_double(mean_squared_error(tau_hat, *test.true_cate())) << '\n';
    } else {
      out << "test_mse unavailable: no true CATE column\n";
    }
    return kOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolved neural feature representations for CATE estimation", "evorep"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "Config file (TOML or INI); command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1, 1);
  app.footer(kExitCodes);

  SynthCmd synth;
  EvolveCmd evolve_cmd;
  BenchCmd bench;
  BinsCmd bins;
  EvalCmd eval;
  auto* synth_app = app.add_subcommand("synth", "Write a setup A or C dataset with its true CATE column");
  auto* evolve_app = app.add_subcommand("evolve", "Learn a feature map from a CSV");
  auto* bench_app = app.add_subcommand("bench", "Three-arm ablation over simulated trials");
  auto* bins_app = app.add_subcommand("bins", "Calibration bins of predicted versus realized effects");
  auto* eval_app = app.add_subcommand("eval", "Fit one learner on one feature arm and score it on the test split");
  synth.attach(synth_app);
  evolve_cmd.attach(evolve_app);
  bench.attach(bench_app);
  bins.attach(bins_app);
  eval.attach(eval_app);
  for (auto* sub : {synth_app, evolve_app, bench_app, bins_app, eval_app}) sub->footer(kExitCodes);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ConfigError& e) {
    err << "evorep: config: " << e.what() << '\n';
    return kConfig;
  } catch (const CLI::FileError& e) {
    err << "evorep: config: " << e.what() << '\n';
    return kConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth_app->parsed()) return synth.run(out);
    if (evolve_app->parsed()) return evolve_cmd.run(out);
    if (bench_app->parsed()) return bench.run(out);
    if (bins_app->parsed()) return bins.run(out);
    if (eval_app->parsed()) return eval.run(out);
    err << "evorep: no subcommand\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "evorep: config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    err << "evorep: data error: " << e.what() << '\n';
    return kData;
  } catch (const TrainingError& e) {
    err << "evorep: training error: " << e.what() << '\n';
    return kTraining;
  } catch (const DimensionError& e) {
    err << "evorep: dimension error: " << e.what() << '\n';
    return kDimension;
  } catch (const fs::filesystem_error& e) {
    err << "evorep: data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "evorep: internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace evorep::cli

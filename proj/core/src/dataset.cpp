#include "evorep/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "evorep/errors.hpp"
#include "evorep/random.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

namespace {

std::vector<std::string> default_names(Eigen::Index d) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

}  // namespace

Dataset::Dataset(Eigen::MatrixXd features, Eigen::VectorXi treatment, Eigen::VectorXd outcome,
                 std::optional<Eigen::VectorXd> true_cate, std::vector<std::string> feature_names)
    : features_(std::move(features)),
      treatment_(std::move(treatment)),
      outcome_(std::move(outcome)),
      true_cate_(std::move(true_cate)),
      feature_names_(std::move(feature_names)) {
  const Eigen::Index n = features_.rows();
  if (n < 1 || features_.cols() < 1) throw DataError("dataset needs at least one row and one column");
  if (treatment_.size() != n || outcome_.size() != n || (true_cate_ && true_cate_->size() != n)) {
    throw DataError("dataset row counts disagree");
  }
  if (!features_.allFinite()) throw DataError("dataset features must be finite");
  if (!outcome_.allFinite()) throw DataError("dataset outcome must be finite");
  if (true_cate_ && !true_cate_->allFinite()) throw DataError("dataset true CATE must be finite");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (treatment_[i] != 0 && treatment_[i] != 1) throw DataError("invalid treatment value");
  }
  if (feature_names_.empty()) {
    feature_names_ = default_names(features_.cols());
  } else if (static_cast<Eigen::Index>(feature_names_.size()) != features_.cols()) {
    throw DataError("feature name count does not match feature columns");
  }
}

std::size_t Dataset::treated_count() const noexcept {
  return static_cast<std::size_t>(treatment_.sum());
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  const auto k = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(k, cols());
  Eigen::VectorXi w(k);
  Eigen::VectorXd y(k);
  std::optional<Eigen::VectorXd> tau;
  if (true_cate_) tau = Eigen::VectorXd(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto r = static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]);
    if (r >= this->rows()) throw DimensionError("subset row index out of range");
    x.row(i) = features_.row(r);
    w[i] = treatment_[r];
    y[i] = outcome_[r];
    if (tau) (*tau)[i] = (*true_cate_)[r];
  }
  return Dataset(std::move(x), std::move(w), std::move(y), std::move(tau), feature_names_);
}

Dataset Dataset::with_features(Eigen::MatrixXd features, std::vector<std::string> names) const {
  if (features.rows() != rows()) throw DimensionError("replacement features have a different row count");
  return Dataset(std::move(features), treatment_, outcome_, true_cate_, std::move(names));
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
  if (a.cols() != b.cols()) throw DimensionError("cannot concatenate datasets of different width");
  const Eigen::Index n = a.rows() + b.rows();
  Eigen::MatrixXd x(n, a.cols());
  x << a.features_, b.features_;
  Eigen::VectorXi w(n);
  w << a.treatment_, b.treatment_;
  Eigen::VectorXd y(n);
  y << a.outcome_, b.outcome_;
  std::optional<Eigen::VectorXd> tau;
  if (a.true_cate_ && b.true_cate_) {
    tau = Eigen::VectorXd(n);
    *tau << *a.true_cate_, *b.true_cate_;
  }
  return Dataset(std::move(x), std::move(w), std::move(y), std::move(tau), a.feature_names_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return fields;
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty (header row required)");
  const auto header = split_fields(line);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index.emplace(std::string(header[i]), i);

  const auto column = [&](const std::string& name) -> std::size_t {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError("missing column '" + name + "'");
    return it->second;
  };

  const std::size_t w_col = column(schema.treatment);
  const std::size_t y_col = column(schema.outcome);
  std::optional<std::size_t> tau_col;
  if (!schema.true_cate.empty() && index.contains(schema.true_cate)) tau_col = index.at(schema.true_cate);

  std::vector<std::string> names = schema.features;
  std::vector<std::size_t> x_cols;
  if (names.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i == w_col || i == y_col || (tau_col && i == *tau_col)) continue;
      names.emplace_back(header[i]);
      x_cols.push_back(i);
    }
  } else {
    for (const auto& name : names) x_cols.push_back(column(name));
  }
  if (x_cols.empty()) throw DataError("CSV has no feature columns");

  std::vector<double> x_values;
  std::vector<int> w_values;
  std::vector<double> y_values;
  std::vector<double> tau_values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw DataError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    const std::string where = "CSV line " + std::to_string(line_no);
    for (auto c : x_cols) x_values.push_back(parse_double(fields[c], where));
    const double w = parse_double(fields[w_col], where);
    if (w != 0.0 && w != 1.0) {
      throw DataError("invalid treatment value '" + std::string(fields[w_col]) + "' on " + where);
    }
    w_values.push_back(static_cast<int>(w));
    y_values.push_back(parse_double(fields[y_col], where));
    if (tau_col) tau_values.push_back(parse_double(fields[*tau_col], where));
  }
  const auto n = static_cast<Eigen::Index>(y_values.size());
  if (n == 0) throw DataError("CSV has no data rows");
  const auto d = static_cast<Eigen::Index>(x_cols.size());

  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = x_values[static_cast<std::size_t>(i * d + j)];
  Eigen::VectorXi w = Eigen::Map<const Eigen::VectorXi>(w_values.data(), n);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_values.data(), n);
  std::optional<Eigen::VectorXd> tau;
  if (tau_col) tau = Eigen::Map<const Eigen::VectorXd>(tau_values.data(), n);
  return Dataset(std::move(x), std::move(w), std::move(y), std::move(tau), std::move(names));
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema) {
  const auto& names = data.feature_names();
  for (const auto& name : names) out << name << ',';
  out << schema.treatment << ',' << schema.outcome;
  const bool with_tau = data.true_cate().has_value();
  if (with_tau) out << ',' << schema.true_cate;
  out << '\n';
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) out << format_double(data.features()(i, j)) << ',';
    out << data.treatment()[i] << ',' << format_double(data.outcome()[i]);
    if (with_tau) out << ',' << format_double((*data.true_cate())[i]);
    out << '\n';
  }
}

void save_csv(const std::filesystem::path& path, const Dataset& data, const CsvSchema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_csv(out, data, schema);
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Splitting

void SplitSpec::validate() const {
  for (double f : {train_frac, valid_frac, test_frac}) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must lie in (0,1)");
  }
  if (std::fabs(train_frac + valid_frac + test_frac - 1.0) > 1e-12) {
    throw ConfigError("split fractions must sum to 1");
  }
}

DataSplit split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(data.rows());
  // The small slack keeps products such as 3 * (1/3) from flooring to 0.
  const auto part = [n](double frac) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 1e-9));
  };
  const std::size_t n_valid = part(spec.valid_frac);
  const std::size_t n_test = part(spec.test_frac);
  if (n < 3 || n_valid == 0 || n_test == 0 || n_valid + n_test >= n) {
    throw ConfigError("dataset with " + std::to_string(n) + " rows is too small to split");
  }
  const std::size_t n_train = n - n_valid - n_test;

  Rng rng(spec.seed);
  const auto perm = random_permutation(n, rng);
  std::vector<std::size_t> train_rows(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> valid_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                                      perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  std::vector<std::size_t> test_rows(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), perm.end());

  return DataSplit{data.subset(train_rows), data.subset(valid_rows), data.subset(test_rows),
                   std::move(train_rows), std::move(valid_rows), std::move(test_rows)};
}

// ---------------------------------------------------------------------------
// Standardization

Standardizer Standardizer::fit(const Dataset& train) { return fit(train.features()); }

Standardizer Standardizer::fit(const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  if (n < 2) throw ConfigError("standardizer needs at least two rows");
  Standardizer s;
  s.mean_ = features.colwise().mean().transpose();
  s.scale_.resize(features.cols());
  s.constant_.assign(static_cast<std::size_t>(features.cols()), false);
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const double ss = (features.col(j).array() - s.mean_[j]).square().sum();
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (std::isfinite(sd) && sd > 1e-12 * std::max(1.0, std::fabs(s.mean_[j]))) {
      s.scale_[j] = sd;
    } else {
      s.scale_[j] = 1.0;
      s.constant_[static_cast<std::size_t>(j)] = true;
    }
  }
  return s;
}

Eigen::MatrixXd Standardizer::transform(const Eigen::MatrixXd& features) const {
  if (features.cols() != mean_.size()) throw DimensionError("standardizer width mismatch");
  return (features.rowwise() - mean_.transpose()).array().rowwise() / scale_.transpose().array();
}

Dataset Standardizer::transform(const Dataset& data) const {
  return data.with_features(transform(data.features()), data.feature_names());
}

Dataset apply_representation(const Dataset& data, const RepresentationMap& map) {
  if (map.input_dim() != data.cols()) {
    throw DimensionError("representation input width " + std::to_string(map.input_dim()) +
                         " does not match dataset width " + std::to_string(data.cols()));
  }
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < map.output_dim(); ++j) names.push_back("phi" + std::to_string(j + 1));
  return data.with_features(map.apply_rows(data.features()), std::move(names));
}

}  // namespace evorep

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evorep/representation.hpp"

namespace evorep {

/// Observational triples (X, W, Y), plus the true CATE when the data is synthetic.
///
/// Validated on construction and immutable afterwards: treatment entries are
/// 0/1, features and outcomes finite, and all row counts agree.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd features, Eigen::VectorXi treatment, Eigen::VectorXd outcome,
          std::optional<Eigen::VectorXd> true_cate = std::nullopt,
          std::vector<std::string> feature_names = {});

  const Eigen::MatrixXd& features() const noexcept { return features_; }
  const Eigen::VectorXi& treatment() const noexcept { return treatment_; }
  const Eigen::VectorXd& outcome() const noexcept { return outcome_; }
  const std::optional<Eigen::VectorXd>& true_cate() const noexcept { return true_cate_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  Eigen::Index rows() const noexcept { return features_.rows(); }
  Eigen::Index cols() const noexcept { return features_.cols(); }

  /// Treatment as 0.0/1.0 doubles.
  Eigen::VectorXd treatment_real() const { return treatment_.cast<double>(); }
  std::size_t treated_count() const noexcept;

  /// Rows in the given order (duplicates allowed).
  Dataset subset(std::span<const std::size_t> rows) const;
  /// Same W, Y, true CATE over a new feature matrix with equal row count.
  Dataset with_features(Eigen::MatrixXd features, std::vector<std::string> names = {}) const;
  /// Rows of `a` followed by rows of `b`.
  static Dataset concat(const Dataset& a, const Dataset& b);

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXi treatment_;
  Eigen::VectorXd outcome_;
  std::optional<Eigen::VectorXd> true_cate_;
  std::vector<std::string> feature_names_;
};

// ---------------------------------------------------------------------------
// CSV

struct CsvSchema {
  /// Feature columns in order. Empty means every column that is not the
  /// treatment, outcome or true-CATE column, in file order.
  std::vector<std::string> features;
  std::string treatment = "w";
  std::string outcome = "y";
  /// Loaded when present in the header; never required.
  std::string true_cate = "tau";
};

/// Header row required, comma separated, '.' decimal separator, no quoting.
/// Non-schema columns are ignored. Throws DataError on a missing file, a
/// missing column, a non-numeric cell or a treatment value outside {0,1}.
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
Dataset read_csv(std::istream& in, const CsvSchema& schema = {});

/// Writes features, treatment, outcome and (when present) true CATE, using
/// shortest round-trip decimal text so that reloading is exact.
void write_csv(std::ostream& out, const Dataset& data, const CsvSchema& schema = {});
void save_csv(const std::filesystem::path& path, const Dataset& data, const CsvSchema& schema = {});

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double train_frac = 0.70;
  double valid_frac = 0.15;
  double test_frac = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

struct DataSplit {
  Dataset train;
  Dataset valid;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> valid_rows;
  std::vector<std::size_t> test_rows;
};

/// Random partition of the rows. Validation and test sizes are
/// floor(n * frac); training takes the remainder. The permutation depends
/// only on spec.seed.
DataSplit split(const Dataset& data, const SplitSpec& spec);

// ---------------------------------------------------------------------------
// Standardization

/// Per-column centering and scaling fitted on training features.
/// Scale is the sample sd (divisor n-1); constant columns keep scale 1.
class Standardizer {
 public:
  static Standardizer fit(const Dataset& train);
  static Standardizer fit(const Eigen::MatrixXd& features);

  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::VectorXd& scale() const noexcept { return scale_; }
  bool is_constant(Eigen::Index column) const { return constant_.at(static_cast<std::size_t>(column)); }

  Eigen::MatrixXd transform(const Eigen::MatrixXd& features) const;
  Dataset transform(const Dataset& data) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
  std::vector<bool> constant_;
};

/// Replaces features with Phi(X); W, Y and true CATE are carried over.
Dataset apply_representation(const Dataset& data, const RepresentationMap& map);

}  // namespace evorep

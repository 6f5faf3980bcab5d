#pragma once

#include <iosfwd>
#include <string_view>

#include <Eigen/Dense>

namespace evorep {

enum class Activation { tanh, relu, elu };

std::string_view to_string(Activation activation) noexcept;
/// Throws ConfigError for unknown names.
Activation parse_activation(std::string_view name);

double activate(Activation activation, double z) noexcept;
/// Derivative of the activation expressed through the pre-activation z.
double activate_derivative(Activation activation, double z) noexcept;

/// Hidden-layer feature map x -> a(weights * x + bias), R^d -> R^m.
///
/// Produced from a trained outcome network; immutable and cheap to copy
/// between workers.
struct RepresentationMap {
  Eigen::MatrixXd weights;  // m x d
  Eigen::VectorXd bias;     // m
  Activation activation = Activation::tanh;

  Eigen::Index input_dim() const noexcept { return weights.cols(); }
  Eigen::Index output_dim() const noexcept { return weights.rows(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Row-wise map of an n x d matrix to n x m.
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& x) const;

  /// Folds an affine input standardization z = (x - mean) / scale into the
  /// map, so the result can be applied to unstandardized features.
  RepresentationMap compose_standardization(const Eigen::VectorXd& mean,
                                            const Eigen::VectorXd& scale) const;

  friend bool operator==(const RepresentationMap&, const RepresentationMap&) = default;
};

// Text layout:
//   evorep-representation 1
//   activation <name>
//   dims <m> <d>
//   weights <m*d values, row-major>
//   bias <m values>
void save_representation(std::ostream& out, const RepresentationMap& map);
RepresentationMap load_representation(std::istream& in);

}  // namespace evorep

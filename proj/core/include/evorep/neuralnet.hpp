#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include <Eigen/Dense>

#include "evorep/dataset.hpp"
#include "evorep/random.hpp"
#include "evorep/representation.hpp"

namespace evorep {

/// Outcome network f(x) = m2 . a(m1 x + b1) + b2. Its hidden layer is the
/// learned representation.
struct OutcomeNetParams {
  Eigen::MatrixXd m1;  // m x d
  Eigen::VectorXd b1;  // m
  Eigen::VectorXd m2;  // m (the 1 x m output row, stored as a column)
  double b2 = 0.0;
  Activation activation = Activation::tanh;

  static OutcomeNetParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim,
                                Activation activation = Activation::tanh);

  Eigen::Index input_dim() const noexcept { return m1.cols(); }
  Eigen::Index hidden_dim() const noexcept { return m1.rows(); }

  /// Throws DimensionError on inconsistent shapes, DataError on non-finite entries.
  void validate() const;
  RepresentationMap representation_map() const;

  friend bool operator==(const OutcomeNetParams&, const OutcomeNetParams&) = default;
};

/// Treatment probe g(phi) = sigmoid(m4 . a(m3 phi + b3) + b4) on top of a representation.
struct TreatmentHeadParams {
  Eigen::MatrixXd m3;  // k x m
  Eigen::VectorXd b3;  // k
  Eigen::VectorXd m4;  // k
  double b4 = 0.0;
  Activation activation = Activation::tanh;

  static TreatmentHeadParams zeros(Eigen::Index rep_dim, Eigen::Index head_dim,
                                   Activation activation = Activation::tanh);

  Eigen::Index input_dim() const noexcept { return m3.cols(); }
  Eigen::Index hidden_dim() const noexcept { return m3.rows(); }

  void validate() const;

  friend bool operator==(const TreatmentHeadParams&, const TreatmentHeadParams&) = default;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 200;
  /// Epochs without a validation improvement before stopping.
  std::size_t patience = 20;
  /// Inverted dropout after the hidden activation, training only.
  double dropout = 0.2;
  /// Penalty l2 * ||W||^2 on weight matrices; biases are not penalized.
  double l2 = 1e-4;
  Activation activation = Activation::tanh;
  std::uint64_t seed = 0;

  void validate() const;
};

/// i.i.d. N(0, 2 / (rows + cols)) entries.
Eigen::MatrixXd glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng);

// --- inference (no dropout) ------------------------------------------------

double forward_outcome(const OutcomeNetParams& params, const Eigen::VectorXd& x);
Eigen::VectorXd forward_outcome_rows(const OutcomeNetParams& params, const Eigen::MatrixXd& x);
Eigen::VectorXd representation(const OutcomeNetParams& params, const Eigen::VectorXd& x);
Eigen::MatrixXd representation_rows(const OutcomeNetParams& params, const Eigen::MatrixXd& x);
double forward_treatment(const TreatmentHeadParams& head, const Eigen::VectorXd& rep_input);
Eigen::VectorXd forward_treatment_rows(const TreatmentHeadParams& head, const Eigen::MatrixXd& reps);

// --- gradients ---------------------------------------------------------------

struct OutcomeGradients {
  Eigen::MatrixXd m1;
  Eigen::VectorXd b1;
  Eigen::VectorXd m2;
  double b2 = 0.0;
};

struct TreatmentGradients {
  Eigen::MatrixXd m3;
  Eigen::VectorXd b3;
  Eigen::VectorXd m4;
  double b4 = 0.0;
};

/// Gradient of mean((f(x_i) - y_i)^2) + l2 * (||m1||^2 + ||m2||^2).
///
/// `dropout_mask` is either empty (no dropout) or batch x m, holding the
/// multiplier applied to each hidden unit after the activation
/// (0 or 1/(1-p) for inverted dropout).
OutcomeGradients backprop_outcome(const OutcomeNetParams& params, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const Eigen::MatrixXd& dropout_mask,
                                  double l2);

/// Gradient of mean((g(phi_i) - w_i)^2) + l2 * (||m3||^2 + ||m4||^2); squared
/// error against the 0/1 label, not cross-entropy.
TreatmentGradients backprop_treatment(const TreatmentHeadParams& head, const Eigen::MatrixXd& reps,
                                      const Eigen::VectorXd& w, const Eigen::MatrixXd& dropout_mask,
                                      double l2);

// --- Adam ---------------------------------------------------------------------

struct AdamState {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(Eigen::Index size)
      : first(Eigen::VectorXd::Zero(size)), second(Eigen::VectorXd::Zero(size)) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(Eigen::Ref<Eigen::VectorXd> params, AdamState& state, const Eigen::VectorXd& grad,
               const TrainConfig& config);

// Flat packing (m1 row-major, b1, m2, b2) used by the optimizer.
Eigen::VectorXd pack(const OutcomeNetParams& params);
Eigen::VectorXd pack(const OutcomeGradients& grads);
void unpack(const Eigen::VectorXd& flat, OutcomeNetParams& params);
Eigen::VectorXd pack(const TreatmentHeadParams& head);
Eigen::VectorXd pack(const TreatmentGradients& grads);
void unpack(const Eigen::VectorXd& flat, TreatmentHeadParams& head);

// --- training -------------------------------------------------------------------

struct OutcomeFit {
  OutcomeNetParams params;
  double valid_mse = 0.0;
  double initial_valid_mse = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Glorot-initialized outcome network of the given hidden width, trained
/// with minibatch Adam and early stopping. Returns the parameters of the
/// epoch with the lowest validation MSE (epoch 0 = the initialization).
/// Throws TrainingError if the loss becomes non-finite.
OutcomeFit train_outcome(const Dataset& train, const Dataset& valid, Eigen::Index hidden_width,
                         const TrainConfig& config);

/// Continues training from `init`. With `freeze_hidden` only (m2, b2) move;
/// with `fresh_output` the output layer is re-initialized first.
OutcomeFit refine_outcome(const OutcomeNetParams& init, const Dataset& train, const Dataset& valid,
                          const TrainConfig& config, bool freeze_hidden, bool fresh_output);

struct HeadFit {
  TreatmentHeadParams head;
  /// Validation mean of (W - g)^2.
  double score = 0.0;
};

/// Trains a treatment head on phi_theta(X) with theta held fixed and reports
/// its validation squared error, the empirical fitness of theta.
HeadFit train_treatment_head(const OutcomeNetParams& theta, const Dataset& train, const Dataset& valid,
                             Eigen::Index head_width, const TrainConfig& config);

// Text layout mirrors save_representation with the output layer appended:
//   evorep-outcome-net 1 / activation / dims m d / m1 / b1 / m2 / b2
void save_outcome_net(std::ostream& out, const OutcomeNetParams& params);
OutcomeNetParams load_outcome_net(std::istream& in);

}  // namespace evorep

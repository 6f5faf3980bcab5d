#include "evorep/neuralnet.hpp"

#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "evorep/errors.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

namespace {

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::MatrixXd activate_all(Activation activation, const Eigen::MatrixXd& z) {
  return z.unaryExpr([activation](double v) { return activate(activation, v); });
}

Eigen::MatrixXd derivative_all(Activation activation, const Eigen::MatrixXd& z) {
  return z.unaryExpr([activation](double v) { return activate_derivative(activation, v); });
}

void check_width(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got) {
    throw DimensionError(std::string(what) + ": expected width " + std::to_string(expected) + ", got " +
                         std::to_string(got));
  }
}

}  // namespace

OutcomeNetParams OutcomeNetParams::zeros(Eigen::Index input_dim, Eigen::Index hidden_dim,
                                         Activation activation) {
  return OutcomeNetParams{Eigen::MatrixXd::Zero(hidden_dim, input_dim), Eigen::VectorXd::Zero(hidden_dim),
                          Eigen::VectorXd::Zero(hidden_dim), 0.0, activation};
}

void OutcomeNetParams::validate() const {
  if (m1.rows() < 1 || m1.cols() < 1 || b1.size() != m1.rows() || m2.size() != m1.rows()) {
    throw DimensionError("outcome network blocks have inconsistent shapes");
  }
  if (!m1.allFinite() || !b1.allFinite() || !m2.allFinite() || !std::isfinite(b2)) {
    throw DataError("outcome network has non-finite parameters");
  }
}

RepresentationMap OutcomeNetParams::representation_map() const {
  return RepresentationMap{m1, b1, activation};
}

TreatmentHeadParams TreatmentHeadParams::zeros(Eigen::Index rep_dim, Eigen::Index head_dim,
                                               Activation activation) {
  return TreatmentHeadParams{Eigen::MatrixXd::Zero(head_dim, rep_dim), Eigen::VectorXd::Zero(head_dim),
                             Eigen::VectorXd::Zero(head_dim), 0.0, activation};
}

void TreatmentHeadParams::validate() const {
  if (m3.rows() < 1 || m3.cols() < 1 || b3.size() != m3.rows() || m4.size() != m3.rows()) {
    throw DimensionError("treatment head blocks have inconsistent shapes");
  }
  if (!m3.allFinite() || !b3.allFinite() || !m4.allFinite() || !std::isfinite(b4)) {
    throw DataError("treatment head has non-finite parameters");
  }
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0,1)");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0,1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
}

Eigen::MatrixXd glorot_init(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw DimensionError("glorot_init needs positive dimensions");
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(rows + cols)));
  Eigen::MatrixXd out(rows, cols);
  // Row-major fill keeps the draw order independent of Eigen's storage order.
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = normal(rng);
  return out;
}

// ---------------------------------------------------------------------------
// Inference

Eigen::VectorXd representation(const OutcomeNetParams& params, const Eigen::VectorXd& x) {
  check_width(params.input_dim(), x.size(), "representation");
  return activate_all(params.activation, params.m1 * x + params.b1);
}

Eigen::MatrixXd representation_rows(const OutcomeNetParams& params, const Eigen::MatrixXd& x) {
  check_width(params.input_dim(), x.cols(), "representation");
  Eigen::MatrixXd z = (x * params.m1.transpose()).rowwise() + params.b1.transpose();
  return activate_all(params.activation, z);
}

double forward_outcome(const OutcomeNetParams& params, const Eigen::VectorXd& x) {
  return params.m2.dot(representation(params, x)) + params.b2;
}

Eigen::VectorXd forward_outcome_rows(const OutcomeNetParams& params, const Eigen::MatrixXd& x) {
  return (representation_rows(params, x) * params.m2).array() + params.b2;
}

double forward_treatment(const TreatmentHeadParams& head, const Eigen::VectorXd& rep_input) {
  check_width(head.input_dim(), rep_input.size(), "treatment head");
  const Eigen::VectorXd hidden = activate_all(head.activation, head.m3 * rep_input + head.b3);
  return sigmoid(head.m4.dot(hidden) + head.b4);
}

Eigen::VectorXd forward_treatment_rows(const TreatmentHeadParams& head, const Eigen::MatrixXd& reps) {
  check_width(head.input_dim(), reps.cols(), "treatment head");
  Eigen::MatrixXd z = (reps * head.m3.transpose()).rowwise() + head.b3.transpose();
  Eigen::VectorXd logits = (activate_all(head.activation, z) * head.m4).array() + head.b4;
  return logits.unaryExpr([](double v) { return sigmoid(v); });
}

// ---------------------------------------------------------------------------
// Gradients

OutcomeGradients backprop_outcome(const OutcomeNetParams& params, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const Eigen::MatrixXd& dropout_mask,
                                  double l2) {
  check_width(params.input_dim(), x.cols(), "backprop_outcome");
  const Eigen::Index batch = x.rows();
  if (batch < 1 || y.size() != batch) throw DimensionError("backprop_outcome: bad batch");
  const bool dropped = dropout_mask.size() > 0;
  if (dropped && (dropout_mask.rows() != batch || dropout_mask.cols() != params.hidden_dim())) {
    throw DimensionError("backprop_outcome: dropout mask shape");
  }

  const Eigen::MatrixXd z = (x * params.m1.transpose()).rowwise() + params.b1.transpose();
  Eigen::MatrixXd h = activate_all(params.activation, z);
  if (dropped) h.array() *= dropout_mask.array();
  const Eigen::VectorXd residual = (h * params.m2).array() + params.b2 - y.array();
  const Eigen::VectorXd d_pred = residual * (2.0 / static_cast<double>(batch));

  OutcomeGradients g;
  g.m2 = h.transpose() * d_pred + 2.0 * l2 * params.m2;
  g.b2 = d_pred.sum();
  Eigen::MatrixXd d_z = d_pred * params.m2.transpose();
  if (dropped) d_z.array() *= dropout_mask.array();
  d_z.array() *= derivative_all(params.activation, z).array();
  g.m1 = d_z.transpose() * x + 2.0 * l2 * params.m1;
  g.b1 = d_z.colwise().sum().transpose();
  return g;
}

TreatmentGradients backprop_treatment(const TreatmentHeadParams& head, const Eigen::MatrixXd& reps,
                                      const Eigen::VectorXd& w, const Eigen::MatrixXd& dropout_mask,
                                      double l2) {
  check_width(head.input_dim(), reps.cols(), "backprop_treatment");
  const Eigen::Index batch = reps.rows();
  if (batch < 1 || w.size() != batch) throw DimensionError("backprop_treatment: bad batch");
  const bool dropped = dropout_mask.size() > 0;
  if (dropped && (dropout_mask.rows() != batch || dropout_mask.cols() != head.hidden_dim())) {
    throw DimensionError("backprop_treatment: dropout mask shape");
  }

  const Eigen::MatrixXd z = (reps * head.m3.transpose()).rowwise() + head.b3.transpose();
  Eigen::MatrixXd h = activate_all(head.activation, z);
  if (dropped) h.array() *= dropout_mask.array();
  const Eigen::VectorXd p = ((h * head.m4).array() + head.b4).unaryExpr([](double v) { return sigmoid(v); });
  const Eigen::VectorXd d_logit =
      (2.0 / static_cast<double>(batch)) * ((p - w).array() * p.array() * (1.0 - p.array())).matrix();

  TreatmentGradients g;
  g.m4 = h.transpose() * d_logit + 2.0 * l2 * head.m4;
  g.b4 = d_logit.sum();
  Eigen::MatrixXd d_z = d_logit * head.m4.transpose();
  if (dropped) d_z.array() *= dropout_mask.array();
  d_z.array() *= derivative_all(head.activation, z).array();
  g.m3 = d_z.transpose() * reps + 2.0 * l2 * head.m3;
  g.b3 = d_z.colwise().sum().transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Adam and packing

void adam_step(Eigen::Ref<Eigen::VectorXd> params, AdamState& state, const Eigen::VectorXd& grad,
               const TrainConfig& config) {
  if (state.first.size() != params.size() || grad.size() != params.size() ||
      state.second.size() != params.size()) {
    throw DimensionError("adam_step: state, gradient and parameter sizes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  state.first = config.beta1 * state.first + (1.0 - config.beta1) * grad;
  state.second = config.beta2 * state.second + (1.0 - config.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  params.array() -= config.learning_rate * (state.first.array() / c1) /
                    ((state.second.array() / c2).sqrt() + config.epsilon);
}

namespace {

template <class M1, class V1, class V2>
Eigen::VectorXd pack_blocks(const M1& w1, const V1& bias1, const V2& w2, double bias2) {
  const Eigen::Index rows = w1.rows();
  const Eigen::Index cols = w1.cols();
  Eigen::VectorXd flat(rows * cols + rows + w2.size() + 1);
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) flat[k++] = w1(r, c);
  flat.segment(k, rows) = bias1;
  k += rows;
  flat.segment(k, w2.size()) = w2;
  k += w2.size();
  flat[k] = bias2;
  return flat;
}

template <class M1, class V1, class V2>
void unpack_blocks(const Eigen::VectorXd& flat, M1& w1, V1& bias1, V2& w2, double& bias2) {
  const Eigen::Index rows = w1.rows();
  const Eigen::Index cols = w1.cols();
  if (flat.size() != rows * cols + rows + w2.size() + 1) throw DimensionError("unpack: size mismatch");
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) w1(r, c) = flat[k++];
  bias1 = flat.segment(k, rows);
  k += rows;
  w2 = flat.segment(k, w2.size());
  k += w2.size();
  bias2 = flat[k];
}

}  // namespace

Eigen::VectorXd pack(const OutcomeNetParams& p) { return pack_blocks(p.m1, p.b1, p.m2, p.b2); }
Eigen::VectorXd pack(const OutcomeGradients& g) { return pack_blocks(g.m1, g.b1, g.m2, g.b2); }
void unpack(const Eigen::VectorXd& flat, OutcomeNetParams& p) { unpack_blocks(flat, p.m1, p.b1, p.m2, p.b2); }
Eigen::VectorXd pack(const TreatmentHeadParams& h) { return pack_blocks(h.m3, h.b3, h.m4, h.b4); }
Eigen::VectorXd pack(const TreatmentGradients& g) { return pack_blocks(g.m3, g.b3, g.m4, g.b4); }
void unpack(const Eigen::VectorXd& flat, TreatmentHeadParams& h) { unpack_blocks(flat, h.m3, h.b3, h.m4, h.b4); }

// ---------------------------------------------------------------------------
// Training

namespace {

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  if (rate <= 0.0) return {};
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Eigen::MatrixXd mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = keep(rng) ? scale : 0.0;
  return mask;
}

struct EarlyStopResult {
  Eigen::VectorXd best;
  double best_loss = 0.0;
  double initial_loss = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Minibatch Adam with validation-based early stopping over a flat parameter
/// vector. `batch_gradient(flat, rows)` returns the gradient on those rows;
/// `valid_loss(flat)` the dropout-free validation loss. Coordinates where
/// `trainable` is zero never move.
EarlyStopResult run_training(
    Eigen::VectorXd flat, std::size_t n_train, const TrainConfig& config, Rng& rng,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&, std::span<const std::size_t>)>& batch_gradient,
    const std::function<double(const Eigen::VectorXd&)>& valid_loss, const Eigen::VectorXd& trainable) {
  EarlyStopResult result;
  result.initial_loss = valid_loss(flat);
  if (!std::isfinite(result.initial_loss)) throw TrainingError("initial validation loss is not finite");
  result.best = flat;
  result.best_loss = result.initial_loss;

  AdamState state(flat.size());
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto order = random_permutation(n_train, rng);
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t stop = std::min(n_train, start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      Eigen::VectorXd grad = batch_gradient(flat, rows);
      if (trainable.size() > 0) grad.array() *= trainable.array();
      if (!grad.allFinite()) throw TrainingError("gradient became non-finite");
      adam_step(flat, state, grad, config);
    }
    const double loss = valid_loss(flat);
    result.epochs_run = epoch;
    if (!std::isfinite(loss)) throw TrainingError("validation loss became non-finite");
    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.best = flat;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const std::size_t> rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  return out;
}

struct TargetScale {
  double mean = 0.0;
  double sd = 1.0;
};

// Targets are standardized with training statistics while fitting; the
// output layer is mapped back afterwards, so the hidden layer is unaffected.
TargetScale target_scale(const Eigen::VectorXd& y) {
  TargetScale s;
  s.mean = y.mean();
  if (y.size() > 1) {
    const double sd = std::sqrt((y.array() - s.mean).square().sum() / static_cast<double>(y.size() - 1));
    if (std::isfinite(sd) && sd > 1e-12 * std::max(1.0, std::fabs(s.mean))) s.sd = sd;
  }
  return s;
}

OutcomeFit fit_outcome_scaled(OutcomeNetParams init, const Dataset& train, const Dataset& valid,
                              const TrainConfig& config, bool freeze_hidden, Rng& rng,
                              const TargetScale& scale) {
  const Eigen::MatrixXd& x_train = train.features();
  const Eigen::MatrixXd& x_valid = valid.features();
  const Eigen::VectorXd y_train = (train.outcome().array() - scale.mean) / scale.sd;
  const Eigen::VectorXd y_valid = (valid.outcome().array() - scale.mean) / scale.sd;

  OutcomeNetParams work = init;
  const Eigen::Index m = init.hidden_dim();
  const auto batch_gradient = [&](const Eigen::VectorXd& flat, std::span<const std::size_t> rows) {
    unpack(flat, work);
    const Eigen::MatrixXd mask = dropout_mask(static_cast<Eigen::Index>(rows.size()), m, config.dropout, rng);
    return pack(backprop_outcome(work, gather_rows(x_train, rows), gather(y_train, rows), mask, config.l2));
  };
  const auto valid_loss = [&](const Eigen::VectorXd& flat) {
    unpack(flat, work);
    return (forward_outcome_rows(work, x_valid) - y_valid).squaredNorm() / static_cast<double>(y_valid.size());
  };

  Eigen::VectorXd trainable;
  if (freeze_hidden) {
    trainable = Eigen::VectorXd::Ones(pack(init).size());
    trainable.head(m * init.input_dim() + m).setZero();
  }

  const EarlyStopResult r = run_training(pack(init), static_cast<std::size_t>(train.rows()), config, rng,
                                         batch_gradient, valid_loss, trainable);
  OutcomeFit fit;
  fit.params = init;
  unpack(r.best, fit.params);
  fit.params.m2 *= scale.sd;
  fit.params.b2 = fit.params.b2 * scale.sd + scale.mean;
  fit.valid_mse = r.best_loss * scale.sd * scale.sd;
  fit.initial_valid_mse = r.initial_loss * scale.sd * scale.sd;
  fit.best_epoch = r.best_epoch;
  fit.epochs_run = r.epochs_run;
  return fit;
}

void check_training_inputs(const Dataset& train, const Dataset& valid) {
  if (train.rows() < 1 || valid.rows() < 1) throw ConfigError("training and validation sets must be nonempty");
  if (train.cols() != valid.cols()) throw DimensionError("training and validation widths differ");
}

}  // namespace

OutcomeFit train_outcome(const Dataset& train, const Dataset& valid, Eigen::Index hidden_width,
                         const TrainConfig& config) {
  config.validate();
  check_training_inputs(train, valid);
  if (hidden_width < 1) throw ConfigError("hidden width must be at least 1");
  Rng rng(config.seed);
  OutcomeNetParams init;
  init.activation = config.activation;
  init.m1 = glorot_init(hidden_width, train.cols(), rng);
  init.b1 = Eigen::VectorXd::Zero(hidden_width);
  init.m2 = glorot_init(1, hidden_width, rng).transpose();
  init.b2 = 0.0;
  return fit_outcome_scaled(std::move(init), train, valid, config, false, rng, target_scale(train.outcome()));
}

OutcomeFit refine_outcome(const OutcomeNetParams& init, const Dataset& train, const Dataset& valid,
                          const TrainConfig& config, bool freeze_hidden, bool fresh_output) {
  config.validate();
  init.validate();
  check_training_inputs(train, valid);
  check_width(init.input_dim(), train.cols(), "refine_outcome");
  Rng rng(config.seed);
  const TargetScale scale = target_scale(train.outcome());
  OutcomeNetParams start = init;
  if (fresh_output) {
    start.m2 = glorot_init(1, init.hidden_dim(), rng).transpose();
    start.b2 = 0.0;
  } else {
    start.m2 /= scale.sd;
    start.b2 = (start.b2 - scale.mean) / scale.sd;
  }
  return fit_outcome_scaled(std::move(start), train, valid, config, freeze_hidden, rng, scale);
}

HeadFit train_treatment_head(const OutcomeNetParams& theta, const Dataset& train, const Dataset& valid,
                             Eigen::Index head_width, const TrainConfig& config) {
  config.validate();
  theta.validate();
  check_training_inputs(train, valid);
  if (head_width < 1) throw ConfigError("head width must be at least 1");
  const Eigen::MatrixXd rep_train = representation_rows(theta, train.features());
  const Eigen::MatrixXd rep_valid = representation_rows(theta, valid.features());
  const Eigen::VectorXd w_train = train.treatment_real();
  const Eigen::VectorXd w_valid = valid.treatment_real();

  Rng rng(config.seed);
  TreatmentHeadParams init;
  init.activation = config.activation;
  init.m3 = glorot_init(head_width, theta.hidden_dim(), rng);
  init.b3 = Eigen::VectorXd::Zero(head_width);
  init.m4 = glorot_init(1, head_width, rng).transpose();
  init.b4 = 0.0;

  TreatmentHeadParams work = init;
  const auto batch_gradient = [&](const Eigen::VectorXd& flat, std::span<const std::size_t> rows) {
    unpack(flat, work);
    const Eigen::MatrixXd mask =
        dropout_mask(static_cast<Eigen::Index>(rows.size()), head_width, config.dropout, rng);
    return pack(backprop_treatment(work, gather_rows(rep_train, rows), gather(w_train, rows), mask, config.l2));
  };
  const auto valid_loss = [&](const Eigen::VectorXd& flat) {
    unpack(flat, work);
    return (forward_treatment_rows(work, rep_valid) - w_valid).squaredNorm() /
           static_cast<double>(w_valid.size());
  };

  const EarlyStopResult r = run_training(pack(init), static_cast<std::size_t>(train.rows()), config, rng,
                                         batch_gradient, valid_loss, Eigen::VectorXd{});
  HeadFit fit;
  fit.head = init;
  unpack(r.best, fit.head);
  fit.score = r.best_loss;
  return fit;
}

// ---------------------------------------------------------------------------
// Serialization

void save_outcome_net(std::ostream& out, const OutcomeNetParams& p) {
  out << "evorep-outcome-net 1\n";
  out << "activation " << to_string(p.activation) << '\n';
  out << "dims " << p.hidden_dim() << ' ' << p.input_dim() << '\n';
  out << "m1";
  for (Eigen::Index r = 0; r < p.m1.rows(); ++r)
    for (Eigen::Index c = 0; c < p.m1.cols(); ++c) out << ' ' << format_double(p.m1(r, c));
  out << "\nb1";
  for (Eigen::Index r = 0; r < p.b1.size(); ++r) out << ' ' << format_double(p.b1[r]);
  out << "\nm2";
  for (Eigen::Index r = 0; r < p.m2.size(); ++r) out << ' ' << format_double(p.m2[r]);
  out << "\nb2 " << format_double(p.b2) << '\n';
}

OutcomeNetParams load_outcome_net(std::istream& in) {
  std::string token;
  const auto expect = [&](std::string_view word) {
    if (!(in >> token) || token != word) throw DataError("outcome net file: expected '" + std::string(word) + "'");
  };
  const auto value = [&]() {
    if (!(in >> token)) throw DataError("outcome net file: truncated");
    return parse_double(token, "outcome net file");
  };
  expect("evorep-outcome-net");
  expect("1");
  expect("activation");
  in >> token;
  const Activation activation = parse_activation(token);
  expect("dims");
  long m = 0;
  long d = 0;
  if (!(in >> m >> d) || m < 1 || d < 1) throw DataError("outcome net file: bad dims");
  OutcomeNetParams p = OutcomeNetParams::zeros(d, m, activation);
  expect("m1");
  for (long r = 0; r < m; ++r)
    for (long c = 0; c < d; ++c) p.m1(r, c) = value();
  expect("b1");
  for (long r = 0; r < m; ++r) p.b1[r] = value();
  expect("m2");
  for (long r = 0; r < m; ++r) p.m2[r] = value();
  expect("b2");
  p.b2 = value();
  return p;
}

}  // namespace evorep

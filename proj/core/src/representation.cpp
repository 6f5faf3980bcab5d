#include "evorep/representation.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "evorep/errors.hpp"
#include "evorep/text_io.hpp"

namespace evorep {

std::string_view to_string(Activation activation) noexcept {
  switch (activation) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
  }
  return "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

double activate(Activation activation, double z) noexcept {
  switch (activation) {
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::elu: return z > 0.0 ? z : std::expm1(z);
  }
  return std::tanh(z);
}

double activate_derivative(Activation activation, double z) noexcept {
  switch (activation) {
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::elu: return z > 0.0 ? 1.0 : std::exp(z);
  }
  return 0.0;
}

Eigen::VectorXd RepresentationMap::apply(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw DimensionError("representation expects " + std::to_string(input_dim()) +
                         " inputs, got " + std::to_string(x.size()));
  }
  Eigen::VectorXd z = weights * x + bias;
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = activate(activation, z[i]);
  return z;
}

Eigen::MatrixXd RepresentationMap::apply_rows(const Eigen::MatrixXd& x) const {
  if (x.cols() != input_dim()) {
    throw DimensionError("representation expects " + std::to_string(input_dim()) +
                         " feature columns, got " + std::to_string(x.cols()));
  }
  Eigen::MatrixXd z = (x * weights.transpose()).rowwise() + bias.transpose();
  return z.unaryExpr([this](double v) { return activate(activation, v); });
}

RepresentationMap RepresentationMap::compose_standardization(const Eigen::VectorXd& mean,
                                                             const Eigen::VectorXd& scale) const {
  if (mean.size() != input_dim() || scale.size() != input_dim()) {
    throw DimensionError("standardization width does not match representation input");
  }
  RepresentationMap out;
  out.activation = activation;
  out.weights = weights * scale.cwiseInverse().asDiagonal();
  out.bias = bias - out.weights * mean;
  return out;
}

void save_representation(std::ostream& out, const RepresentationMap& map) {
  out << "evorep-representation 1\n";
  out << "activation " << to_string(map.activation) << '\n';
  out << "dims " << map.output_dim() << ' ' << map.input_dim() << '\n';
  out << "weights";
  for (Eigen::Index r = 0; r < map.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < map.weights.cols(); ++c) out << ' ' << format_double(map.weights(r, c));
  out << "\nbias";
  for (Eigen::Index r = 0; r < map.bias.size(); ++r) out << ' ' << format_double(map.bias[r]);
  out << '\n';
}

namespace {

void expect_word(std::istream& in, std::string_view word) {
  std::string token;
  if (!(in >> token) || token != word) {
    throw DataError("representation file: expected '" + std::string(word) + "'");
  }
}

double read_value(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw DataError("representation file: truncated");
  return parse_double(token, "representation file");
}

}  // namespace

RepresentationMap load_representation(std::istream& in) {
  expect_word(in, "evorep-representation");
  expect_word(in, "1");
  expect_word(in, "activation");
  std::string name;
  in >> name;
  RepresentationMap map;
  map.activation = parse_activation(name);
  expect_word(in, "dims");
  long m = 0;
  long d = 0;
  if (!(in >> m >> d) || m < 1 || d < 1) throw DataError("representation file: bad dims");
  map.weights.resize(m, d);
  map.bias.resize(m);
  expect_word(in, "weights");
  for (long r = 0; r < m; ++r)
    for (long c = 0; c < d; ++c) map.weights(r, c) = read_value(in);
  expect_word(in, "bias");
  for (long r = 0; r < m; ++r) map.bias[r] = read_value(in);
  return map;
}

}  // namespace evorep

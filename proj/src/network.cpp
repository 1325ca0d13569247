#include "rkid/network.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

namespace {

// Branch-free ELU, max(z, 0) + min(e^z, 1) - 1, so that exp() vectorises.
// Absolute error near zero stays at rounding level.
void apply_elu(Matrix& z) { z.array() = z.array().max(0.0) + (z.array().exp().min(1.0) - 1.0); }

void check_widths(const std::vector<int>& widths) {
  if (widths.size() < 2) throw ValidationError("network needs at least an input and an output width");
  for (int w : widths) {
    if (w < 1) throw ValidationError("network widths must be positive");
  }
  if (widths.front() != widths.back()) throw ValidationError("network input and output widths must agree");
}

}  // namespace

MlpParams MlpParams::zeros(const std::vector<int>& widths) {
  check_widths(widths);
  MlpParams p;
  p.widths = widths;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    p.weights.push_back(Matrix::Zero(widths[i + 1], widths[i]));
    p.biases.push_back(Vector::Zero(widths[i + 1]));
  }
  return p;
}

Eigen::Index parameter_count(const std::vector<int>& widths) {
  Eigen::Index count = 0;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) count += Eigen::Index{widths[i]} * widths[i + 1] + widths[i + 1];
  return count;
}

Eigen::Index MlpParams::parameter_count() const { return rkid::parameter_count(widths); }

void MlpParams::validate() const {
  check_widths(widths);
  if (weights.size() + 1 != widths.size() || biases.size() != weights.size()) {
    throw ValidationError("layer count does not match widths");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows() != widths[i + 1] || weights[i].cols() != widths[i] || biases[i].size() != widths[i + 1]) {
      std::ostringstream msg;
      msg << "layer " << i << " has inconsistent shape";
      throw ValidationError(msg.str());
    }
    if (!weights[i].allFinite() || !biases[i].allFinite()) throw ValidationError("network has non-finite parameters");
  }
}

std::vector<int> make_widths(int state_dim, const std::vector<int>& hidden) {
  std::vector<int> widths{state_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(state_dim);
  check_widths(widths);
  return widths;
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

double elu_derivative(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs, MlpTape& tape) {
  if (inputs.rows() != params.input_dim()) throw ValidationError("input width does not match network");
  const int layers = params.layers();
  tape.activations.resize(static_cast<std::size_t>(layers));
  tape.activations[0] = inputs;
  for (int i = 0; i + 1 < layers; ++i) {
    Matrix& next = tape.activations[static_cast<std::size_t>(i) + 1];
    next.noalias() = params.weights[i] * tape.activations[static_cast<std::size_t>(i)];
    next.colwise() += params.biases[i];
    apply_elu(next);
  }
  Matrix out = params.weights.back() * tape.activations.back();
  out.colwise() += params.biases.back();
  return out;
}

Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs) {
  if (inputs.rows() != params.input_dim()) throw ValidationError("input width does not match network");
  Matrix a = inputs;
  for (int i = 0; i + 1 < params.layers(); ++i) {
    Matrix z = params.weights[i] * a;
    z.colwise() += params.biases[i];
    apply_elu(z);
    a = std::move(z);
  }
  Matrix out = params.weights.back() * a;
  out.colwise() += params.biases.back();
  return out;
}

Vector mlp_forward(const MlpParams& params, const Vector& x) { return mlp_forward_batch(params, x); }

Matrix mlp_backprop_batch(const MlpParams& params, const MlpTape& tape, const Matrix& upstream, MlpParams& grad) {
  const int layers = params.layers();
  if (upstream.rows() != params.output_dim() || upstream.cols() != tape.activations[0].cols()) {
    throw ValidationError("upstream shape does not match network output");
  }
  Matrix delta = upstream;
  for (int i = layers - 1; i >= 0; --i) {
    const Matrix& a = tape.activations[static_cast<std::size_t>(i)];
    grad.weights[i].noalias() += delta * a.transpose();
    grad.biases[i] += delta.rowwise().sum();
    Matrix back = params.weights[i].transpose() * delta;
    if (i > 0) {
      // a = elu(z): the derivative is 1 where a > 0 and exp(z) = a + 1 elsewhere.
      back.array() *= (a.array() + 1.0).min(1.0);
    }
    delta = std::move(back);
  }
  return delta;
}

MlpGradient mlp_backprop(const MlpParams& params, const Vector& x, const Vector& upstream) {
  MlpTape tape;
  mlp_forward_batch(params, x, tape);
  MlpParams grad = MlpParams::zeros(params.widths);
  Vector gx = mlp_backprop_batch(params, tape, upstream, grad);
  return {std::move(gx), flatten(grad)};
}

MlpParams xavier_init(const std::vector<int>& widths, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(widths);
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const double bound = std::sqrt(6.0 / static_cast<double>(widths[i] + widths[i + 1]));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    Matrix& w = p.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = uniform(gen);
    }
  }
  return p;
}

Vector flatten(const MlpParams& params) {
  Vector flat(params.parameter_count());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    const Matrix& w = params.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat(k++) = w(r, c);
    }
    flat.segment(k, params.biases[i].size()) = params.biases[i];
    k += params.biases[i].size();
  }
  return flat;
}

void assign_flat(MlpParams& params, const Eigen::Ref<const Vector>& flat) {
  if (flat.size() != params.parameter_count()) {
    std::ostringstream msg;
    msg << "flat parameter length " << flat.size() << " does not match expected " << params.parameter_count();
    throw ValidationError(msg.str());
  }
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    Matrix& w = params.weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat(k++);
    }
    params.biases[i] = flat.segment(k, params.biases[i].size());
    k += params.biases[i].size();
  }
}

MlpParams unflatten(const std::vector<int>& widths, const Eigen::Ref<const Vector>& flat) {
  MlpParams p = MlpParams::zeros(widths);
  assign_flat(p, flat);
  return p;
}

double weight_norm_squared(const MlpParams& params) {
  double total = 0.0;
  for (const Matrix& w : params.weights) total += w.squaredNorm();
  return total;
}

}  // namespace rkid

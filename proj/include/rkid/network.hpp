#pragma once

#include <cstdint>
#include <vector>

#include "rkid/types.hpp"

namespace rkid {

// Feed-forward network x -> W_l g(... g(W_1 x + c_1) ...) + c_l with ELU
// hidden activations and a linear output layer. weights[i] maps
// widths[i] -> widths[i + 1].
struct MlpParams {
  std::vector<int> widths;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;

  static MlpParams zeros(const std::vector<int>& widths);

  int layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  Eigen::Index parameter_count() const;

  /// Shapes chain, input and output widths agree, entries finite.
  void validate() const;
};

/// Widths (n, hidden..., n).
std::vector<int> make_widths(int state_dim, const std::vector<int>& hidden);

/// Number of scalars in a network of the given widths.
Eigen::Index parameter_count(const std::vector<int>& widths);

double elu(double x);
double elu_derivative(double x);

Vector mlp_forward(const MlpParams& params, const Vector& x);

/// Columnwise forward pass over a batch.
Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs);

// Activations saved by a forward pass: activations[0] is the input batch,
// activations[i] the ELU output of hidden layer i.
struct MlpTape {
  std::vector<Matrix> activations;
};

Matrix mlp_forward_batch(const MlpParams& params, const Matrix& inputs, MlpTape& tape);

/// Reverse pass for sum_k upstream_k . f(x_k). Parameter gradients are added
/// into `grad` (same shapes as params); returns the gradient w.r.t. the inputs.
Matrix mlp_backprop_batch(const MlpParams& params, const MlpTape& tape, const Matrix& upstream, MlpParams& grad);

struct MlpGradient {
  Vector grad_x;
  Vector grad_params;  // flatten() ordering
};

/// Exact gradient of upstream . f(x) with respect to x and the parameters.
MlpGradient mlp_backprop(const MlpParams& params, const Vector& x, const Vector& upstream);

/// Weights uniform on +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpParams xavier_init(const std::vector<int>& widths, std::uint64_t seed);

/// Layer by layer: weights in row-major order, then the bias.
Vector flatten(const MlpParams& params);
MlpParams unflatten(const std::vector<int>& widths, const Eigen::Ref<const Vector>& flat);

/// In-place variant of unflatten for an already shaped `params`.
void assign_flat(MlpParams& params, const Eigen::Ref<const Vector>& flat);

/// Sum of squared Frobenius norms of the weight matrices (biases excluded).
double weight_norm_squared(const MlpParams& params);

}  // namespace rkid

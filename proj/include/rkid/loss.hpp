#pragma once

#include <span>
#include <string>
#include <vector>

#include "rkid/corrupt.hpp"
#include "rkid/network.hpp"
#include "rkid/stepper.hpp"
#include "rkid/types.hpp"

namespace rkid {

// Window half-width q, weights omega_i = omega0 * rho^-|i|, and the penalties
// gamma * ||N_hat||_F^2 + beta * sum ||W_i||_F^2.
struct LossConfig {
  int q = 3;
  double rho = 1.5;
  double omega0 = 1.0;
  double gamma = 0.1;
  double beta = 1e-6;

  void validate() const;
};

// Per-sample noise estimates nu_hat_j as the columns of an n x m matrix.
struct NoiseEstimate {
  Matrix values;
};

/// omega_i for i = -q..-1, 1..q, in that order.
std::vector<double> window_weights(const LossConfig& config);

/// Weighted sum over anchors j = q..m-q-1 (zero based) and offsets 0 < |i| <= q of
///   || F^i(y_j - nu_j) + nu_{j+i} - y_{j+i} ||^2
/// plus both penalties. Returns a non-finite value if the flow diverges.
double loss_value(const MlpParams& params, const NoiseEstimate& noise, const NoisyDataset& data,
                  const RkTableau& tableau, const LossConfig& config);

/// Sum of loss_value over datasets sharing one network.
double loss_multi(const MlpParams& params, std::span<const NoiseEstimate> noises, std::span<const NoisyDataset> data,
                  const RkTableau& tableau, const LossConfig& config);

struct LossEvaluation {
  double value = 0.0;
  /// [flatten(params); vec(N_1); ...; vec(N_k)], noise matrices column-major.
  Vector gradient;
  /// Empty unless value is non-finite.
  std::string diagnostic;
};

LossEvaluation loss_gradient(const MlpParams& params, std::span<const NoiseEstimate> noises,
                             std::span<const NoisyDataset> data, const RkTableau& tableau, const LossConfig& config);

LossEvaluation loss_gradient(const MlpParams& params, const NoiseEstimate& noise, const NoisyDataset& data,
                             const RkTableau& tableau, const LossConfig& config);

// Flat optimisation variable [theta; vec(N_1); ...; vec(N_k)] for a fixed
// architecture and fixed datasets.
class JointObjective {
public:
  JointObjective(std::vector<int> widths, std::span<const NoisyDataset> data, RkTableau tableau, LossConfig config);

  Eigen::Index size() const;
  Vector pack(const MlpParams& params, std::span<const NoiseEstimate> noises) const;
  MlpParams unpack_params(const Vector& z) const;
  std::vector<NoiseEstimate> unpack_noise(const Vector& z) const;

  /// Value and gradient at z; a non-finite return signals divergence.
  double operator()(const Vector& z, Vector& grad) const;

private:
  std::vector<int> widths_;
  std::span<const NoisyDataset> data_;
  RkTableau tableau_;
  LossConfig config_;
  Eigen::Index theta_size_;
};

}  // namespace rkid

#include "rkid/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "rkid/errors.hpp"

namespace rkid {

double vector_field_error(const MlpParams& learned, const VectorField& truth, const Matrix& states) {
  if (states.cols() < 1) throw ValidationError("vector field error needs at least one state");
  const Matrix predicted = mlp_forward_batch(learned, states);
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const Vector f = truth(states.col(j));
    num += (f - predicted.col(j)).squaredNorm();
    den += f.squaredNorm();
  }
  if (!(den > 0.0)) throw ValidationError("true vector field vanishes on every evaluation state");
  return num / den;
}

double noise_error(const Matrix& estimated, const Matrix& true_noise) {
  if (estimated.rows() != true_noise.rows() || estimated.cols() != true_noise.cols()) {
    throw ValidationError("noise estimate shape does not match true noise");
  }
  if (estimated.cols() < 1) throw ValidationError("noise error needs at least one sample");
  return (estimated - true_noise).squaredNorm() / static_cast<double>(estimated.cols());
}

double forward_orbit_error(const FlowModel& model, const Trajectory& truth) {
  truth.validate();
  const Eigen::Index m = truth.size();
  const double norm = truth.states.squaredNorm();
  if (!(norm > 0.0)) throw ValidationError("trajectory has zero norm");
  Matrix state = truth.states.col(0);
  RowVector dt(1);
  double total = 0.0;
  for (Eigen::Index j = 0; j + 1 < m; ++j) {
    dt(0) = truth.times(j + 1) - truth.times(j);
    state = rk_step_batch(model.params, model.tableau, state, dt);
    if (!state.allFinite()) return std::numeric_limits<double>::infinity();
    total += (truth.states.col(j) - state.col(0)).squaredNorm();
  }
  return total / norm;
}

Moments noise_moments(std::span<const double> samples) {
  if (samples.size() < 4) throw ValidationError("moments need at least four samples");
  const double m = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= m;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : samples) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= m;
  m3 /= m;
  m4 /= m;
  if (!(m2 > 0.0)) throw ValidationError("samples have zero variance; skew and kurtosis are undefined");
  return {mean, m2, m3 / std::pow(m2, 1.5), m4 / (m2 * m2) - 3.0};
}

TrialMedian median_over_trials(std::span<const double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  if (finite.empty()) throw ValidationError("every trial value is non-finite");
  std::sort(finite.begin(), finite.end());
  const std::size_t k = finite.size();
  const double median = k % 2 == 1 ? finite[k / 2] : 0.5 * (finite[k / 2 - 1] + finite[k / 2]);
  return {median, static_cast<int>(values.size() - k)};
}

}  // namespace rkid

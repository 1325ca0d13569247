#include "rkid/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

void NoisyDataset::validate() const {
  const Eigen::Index n = observations.rows();
  const Eigen::Index m = observations.cols();
  if (n < 1 || m < 1) throw ValidationError("dataset is empty");
  if (times.size() != m) throw ValidationError("dataset time count does not match observation count");
  for (Eigen::Index j = 1; j < m; ++j) {
    if (!(times(j) > times(j - 1))) throw ValidationError("dataset times must be strictly increasing");
  }
  if (!observations.allFinite()) throw ValidationError("observations contain non-finite values");
  if (truth && (truth->rows() != n || truth->cols() != m)) throw ValidationError("truth shape mismatch");
  if (true_noise && (true_noise->rows() != n || true_noise->cols() != m)) throw ValidationError("noise shape mismatch");
  if (truth && true_noise) {
    const Matrix recon = *truth + *true_noise;
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double scale = std::max({std::abs((*truth)(i, j)), std::abs((*true_noise)(i, j)), 1.0});
        if (std::abs(recon(i, j) - observations(i, j)) > 4.0 * std::numeric_limits<double>::epsilon() * scale) {
          std::ostringstream msg;
          msg << "Y != X + N at coordinate " << i << ", sample " << j;
          throw ValidationError(msg.str());
        }
      }
    }
  }
}

Vector noise_sigma(const Matrix& data, double percent) {
  if (!(percent >= 0.0) || !std::isfinite(percent)) throw ValidationError("noise percent must be finite and >= 0");
  if (data.cols() < 2) throw ValidationError("noise scale needs at least two samples");
  Vector sigma = Vector::Zero(data.rows());
  if (percent == 0.0) return sigma;
  const double m = static_cast<double>(data.cols());
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const double mean = data.row(i).mean();
    const double var = (data.row(i).array() - mean).square().sum() / (m - 1.0);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      std::ostringstream msg;
      msg << "coordinate x" << i + 1 << " is constant; a percentage noise scale is undefined";
      throw ValidationError(msg.str());
    }
    sigma(i) = percent / 100.0 * sd;
  }
  return sigma;
}

namespace {

template <typename Draw>
NoisyDataset corrupt_with(const Trajectory& clean, double percent, Draw&& draw) {
  clean.validate();
  const Vector sigma = noise_sigma(clean.states, percent);
  Matrix noise(clean.dim(), clean.size());
  for (Eigen::Index j = 0; j < noise.cols(); ++j) {
    for (Eigen::Index i = 0; i < noise.rows(); ++i) noise(i, j) = sigma(i) * draw();
  }
  NoisyDataset out;
  out.times = clean.times;
  out.observations = clean.states + noise;
  out.truth = clean.states;
  out.true_noise = std::move(noise);
  return out;
}

}  // namespace

NoisyDataset add_gaussian_noise(const Trajectory& clean, double percent, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  NoisyDataset out = corrupt_with(clean, percent, [&] { return normal(gen); });
  out.provenance = {{"distribution", "gaussian"}, {"percent", percent}, {"seed", seed}};
  return out;
}

NoisyDataset add_student_t_noise(const Trajectory& clean, double percent, int dof, std::uint64_t seed) {
  if (dof < 3) throw ValidationError("student_t noise needs dof >= 3");
  std::mt19937_64 gen(seed);
  std::student_t_distribution<double> student(static_cast<double>(dof));
  NoisyDataset out = corrupt_with(clean, percent, [&] { return student(gen); });
  out.provenance = {{"distribution", "student_t"}, {"percent", percent}, {"dof", dof}, {"seed", seed}};
  return out;
}

Matrix smooth_initial_noise(const Matrix& observations, int window) {
  const Eigen::Index m = observations.cols();
  if (window < 1 || window % 2 == 0) throw ValidationError("smoothing window must be a positive odd count");
  if (window > m) throw ValidationError("smoothing window exceeds sample count");
  const Eigen::Index half = window / 2;
  Matrix out(observations.rows(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::Index h = std::min({half, j, m - 1 - j});
    const Vector mean = observations.middleCols(j - h, 2 * h + 1).rowwise().mean();
    out.col(j) = observations.col(j) - mean;
  }
  return out;
}

}  // namespace rkid

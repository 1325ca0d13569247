#pragma once

#include <cstdint>
#include <optional>

#include <json.hpp>

#include "rkid/integrate.hpp"
#include "rkid/types.hpp"

namespace rkid {

// Observations Y = X + N, with the clean states X and the injected noise N
// kept alongside when the data is synthetic.
struct NoisyDataset {
  Vector times;
  Matrix observations;
  std::optional<Matrix> truth;
  std::optional<Matrix> true_noise;
  nlohmann::json provenance = nlohmann::json::object();

  Eigen::Index dim() const { return observations.rows(); }
  Eigen::Index size() const { return observations.cols(); }

  /// Shape checks, plus Y == X + N when both truth sections are present.
  void validate() const;
};

/// Per-coordinate noise scale: percent / 100 times the sample standard
/// deviation of each row.
Vector noise_sigma(const Matrix& data, double percent);

NoisyDataset add_gaussian_noise(const Trajectory& clean, double percent, std::uint64_t seed);

/// Standard Student's T(dof) samples multiplied by the noise_sigma scale.
NoisyDataset add_student_t_noise(const Trajectory& clean, double percent, int dof, std::uint64_t seed);

/// Y minus its centered moving average. Near the ends the window shrinks
/// symmetrically so it stays centered.
Matrix smooth_initial_noise(const Matrix& observations, int window);

}  // namespace rkid

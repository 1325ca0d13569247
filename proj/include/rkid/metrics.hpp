#pragma once

#include <span>

#include "rkid/integrate.hpp"
#include "rkid/stepper.hpp"
#include "rkid/types.hpp"

namespace rkid {

/// sum_j ||f(x_j) - f_hat(x_j)||^2 / sum_j ||f(x_j)||^2 over the columns of
/// `states`. Throws ValidationError when the denominator vanishes.
double vector_field_error(const MlpParams& learned, const VectorField& truth, const Matrix& states);

/// (1/m) sum_j ||nu_j - nu_hat_j||^2.
double noise_error(const Matrix& estimated, const Matrix& true_noise);

/// (1/||X||_F^2) sum_{j=1}^{m-1} ||x_j - F_hat^j(x_1)||^2 in one-based
/// indexing, i.e. x_j is compared with the j-step image of x_1. The orbit is
/// advanced with the recorded sample gaps. A divergent orbit yields +inf.
double forward_orbit_error(const FlowModel& model, const Trajectory& truth);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // 1/m normalisation
  double skew = 0.0;
  double kurtosis = 0.0;  // excess
};

Moments noise_moments(std::span<const double> samples);

struct TrialMedian {
  double median = 0.0;
  int ignored = 0;
};

/// Median of the finite entries.
TrialMedian median_over_trials(std::span<const double> values);

}  // namespace rkid

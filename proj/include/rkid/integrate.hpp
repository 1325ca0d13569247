#pragma once

#include <cstdint>
#include <limits>

#include "rkid/types.hpp"

namespace rkid {

// Samples x_j = x(t_j) stored as columns of an n x m matrix.
struct Trajectory {
  Vector times;
  Matrix states;

  Eigen::Index dim() const { return states.rows(); }
  Eigen::Index size() const { return states.cols(); }

  /// Throws ValidationError unless times are strictly increasing, the column
  /// count matches and every state is finite.
  void validate() const;
};

inline constexpr double kDefaultMaxSubstep = 1e-3;
inline constexpr double kNoSubstepping = std::numeric_limits<double>::infinity();

Vector rk4_step(const VectorField& field, const Vector& x, double h);

/// Classical RK4 sampled at `times`. Each output interval is split into
/// ceil(gap / max_substep) equal substeps. Throws DivergenceError naming the
/// time at which a non-finite state first appears.
Trajectory rk4_simulate(const VectorField& field, const Vector& x0, const Vector& times,
                        double max_substep = kDefaultMaxSubstep);

struct ImplicitMidpointOptions {
  double fp_tol = 1e-12;
  int fp_max_iter = 50;
  double max_substep = kDefaultMaxSubstep;
};

/// One step of x1 = x0 + h f((x0 + x1) / 2), solved by fixed-point iteration
/// until successive iterates differ by less than fp_tol in the max norm.
/// Throws ConvergenceError when fp_max_iter is exhausted.
Vector implicit_midpoint_step(const VectorField& field, const Vector& x, double h, double fp_tol = 1e-12,
                              int fp_max_iter = 50);

Trajectory implicit_midpoint_simulate(const VectorField& field, const Vector& x0, const Vector& times,
                                      const ImplicitMidpointOptions& options = {});

/// m equally spaced times on [t0, t1].
Vector uniform_times(double t0, double t1, Eigen::Index m);

/// t0 followed by m - 1 cumulative i.i.d. exponential gaps of mean `mean_dt`.
Vector sample_exponential_times(double mean_dt, double t0, Eigen::Index m, std::uint64_t seed);

}  // namespace rkid

#include "rkid/integrate.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

namespace {

void check_times(const Vector& times) {
  if (times.size() < 1) throw ValidationError("time vector is empty");
  for (Eigen::Index j = 0; j < times.size(); ++j) {
    if (!std::isfinite(times(j))) throw ValidationError("time vector contains a non-finite entry");
    if (j > 0 && !(times(j) > times(j - 1))) {
      std::ostringstream msg;
      msg << "times must be strictly increasing (index " << j << ")";
      throw ValidationError(msg.str());
    }
  }
}

[[noreturn]] void diverged_at(double t) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "state became non-finite at t = " << t;
  throw DivergenceError(msg.str());
}

Eigen::Index substep_count(double gap, double max_substep) {
  if (!std::isfinite(max_substep) || max_substep <= 0.0) return 1;
  return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::ceil(gap / max_substep - 1e-12)));
}

}  // namespace

void Trajectory::validate() const {
  check_times(times);
  if (states.cols() != times.size()) throw ValidationError("trajectory state count does not match time count");
  if (!states.allFinite()) throw ValidationError("trajectory contains non-finite states");
}

Vector rk4_step(const VectorField& field, const Vector& x, double h) {
  const Vector k1 = field(x);
  const Vector k2 = field(x + 0.5 * h * k1);
  const Vector k3 = field(x + 0.5 * h * k2);
  const Vector k4 = field(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory rk4_simulate(const VectorField& field, const Vector& x0, const Vector& times, double max_substep) {
  check_times(times);
  Trajectory out{times, Matrix(x0.size(), times.size())};
  out.states.col(0) = x0;
  Vector x = x0;
  for (Eigen::Index j = 1; j < times.size(); ++j) {
    const double gap = times(j) - times(j - 1);
    const Eigen::Index sub = substep_count(gap, max_substep);
    const double h = gap / static_cast<double>(sub);
    for (Eigen::Index s = 0; s < sub; ++s) x = rk4_step(field, x, h);
    if (!x.allFinite()) diverged_at(times(j));
    out.states.col(j) = x;
  }
  return out;
}

Vector implicit_midpoint_step(const VectorField& field, const Vector& x, double h, double fp_tol, int fp_max_iter) {
  if (!(fp_tol > 0.0)) throw ValidationError("fp_tol must be positive");
  Vector next = x + h * field(x);
  for (int it = 0; it < fp_max_iter; ++it) {
    Vector update = x + h * field(0.5 * (x + next));
    const double change = (update - next).lpNorm<Eigen::Infinity>();
    next = std::move(update);
    if (change < fp_tol) return next;
    if (!std::isfinite(change)) break;
  }
  throw ConvergenceError("implicit midpoint fixed-point iteration did not converge");
}

Trajectory implicit_midpoint_simulate(const VectorField& field, const Vector& x0, const Vector& times,
                                      const ImplicitMidpointOptions& options) {
  check_times(times);
  Trajectory out{times, Matrix(x0.size(), times.size())};
  out.states.col(0) = x0;
  Vector x = x0;
  for (Eigen::Index j = 1; j < times.size(); ++j) {
    const double gap = times(j) - times(j - 1);
    const Eigen::Index sub = substep_count(gap, options.max_substep);
    const double h = gap / static_cast<double>(sub);
    for (Eigen::Index s = 0; s < sub; ++s) {
      try {
        x = implicit_midpoint_step(field, x, h, options.fp_tol, options.fp_max_iter);
      } catch (const ConvergenceError&) {
        std::ostringstream msg;
        msg << "implicit midpoint did not converge at step " << j << " (substep " << s << ")";
        throw ConvergenceError(msg.str());
      }
    }
    if (!x.allFinite()) diverged_at(times(j));
    out.states.col(j) = x;
  }
  return out;
}

Vector uniform_times(double t0, double t1, Eigen::Index m) {
  if (m < 2) throw ValidationError("need at least two samples");
  if (!(t1 > t0)) throw ValidationError("time range must be increasing");
  return Vector::LinSpaced(m, t0, t1);
}

Vector sample_exponential_times(double mean_dt, double t0, Eigen::Index m, std::uint64_t seed) {
  if (!(mean_dt > 0.0)) throw ValidationError("mean_dt must be positive");
  if (m < 2) throw ValidationError("need at least two samples");
  std::mt19937_64 gen(seed);
  std::exponential_distribution<double> gap(1.0 / mean_dt);
  Vector times(m);
  times(0) = t0;
  for (Eigen::Index j = 1; j < m; ++j) {
    double next = times(j - 1);
    while (!(next > times(j - 1))) next = times(j - 1) + gap(gen);
    times(j) = next;
  }
  return times;
}

}  // namespace rkid

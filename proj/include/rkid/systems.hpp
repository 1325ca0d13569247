#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "rkid/types.hpp"

namespace rkid {

// x' = -d x^3 + c y^3,  y' = -c x^3 - d y^3
struct CubicOscParams {
  double damping = 0.1;
  double coupling = 2.0;
};

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

// Planar double pendulum in angles (theta1, theta2) and conjugate momenta (p1, p2).
struct DoublePendulumParams {
  double l1 = 1.0;
  double l2 = 1.0;
  double m1 = 1.0;
  double m2 = 1.0;
  double g = 10.0;
};

Vector cubic_oscillator_field(const Vector& state, const CubicOscParams& params = {});
Vector lorenz_field(const Vector& state, const LorenzParams& params = {});
Vector double_pendulum_field(const Vector& state, const DoublePendulumParams& params = {});

/// Hamiltonian of the double pendulum. Its canonical equations
/// (dtheta/dt = dH/dp, dp/dt = -dH/dtheta) reproduce double_pendulum_field.
double double_pendulum_energy(const Vector& state, const DoublePendulumParams& params = {});

enum class SystemId { kCubicOscillator, kLorenz, kDoublePendulum };

std::optional<SystemId> parse_system_id(std::string_view name);
std::string system_name(SystemId id);
int system_dimension(SystemId id);

/// Field with default parameters.
VectorField system_field(SystemId id);

}  // namespace rkid

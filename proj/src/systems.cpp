#include "rkid/systems.hpp"

#include <cmath>

#include "rkid/errors.hpp"

namespace rkid {

Vector cubic_oscillator_field(const Vector& state, const CubicOscParams& params) {
  const double x3 = state(0) * state(0) * state(0);
  const double y3 = state(1) * state(1) * state(1);
  Vector out(2);
  out << -params.damping * x3 + params.coupling * y3, -params.coupling * x3 - params.damping * y3;
  return out;
}

Vector lorenz_field(const Vector& state, const LorenzParams& params) {
  const double x = state(0), y = state(1), z = state(2);
  Vector out(3);
  out << params.sigma * (y - x), x * (params.rho - z) - y, x * y - params.beta * z;
  return out;
}

Vector double_pendulum_field(const Vector& state, const DoublePendulumParams& prm) {
  const double th1 = state(0), th2 = state(1), p1 = state(2), p2 = state(3);
  const double delta = th1 - th2;
  const double s = std::sin(delta);
  const double c = std::cos(delta);
  const double denom = prm.m1 + prm.m2 * s * s;

  const double th1_dot = (prm.l2 * p1 - prm.l1 * p2 * c) / (prm.l1 * prm.l1 * prm.l2 * denom);
  const double th2_dot = (-prm.m2 * prm.l2 * p1 * c + (prm.m1 + prm.m2) * prm.l1 * p2) /
                         (prm.m2 * prm.l1 * prm.l2 * prm.l2 * denom);

  const double c1 = p1 * p2 * s / (prm.l1 * prm.l2 * denom);
  const double c2 = (prm.m2 * prm.l2 * prm.l2 * p1 * p1 + (prm.m1 + prm.m2) * prm.l1 * prm.l1 * p2 * p2 -
                     2.0 * prm.m2 * prm.l1 * prm.l2 * p1 * p2 * c) /
                    (2.0 * prm.l1 * prm.l1 * prm.l2 * prm.l2 * denom * denom);
  const double s2 = std::sin(2.0 * delta);

  Vector out(4);
  out << th1_dot, th2_dot, -(prm.m1 + prm.m2) * prm.g * prm.l1 * std::sin(th1) - c1 + c2 * s2,
      -prm.m2 * prm.g * prm.l2 * std::sin(th2) + c1 - c2 * s2;
  return out;
}

double double_pendulum_energy(const Vector& state, const DoublePendulumParams& prm) {
  const double th1 = state(0), th2 = state(1), p1 = state(2), p2 = state(3);
  const double delta = th1 - th2;
  const double s = std::sin(delta);
  const double kinetic = (prm.m2 * prm.l2 * prm.l2 * p1 * p1 + (prm.m1 + prm.m2) * prm.l1 * prm.l1 * p2 * p2 -
                          2.0 * prm.m2 * prm.l1 * prm.l2 * p1 * p2 * std::cos(delta)) /
                         (2.0 * prm.m2 * prm.l1 * prm.l1 * prm.l2 * prm.l2 * (prm.m1 + prm.m2 * s * s));
  const double potential = -(prm.m1 + prm.m2) * prm.g * prm.l1 * std::cos(th1) - prm.m2 * prm.g * prm.l2 * std::cos(th2);
  return kinetic + potential;
}

std::optional<SystemId> parse_system_id(std::string_view name) {
  if (name == "cubic" || name == "cubic_oscillator") return SystemId::kCubicOscillator;
  if (name == "lorenz") return SystemId::kLorenz;
  if (name == "double_pendulum" || name == "pendulum") return SystemId::kDoublePendulum;
  return std::nullopt;
}

std::string system_name(SystemId id) {
  switch (id) {
    case SystemId::kCubicOscillator: return "cubic_oscillator";
    case SystemId::kLorenz: return "lorenz";
    case SystemId::kDoublePendulum: return "double_pendulum";
  }
  throw ValidationError("unknown system id");
}

int system_dimension(SystemId id) {
  switch (id) {
    case SystemId::kCubicOscillator: return 2;
    case SystemId::kLorenz: return 3;
    case SystemId::kDoublePendulum: return 4;
  }
  throw ValidationError("unknown system id");
}

VectorField system_field(SystemId id) {
  switch (id) {
    case SystemId::kCubicOscillator: return [](const Vector& x) { return cubic_oscillator_field(x); };
    case SystemId::kLorenz: return [](const Vector& x) { return lorenz_field(x); };
    case SystemId::kDoublePendulum: return [](const Vector& x) { return double_pendulum_field(x); };
  }
  throw ValidationError("unknown system id");
}

}  // namespace rkid

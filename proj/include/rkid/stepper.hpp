#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rkid/network.hpp"
#include "rkid/types.hpp"

namespace rkid {

// Explicit Runge-Kutta scheme for autonomous fields: stage coefficients A
// (strictly lower triangular) and output weights b.
struct RkTableau {
  Matrix a;
  Vector b;

  int stages() const { return static_cast<int>(b.size()); }
  void validate() const;

  static RkTableau classical_rk4();
  /// Kutta's three-stage third-order scheme.
  static RkTableau kutta3();
  static RkTableau forward_euler();
};

/// "rk4", "rk3" or "euler".
std::optional<RkTableau> tableau_by_name(std::string_view name);

// Learned flow map: the tableau applied to the network vector field.
struct FlowModel {
  MlpParams params;
  RkTableau tableau;
};

Vector rk_step(const FlowModel& model, const Vector& x, double dt);

/// Composes |count| steps. `gaps` lists consecutive sample intervals in time
/// order. A positive count walks forward through gaps[0], gaps[1], ...; a
/// negative count walks backward from the end, stepping with -gaps.back(),
/// -gaps[size - 2], ... Throws DivergenceError naming the failing step.
Vector flow_steps(const FlowModel& model, const Vector& x, std::span<const double> gaps, int count);

struct FlowGradient {
  Vector grad_x;
  Vector grad_params;  // flatten() ordering
};

/// Exact gradient of upstream . flow_steps(model, x, gaps, count).
FlowGradient flow_steps_backprop(const FlowModel& model, const Vector& x, std::span<const double> gaps, int count,
                                 const Vector& upstream);

// Saved network activations of every stage of one step.
struct StepTape {
  std::vector<MlpTape> stages;
};

/// One step applied to each column with its own step size dt(k).
/// Pass a tape to record what rk_step_backprop_batch needs.
Matrix rk_step_batch(const MlpParams& params, const RkTableau& tableau, const Matrix& x, const RowVector& dt,
                     StepTape* tape = nullptr);

/// Reverse pass through one batched step. Parameter gradients are added into
/// `grad`; returns the gradient w.r.t. the step input.
Matrix rk_step_backprop_batch(const MlpParams& params, const RkTableau& tableau, const StepTape& tape,
                              const RowVector& dt, const Matrix& upstream, MlpParams& grad);

}  // namespace rkid

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rkid/types.hpp"

namespace rkid {

struct OptimizerOptions {
  int memory = 10;
  int max_iters = 5000;
  double grad_tol = 1e-8;   // on the max norm of the gradient
  double f_tol = 1e-12;     // relative decrease between accepted iterates
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch = 40;

  void validate() const;
};

enum class Termination { kGradientTol, kFunctionTol, kMaxIters, kLineSearchFailure };

std::string termination_name(Termination reason);

// One accepted iterate. phi0/dphi0 and value/dphi describe the line search
// along the search direction before and after the step, so the strong Wolfe
// conditions can be checked after the fact.
struct IterationRecord {
  int iteration = 0;
  double value = 0.0;
  double grad_norm = 0.0;  // max norm
  double step = 0.0;
  double phi0 = 0.0;
  double dphi0 = 0.0;
  double dphi = 0.0;
};

struct OptimizeReport {
  Vector x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  Termination termination = Termination::kMaxIters;
  std::vector<IterationRecord> trace;
};

/// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Vector& x, Vector& grad)>;
using IterationCallback = std::function<void(const IterationRecord&)>;

/// Limited-memory BFGS with a strong Wolfe line search. Non-finite trial
/// values shrink the step. Throws ValidationError if f(x0) is not finite.
OptimizeReport lbfgs_minimize(const Objective& objective, const Vector& x0, const OptimizerOptions& options = {},
                              const IterationCallback& on_iteration = {});

}  // namespace rkid

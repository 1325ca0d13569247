#include "rkid/stepper.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

void RkTableau::validate() const {
  const Eigen::Index p = b.size();
  if (p < 1) throw ValidationError("tableau needs at least one stage");
  if (a.rows() != p || a.cols() != p) throw ValidationError("tableau A must be p x p");
  for (Eigen::Index i = 0; i < p; ++i) {
    for (Eigen::Index j = i; j < p; ++j) {
      if (a(i, j) != 0.0) throw ValidationError("tableau A must be strictly lower triangular");
    }
  }
  if (!a.allFinite() || !b.allFinite()) throw ValidationError("tableau has non-finite entries");
  if (std::abs(b.sum() - 1.0) > 1e-12) throw ValidationError("tableau weights b must sum to one");
}

RkTableau RkTableau::classical_rk4() {
  RkTableau t{Matrix::Zero(4, 4), Vector(4)};
  t.a(1, 0) = 0.5;
  t.a(2, 1) = 0.5;
  t.a(3, 2) = 1.0;
  t.b << 1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0;
  return t;
}

RkTableau RkTableau::kutta3() {
  RkTableau t{Matrix::Zero(3, 3), Vector(3)};
  t.a(1, 0) = 0.5;
  t.a(2, 0) = -1.0;
  t.a(2, 1) = 2.0;
  t.b << 1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0;
  return t;
}

RkTableau RkTableau::forward_euler() { return RkTableau{Matrix::Zero(1, 1), Vector::Ones(1)}; }

std::optional<RkTableau> tableau_by_name(std::string_view name) {
  if (name == "rk4") return RkTableau::classical_rk4();
  if (name == "rk3") return RkTableau::kutta3();
  if (name == "euler") return RkTableau::forward_euler();
  return std::nullopt;
}

Matrix rk_step_batch(const MlpParams& params, const RkTableau& tableau, const Matrix& x, const RowVector& dt,
                     StepTape* tape) {
  const int p = tableau.stages();
  if (dt.size() != x.cols()) throw ValidationError("one step size per column is required");
  std::vector<Matrix> k(static_cast<std::size_t>(p));
  if (tape) tape->stages.resize(static_cast<std::size_t>(p));
  Matrix acc(x.rows(), x.cols());
  for (int s = 0; s < p; ++s) {
    acc.setZero();
    bool any = false;
    for (int r = 0; r < s; ++r) {
      if (tableau.a(s, r) == 0.0) continue;
      acc += tableau.a(s, r) * k[r];
      any = true;
    }
    Matrix input = x;
    if (any) input.array() += acc.array().rowwise() * dt.array();
    k[s] = tape ? mlp_forward_batch(params, input, tape->stages[s]) : mlp_forward_batch(params, input);
  }
  acc.setZero();
  for (int s = 0; s < p; ++s) {
    if (tableau.b(s) != 0.0) acc += tableau.b(s) * k[s];
  }
  Matrix out = x;
  out.array() += acc.array().rowwise() * dt.array();
  return out;
}

Matrix rk_step_backprop_batch(const MlpParams& params, const RkTableau& tableau, const StepTape& tape,
                              const RowVector& dt, const Matrix& upstream, MlpParams& grad) {
  const int p = tableau.stages();
  std::vector<Matrix> stage_input_grad(static_cast<std::size_t>(p));
  Matrix grad_x = upstream;
  for (int s = p - 1; s >= 0; --s) {
    Matrix g = tableau.b(s) * upstream;
    for (int r = s + 1; r < p; ++r) {
      if (tableau.a(r, s) != 0.0) g += tableau.a(r, s) * stage_input_grad[r];
    }
    g.array().rowwise() *= dt.array();
    stage_input_grad[s] = mlp_backprop_batch(params, tape.stages[s], g, grad);
    grad_x += stage_input_grad[s];
  }
  return grad_x;
}

namespace {

void check_count(std::span<const double> gaps, int count) {
  if (static_cast<std::size_t>(std::abs(count)) > gaps.size()) {
    std::ostringstream msg;
    msg << "flow needs " << std::abs(count) << " gaps but only " << gaps.size() << " were given";
    throw ValidationError(msg.str());
  }
}

// Signed step size of the k-th step (0 based) of a |count|-step composition.
double step_size(std::span<const double> gaps, int count, int k) {
  if (count >= 0) return gaps[static_cast<std::size_t>(k)];
  return -gaps[gaps.size() - 1 - static_cast<std::size_t>(k)];
}

[[noreturn]] void diverged(int step) {
  std::ostringstream msg;
  msg << "learned flow diverged at step " << step;
  throw DivergenceError(msg.str());
}

}  // namespace

Vector rk_step(const FlowModel& model, const Vector& x, double dt) {
  RowVector h(1);
  h(0) = dt;
  Vector out = rk_step_batch(model.params, model.tableau, x, h);
  if (!out.allFinite()) throw DivergenceError("learned flow produced a non-finite state");
  return out;
}

Vector flow_steps(const FlowModel& model, const Vector& x, std::span<const double> gaps, int count) {
  check_count(gaps, count);
  Vector state = x;
  RowVector h(1);
  for (int k = 0; k < std::abs(count); ++k) {
    h(0) = step_size(gaps, count, k);
    state = rk_step_batch(model.params, model.tableau, state, h);
    if (!state.allFinite()) diverged(k + 1);
  }
  return state;
}

FlowGradient flow_steps_backprop(const FlowModel& model, const Vector& x, std::span<const double> gaps, int count,
                                 const Vector& upstream) {
  check_count(gaps, count);
  const int steps = std::abs(count);
  std::vector<StepTape> tapes(static_cast<std::size_t>(steps));
  std::vector<RowVector> sizes(static_cast<std::size_t>(steps), RowVector(1));
  Vector state = x;
  for (int k = 0; k < steps; ++k) {
    sizes[k](0) = step_size(gaps, count, k);
    state = rk_step_batch(model.params, model.tableau, state, sizes[k], &tapes[k]);
    if (!state.allFinite()) diverged(k + 1);
  }
  MlpParams grad = MlpParams::zeros(model.params.widths);
  Matrix lambda = upstream;
  for (int k = steps - 1; k >= 0; --k) {
    lambda = rk_step_backprop_batch(model.params, model.tableau, tapes[k], sizes[k], lambda, grad);
  }
  return {lambda.col(0), flatten(grad)};
}

}  // namespace rkid

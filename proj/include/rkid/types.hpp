#pragma once

#include <functional>

#include <Eigen/Dense>

namespace rkid {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

// Autonomous right-hand side x' = f(x).
using VectorField = std::function<Vector(const Vector&)>;

}  // namespace rkid

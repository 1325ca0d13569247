#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <doctest.h>

#include "rkid/errors.hpp"
#include "rkid/metrics.hpp"
#include "rkid/systems.hpp"

using namespace rkid;

namespace {

// Single affine layer encoding x' = a x.
MlpParams linear_params(const Matrix& a) {
  MlpParams p = MlpParams::zeros({static_cast<int>(a.rows()), static_cast<int>(a.rows())});
  p.weights[0] = a;
  return p;
}

Moments moments_of(const std::vector<double>& v) { return noise_moments(v); }

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("vector field error") {
  Matrix a(2, 2);
  a << -0.2, 1.0, -1.0, -0.2;
  const MlpParams exact = linear_params(a);
  const VectorField f = [&](const Vector& x) { return Vector(a * x); };
  const Matrix states = Matrix::Random(2, 50);
  CHECK(vector_field_error(exact, f, states) < 1e-30);
  CHECK(vector_field_error(MlpParams::zeros({2, 4, 2}), f, states) == 1.0);
  CHECK(vector_field_error(linear_params(1.1 * a), f, states) == doctest::Approx(0.01));
  CHECK_THROWS_AS(vector_field_error(exact, f, Matrix::Zero(2, 5)), ValidationError);
}

TEST_CASE("noise error") {
  const Matrix n = Matrix::Random(3, 40);
  CHECK(noise_error(n, n) == 0.0);
  CHECK(noise_error(Matrix::Zero(3, 40), n) == doctest::Approx(n.squaredNorm() / 40.0));
  CHECK_THROWS_AS(noise_error(Matrix::Zero(3, 39), n), ValidationError);
}

TEST_CASE("forward orbit error") {
  Matrix a(2, 2);
  a << -0.1, 1.0, -1.0, -0.1;
  const FlowModel exact{linear_params(a), RkTableau::classical_rk4()};
  Trajectory tr;
  tr.times = Vector::LinSpaced(201, 0.0, 2.0);
  tr.states.resize(2, 201);
  for (Eigen::Index j = 0; j < 201; ++j) {
    const double t = tr.times(j), d = std::exp(-0.1 * t);
    tr.states(0, j) = d * (std::cos(t) + std::sin(t));
    tr.states(1, j) = d * (std::cos(t) - std::sin(t));
  }

  SUBCASE("printed index convention pairs x_j with the j-step image of x_1") {
    // Under this convention even an exact model is one step out of phase;
    // the oracle replays the sum directly.
    double num = 0.0;
    Vector x = tr.states.col(0);
    for (Eigen::Index j = 0; j + 1 < tr.size(); ++j) {
      x = rk_step(exact, x, tr.times(j + 1) - tr.times(j));
      num += (tr.states.col(j) - x).squaredNorm();
    }
    CHECK(forward_orbit_error(exact, tr) == doctest::Approx(num / tr.states.squaredNorm()).epsilon(1e-12));
  }

  SUBCASE("a model that advances zero time is exact under the printed convention") {
    MlpParams zero = MlpParams::zeros({2, 2});
    Trajectory constant = tr;
    constant.states.colwise() = tr.states.col(0);
    CHECK(forward_orbit_error({zero, RkTableau::classical_rk4()}, constant) < 1e-30);
  }

  SUBCASE("divergent orbits are reported as infinite") {
    MlpParams wild = MlpParams::zeros({2, 2});
    wild.weights[0] = Matrix::Identity(2, 2) * 1e4;
    Trajectory big = tr;
    big.times = Vector::LinSpaced(201, 0.0, 200.0);
    CHECK(std::isinf(forward_orbit_error({wild, RkTableau::classical_rk4()}, big)));
  }
}

TEST_CASE("sample moments") {
  CHECK(std::abs(moments_of({4.0, 5.0, 6.0, 5.0, 4.5, 5.5}).skew) < 1e-12);
  const Moments basic = moments_of({1.0, 2.0, 3.0, 4.0});
  CHECK(basic.mean == 2.5);
  CHECK(basic.variance == doctest::Approx(1.25));
  CHECK_THROWS_AS(moments_of({1.0, 1.0, 1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(moments_of({1.0, 2.0, 3.0}), ValidationError);

  std::mt19937_64 gen(12);
  std::normal_distribution<double> normal;
  std::student_t_distribution<double> student(10.0);
  std::vector<double> g(1000000), t(1000000);
  for (double& v : g) v = normal(gen);
  for (double& v : t) v = student(gen);
  const Moments mg = moments_of(g);
  CHECK(std::abs(mg.mean) < 0.02);
  CHECK(std::abs(mg.variance - 1.0) < 0.02);
  CHECK(std::abs(mg.skew) < 0.02);
  CHECK(std::abs(mg.kurtosis) < 0.02);
  CHECK(std::abs(moments_of(t).kurtosis - 1.0) < 0.1);
}

TEST_CASE("median over trials") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median_over_trials(std::vector<double>{1, 2, 3}).median == 2.0);
  const TrialMedian m = median_over_trials(std::vector<double>{1, inf, 3});
  CHECK(m.median == 2.0);
  CHECK(m.ignored == 1);
  CHECK(median_over_trials(std::vector<double>{7.5}).median == 7.5);
  CHECK_THROWS_AS(median_over_trials(std::vector<double>{inf, NAN}), ValidationError);
  CHECK_THROWS_AS(median_over_trials(std::vector<double>{}), ValidationError);
}

}

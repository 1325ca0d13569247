#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "rkid/errors.hpp"
#include "rkid/loss.hpp"
#include "rkid/optimize.hpp"

using namespace rkid;

namespace {

MlpParams random_params(const std::vector<int>& widths, std::mt19937_64& gen, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  MlpParams p = MlpParams::zeros(widths);
  for (auto& w : p.weights) w = w.unaryExpr([&](double) { return normal(gen); });
  for (auto& b : p.biases) b = b.unaryExpr([&](double) { return normal(gen); });
  return p;
}

NoisyDataset random_dataset(int n, int m, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> gap(0.02, 0.08);
  std::normal_distribution<double> normal;
  NoisyDataset d;
  d.times.resize(m);
  d.times(0) = 0.0;
  for (int j = 1; j < m; ++j) d.times(j) = d.times(j - 1) + gap(gen);
  d.observations = Matrix(n, m).unaryExpr([&](double) { return normal(gen); });
  return d;
}

// Direct evaluation of the double sum, one window pair at a time.
double brute_force_loss(const MlpParams& p, const Matrix& nu, const NoisyDataset& d, const RkTableau& t,
                        const LossConfig& c) {
  const FlowModel model{p, t};
  std::vector<double> gaps(d.times.data() + 1, d.times.data() + d.times.size());
  for (std::size_t k = 0; k < gaps.size(); ++k) gaps[k] -= d.times(static_cast<Eigen::Index>(k));
  const Eigen::Index m = d.size();
  double total = 0.0;
  for (Eigen::Index j = c.q; j < m - c.q; ++j) {
    for (int i = -c.q; i <= c.q; ++i) {
      if (i == 0) continue;
      const double w = c.omega0 * std::pow(c.rho, -std::abs(i));
      std::span<const double> window = i > 0 ? std::span<const double>(gaps).subspan(j, i)
                                             : std::span<const double>(gaps).subspan(j + i, -i);
      const Vector pred = flow_steps(model, d.observations.col(j) - nu.col(j), window, i);
      total += w * (pred + nu.col(j + i) - d.observations.col(j + i)).squaredNorm();
    }
  }
  double wn = 0.0;
  for (const auto& w : p.weights) wn += w.squaredNorm();
  return total + c.gamma * nu.squaredNorm() + c.beta * wn;
}

double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_SUITE("loss") {

TEST_CASE("window weights") {
  LossConfig c;
  c.q = 3;
  c.rho = 1.0;
  c.omega0 = 0.7;
  for (double w : window_weights(c)) CHECK(w == 0.7);

  c.q = 2;
  c.rho = 2.0;
  c.omega0 = 1.0;
  const std::vector<double> expected{0.25, 0.5, 0.5, 0.25};
  CHECK(window_weights(c) == expected);

  c.q = 4;
  c.rho = 1.7;
  c.omega0 = 2.0;
  const auto w = window_weights(c);
  for (int i = 0; i < 4; ++i) {
    CHECK(w[i] == w[7 - i]);
    CHECK(w[4 + i] * std::pow(c.rho, i + 1) == doctest::Approx(c.omega0).epsilon(1e-14));
  }
}

TEST_CASE("config validation") {
  LossConfig c;
  c.q = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.rho = 0.9;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.gamma = -1;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.beta = INFINITY;
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("exact model with true noise has vanishing loss") {
  // x' = A x with a single affine layer, observed at a tight spacing.
  Matrix a(2, 2);
  a << -0.1, 1.0, -1.0, -0.1;
  MlpParams p = MlpParams::zeros({2, 2});
  p.weights[0] = a;
  const Eigen::Index m = 60;
  NoisyDataset d;
  d.times = Vector::LinSpaced(m, 0.0, 0.059);
  Matrix x(2, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double t = d.times(j), decay = std::exp(-0.1 * t);
    x(0, j) = decay * (std::cos(t) + std::sin(t));
    x(1, j) = decay * (std::cos(t) - std::sin(t));
  }
  std::mt19937_64 gen(1);
  std::normal_distribution<double> normal(0.0, 0.05);
  const Matrix nu = Matrix(2, m).unaryExpr([&](double) { return normal(gen); });
  d.observations = x + nu;
  LossConfig c;
  c.gamma = 0.0;
  c.beta = 0.0;
  CHECK(loss_value(p, {nu}, d, RkTableau::classical_rk4(), c) < 1e-10);
}

TEST_CASE("trivial solution zeroes the prediction term") {
  std::mt19937_64 gen(2);
  NoisyDataset d = random_dataset(2, 15, gen);
  // quarter-integer data keeps every subtraction exact
  d.observations = (d.observations * 4.0).array().round() / 4.0;
  const MlpParams zero = MlpParams::zeros({2, 6, 2});
  const Matrix nu = d.observations.colwise() - d.observations.col(0);
  LossConfig c;
  c.gamma = 0.0;
  c.beta = 0.0;
  CHECK(loss_value(zero, {nu}, d, RkTableau::classical_rk4(), c) == 0.0);

  c.gamma = 0.3;
  const LossEvaluation e = loss_gradient(zero, {nu}, d, RkTableau::classical_rk4(), c);
  const Eigen::Index theta = zero.parameter_count();
  const Vector noise_grad = e.gradient.tail(e.gradient.size() - theta);
  const Vector penalty = 2 * c.gamma * nu.reshaped();
  CHECK((noise_grad - penalty).norm() < 1e-12);
  // Residuals vanish here, so the prediction term adds nothing and the
  // penalty alone pushes away from the trivial point.
  CHECK(noise_grad.norm() > 0.0);
}

TEST_CASE("loss equals the termwise double sum") {
  std::mt19937_64 gen(3);
  SUBCASE("scalar state, q=1, m=3") {
    NoisyDataset d;
    d.times.resize(3);
    d.times << 0.0, 0.1, 0.25;
    d.observations.resize(1, 3);
    d.observations << 0.4, -0.2, 0.9;
    MlpParams p = MlpParams::zeros({1, 2, 1});
    p.weights[0] << 0.5, -1.0;
    p.biases[0] << 0.1, 0.2;
    p.weights[1] << 1.5, 0.7;
    p.biases[1] << -0.3;
    Matrix nu(1, 3);
    nu << 0.05, -0.1, 0.02;
    LossConfig c;
    c.q = 1;
    c.rho = 2.0;
    c.gamma = 0.2;
    c.beta = 0.01;
    // Written out termwise: anchor j=1 with i = -1 and i = +1.
    const FlowModel model{p, RkTableau::classical_rk4()};
    Vector z(1);
    z << d.observations(1) - nu(1);
    const double fwd = rk_step(model, z, 0.15)(0) + nu(2) - d.observations(2);
    const double bwd = rk_step(model, z, -0.1)(0) + nu(0) - d.observations(0);
    const double oracle = 0.5 * (fwd * fwd + bwd * bwd) + 0.2 * nu.squaredNorm() +
                          0.01 * (p.weights[0].squaredNorm() + p.weights[1].squaredNorm());
    CHECK(loss_value(p, {nu}, d, RkTableau::classical_rk4(), c) == doctest::Approx(oracle).epsilon(1e-13));
  }
  SUBCASE("random instances, both tableaus, several windows") {
    for (int trial = 0; trial < 12; ++trial) {
      const NoisyDataset d = random_dataset(2, 150 + trial * 40, gen);
      const MlpParams p = random_params({2, 6, 2}, gen);
      const Matrix nu = Matrix::Random(2, d.size()) * 0.1;
      LossConfig c;
      c.q = 1 + trial % 3;
      c.rho = 1.3;
      const RkTableau t = trial % 2 ? RkTableau::kutta3() : RkTableau::classical_rk4();
      CHECK(rel_error(loss_value(p, {nu}, d, t, c), brute_force_loss(p, nu, d, t, c)) < 1e-12);
    }
  }
}

TEST_CASE("multi-dataset loss") {
  std::mt19937_64 gen(4);
  const NoisyDataset a = random_dataset(2, 30, gen), b = random_dataset(2, 25, gen);
  const MlpParams p = random_params({2, 6, 2}, gen);
  const NoiseEstimate na{Matrix::Random(2, 30) * 0.1}, nb{Matrix::Random(2, 25) * 0.1};
  LossConfig c;
  c.beta = 0.0;
  const RkTableau t = RkTableau::classical_rk4();
  const double single = loss_value(p, na, a, t, c);
  CHECK(loss_multi(p, std::vector<NoiseEstimate>{na}, std::vector<NoisyDataset>{a}, t, c) == single);
  CHECK(loss_multi(p, std::vector<NoiseEstimate>{na, na}, std::vector<NoisyDataset>{a, a}, t, c) ==
        doctest::Approx(2 * single).epsilon(1e-14));

  const std::vector<NoiseEstimate> both{na, nb};
  const std::vector<NoisyDataset> data{a, b};
  const LossEvaluation e = loss_gradient(p, both, data, t, c);
  const LossEvaluation ea = loss_gradient(p, na, a, t, c), eb = loss_gradient(p, nb, b, t, c);
  const Eigen::Index th = p.parameter_count();
  CHECK((e.gradient.head(th) - (ea.gradient.head(th) + eb.gradient.head(th))).norm() < 1e-10);
  CHECK((e.gradient.segment(th, 60) - ea.gradient.tail(60)).norm() < 1e-12);
  CHECK((e.gradient.tail(50) - eb.gradient.tail(50)).norm() < 1e-12);

  std::vector<NoisyDataset> many;
  std::vector<NoiseEstimate> many_noise;
  for (int k = 0; k < 50; ++k) {
    many.push_back(random_dataset(3, 200, gen));
    many_noise.push_back({Matrix::Zero(3, 200)});
  }
  CHECK(std::isfinite(loss_multi(random_params({3, 8, 3}, gen, 0.2), many_noise, many, t, c)));
}

TEST_CASE("gradient agrees with central differences") {
  std::mt19937_64 gen(5);
  const NoisyDataset d = random_dataset(2, 20, gen);
  const MlpParams p = random_params({2, 8, 2}, gen);
  const NoiseEstimate nu{Matrix::Random(2, 20) * 0.2};
  LossConfig c;
  c.q = 2;
  c.beta = 1e-3;
  const RkTableau t = RkTableau::classical_rk4();
  const std::vector<NoisyDataset> data{d};
  const JointObjective obj(p.widths, data, t, c);
  const Vector z = obj.pack(p, {&nu, 1});
  Vector g(z.size());
  obj(z, g);
  const double h = 1e-6;
  int ok = 0;
  for (int k = 0; k < 50; ++k) {
    Vector dir = Vector::Random(z.size());
    Vector scratch(z.size());
    const double fd = (obj(z + h * dir, scratch) - obj(z - h * dir, scratch)) / (2 * h);
    ok += rel_error(fd, g.dot(dir)) < 1e-6;
  }
  CHECK(ok == 50);
}

TEST_CASE("short datasets and shape mismatches are rejected") {
  std::mt19937_64 gen(6);
  const NoisyDataset d = random_dataset(2, 6, gen);
  const MlpParams p = random_params({2, 4, 2}, gen);
  LossConfig c;
  c.q = 3;
  CHECK_THROWS_AS(loss_value(p, {Matrix::Zero(2, 6)}, d, RkTableau::classical_rk4(), c), ValidationError);
  c.q = 2;
  CHECK_NOTHROW(loss_value(p, {Matrix::Zero(2, 6)}, d, RkTableau::classical_rk4(), c));
  CHECK_THROWS_AS(loss_value(p, {Matrix::Zero(2, 5)}, d, RkTableau::classical_rk4(), c), ValidationError);
}

TEST_CASE("divergence yields a non-finite value with a diagnostic") {
  std::mt19937_64 gen(7);
  NoisyDataset d = random_dataset(1, 10, gen);
  d.observations *= 1e200;
  MlpParams p = MlpParams::zeros({1, 1});
  p.weights[0](0, 0) = 1e200;
  const LossEvaluation e = loss_gradient(p, {Matrix::Zero(1, 10)}, d, RkTableau::classical_rk4(), LossConfig{});
  CHECK_FALSE(std::isfinite(e.value));
  CHECK_FALSE(e.diagnostic.empty());
}

TEST_CASE("larger noise penalty shrinks the fitted noise") {
  std::mt19937_64 gen(8);
  NoisyDataset d;
  d.times = Vector::LinSpaced(40, 0.0, 3.9);
  d.observations.resize(2, 40);
  for (int j = 0; j < 40; ++j) {
    d.observations(0, j) = std::cos(d.times(j)) + 0.05 * std::sin(7.0 * j);
    d.observations(1, j) = -std::sin(d.times(j)) + 0.05 * std::cos(5.0 * j);
  }
  const std::vector<NoisyDataset> data{d};
  double previous = INFINITY;
  for (double gamma : {0.1, 1.0, 10.0}) {
    LossConfig c;
    c.q = 2;
    c.gamma = gamma;
    const MlpParams p0 = xavier_init({2, 8, 2}, 1);
    const JointObjective obj(p0.widths, data, RkTableau::classical_rk4(), c);
    const NoiseEstimate n0{smooth_initial_noise(d.observations, 5)};
    OptimizerOptions opts;
    opts.max_iters = 400;
    const OptimizeReport r =
        lbfgs_minimize([&](const Vector& z, Vector& g) { return obj(z, g); }, obj.pack(p0, {&n0, 1}), opts);
    const double norm = obj.unpack_noise(r.x)[0].values.norm();
    CHECK(norm < previous);
    previous = norm;
  }
}

TEST_CASE("evaluation is deterministic") {
  std::mt19937_64 gen(9);
  const NoisyDataset d = random_dataset(3, 700, gen);
  const MlpParams p = random_params({3, 10, 3}, gen);
  const NoiseEstimate nu{Matrix::Random(3, 700) * 0.1};
  const LossEvaluation a = loss_gradient(p, nu, d, RkTableau::classical_rk4(), LossConfig{});
  const LossEvaluation b = loss_gradient(p, nu, d, RkTableau::classical_rk4(), LossConfig{});
  CHECK(a.value == b.value);
  CHECK(a.gradient == b.gradient);
}

}

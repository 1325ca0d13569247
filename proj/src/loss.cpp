#include "rkid/loss.hpp"

#include <cmath>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

namespace {

// Anchors are processed in fixed-size column blocks; the block layout, and so
// the summation order, depends only on the dataset size.
constexpr Eigen::Index kAnchorBlock = 128;

void check_inputs(const MlpParams& params, std::span<const NoiseEstimate> noises, std::span<const NoisyDataset> data,
                  const RkTableau& tableau, const LossConfig& config) {
  config.validate();
  tableau.validate();
  if (noises.size() != data.size()) throw ValidationError("one noise estimate per dataset is required");
  if (data.empty()) throw ValidationError("at least one dataset is required");
  for (std::size_t k = 0; k < data.size(); ++k) {
    const NoisyDataset& d = data[k];
    if (d.dim() != params.input_dim()) throw ValidationError("dataset dimension does not match network width");
    if (d.times.size() != d.size()) throw ValidationError("dataset time count does not match observations");
    if (noises[k].values.rows() != d.dim() || noises[k].values.cols() != d.size()) {
      throw ValidationError("noise estimate shape does not match its dataset");
    }
    if (d.size() <= 2 * Eigen::Index{config.q}) {
      std::ostringstream msg;
      msg << "dataset " << k << " has m = " << d.size() << " samples; need m > 2q = " << 2 * config.q;
      throw ValidationError(msg.str());
    }
  }
}

// Windowed prediction term of one dataset. When `theta_grad` is given the
// parameter gradient is added into it and the noise gradient into `noise_grad`.
double window_term(const MlpParams& params, const Matrix& noise, const NoisyDataset& data, const RkTableau& tableau,
                   const LossConfig& config, MlpParams* theta_grad, Matrix* noise_grad) {
  const int q = config.q;
  const Matrix& y = data.observations;
  const Vector& t = data.times;
  const Eigen::Index first = q;
  const Eigen::Index end = data.size() - q;  // one past the last anchor

  std::vector<double> omega(static_cast<std::size_t>(q) + 1);
  for (int k = 1; k <= q; ++k) omega[k] = config.omega0 * std::pow(config.rho, -k);

  const bool want_grad = theta_grad != nullptr;
  std::vector<StepTape> tapes(want_grad ? static_cast<std::size_t>(q) : 0);
  std::vector<RowVector> dts(static_cast<std::size_t>(q));
  std::vector<Matrix> residuals(static_cast<std::size_t>(q));

  double total = 0.0;
  for (Eigen::Index start = first; start < end; start += kAnchorBlock) {
    const Eigen::Index cols = std::min(kAnchorBlock, end - start);
    for (int dir : {1, -1}) {
      Matrix z = y.middleCols(start, cols) - noise.middleCols(start, cols);
      double block = 0.0;
      for (int k = 1; k <= q; ++k) {
        if (dir > 0) {
          dts[k - 1] = (t.segment(start + k, cols) - t.segment(start + k - 1, cols)).transpose();
        } else {
          dts[k - 1] = (t.segment(start - k, cols) - t.segment(start - k + 1, cols)).transpose();
        }
        z = rk_step_batch(params, tableau, z, dts[k - 1], want_grad ? &tapes[k - 1] : nullptr);
        const Eigen::Index target = start + dir * k;
        residuals[k - 1] = z + noise.middleCols(target, cols) - y.middleCols(target, cols);
        block += omega[k] * residuals[k - 1].squaredNorm();
      }
      total += block;
      if (!std::isfinite(total)) return total;
      if (!want_grad) continue;

      Matrix lambda = (2.0 * omega[q]) * residuals[q - 1];
      for (int k = q; k >= 1; --k) {
        noise_grad->middleCols(start + dir * k, cols) += (2.0 * omega[k]) * residuals[k - 1];
        lambda = rk_step_backprop_batch(params, tableau, tapes[k - 1], dts[k - 1], lambda, *theta_grad);
        if (k > 1) lambda += (2.0 * omega[k - 1]) * residuals[k - 2];
      }
      noise_grad->middleCols(start, cols) -= lambda;
    }
  }
  return total;
}

LossEvaluation evaluate(const MlpParams& params, std::span<const NoiseEstimate> noises,
                        std::span<const NoisyDataset> data, const RkTableau& tableau, const LossConfig& config,
                        bool want_grad) {
  check_inputs(params, noises, data, tableau, config);
  const Eigen::Index theta_size = params.parameter_count();
  Eigen::Index total_size = theta_size;
  for (const NoiseEstimate& n : noises) total_size += n.values.size();

  LossEvaluation out;
  MlpParams theta_grad;
  if (want_grad) {
    out.gradient = Vector::Zero(total_size);
    theta_grad = MlpParams::zeros(params.widths);
  }
  const double weight_penalty = weight_norm_squared(params);

  Eigen::Index offset = theta_size;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Matrix& nu = noises[k].values;
    Matrix noise_grad;
    if (want_grad) noise_grad = Matrix::Zero(nu.rows(), nu.cols());
    const double windows = window_term(params, nu, data[k], tableau, config, want_grad ? &theta_grad : nullptr,
                                       want_grad ? &noise_grad : nullptr);
    out.value += windows + config.gamma * nu.squaredNorm() + config.beta * weight_penalty;
    if (!std::isfinite(out.value)) {
      std::ostringstream msg;
      msg << "loss became non-finite on dataset " << k << " (learned flow diverged)";
      out.diagnostic = msg.str();
      out.value = std::numeric_limits<double>::infinity();
      return out;
    }
    if (want_grad) {
      noise_grad += (2.0 * config.gamma) * nu;
      out.gradient.segment(offset, nu.size()) = Eigen::Map<const Vector>(noise_grad.data(), noise_grad.size());
    }
    offset += nu.size();
  }

  if (want_grad) {
    const double reg = 2.0 * config.beta * static_cast<double>(data.size());
    for (std::size_t i = 0; i < params.weights.size(); ++i) theta_grad.weights[i] += reg * params.weights[i];
    out.gradient.head(theta_size) = flatten(theta_grad);
  }
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (q < 1) throw ValidationError("loss window half-width q must be >= 1");
  if (!(rho >= 1.0) || !std::isfinite(rho)) throw ValidationError("loss decay rho must be finite and >= 1");
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw ValidationError("loss base weight omega0 must be positive");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("noise penalty gamma must be finite and >= 0");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("weight penalty beta must be finite and >= 0");
}

std::vector<double> window_weights(const LossConfig& config) {
  config.validate();
  std::vector<double> w;
  w.reserve(2 * static_cast<std::size_t>(config.q));
  for (int i = -config.q; i <= config.q; ++i) {
    if (i != 0) w.push_back(config.omega0 * std::pow(config.rho, -std::abs(i)));
  }
  return w;
}

double loss_value(const MlpParams& params, const NoiseEstimate& noise, const NoisyDataset& data,
                  const RkTableau& tableau, const LossConfig& config) {
  return evaluate(params, {&noise, 1}, {&data, 1}, tableau, config, false).value;
}

double loss_multi(const MlpParams& params, std::span<const NoiseEstimate> noises, std::span<const NoisyDataset> data,
                  const RkTableau& tableau, const LossConfig& config) {
  return evaluate(params, noises, data, tableau, config, false).value;
}

LossEvaluation loss_gradient(const MlpParams& params, std::span<const NoiseEstimate> noises,
                             std::span<const NoisyDataset> data, const RkTableau& tableau, const LossConfig& config) {
  return evaluate(params, noises, data, tableau, config, true);
}

LossEvaluation loss_gradient(const MlpParams& params, const NoiseEstimate& noise, const NoisyDataset& data,
                             const RkTableau& tableau, const LossConfig& config) {
  return evaluate(params, {&noise, 1}, {&data, 1}, tableau, config, true);
}

JointObjective::JointObjective(std::vector<int> widths, std::span<const NoisyDataset> data, RkTableau tableau,
                               LossConfig config)
    : widths_(std::move(widths)),
      data_(data),
      tableau_(std::move(tableau)),
      config_(config),
      theta_size_(parameter_count(widths_)) {}

Eigen::Index JointObjective::size() const {
  Eigen::Index total = theta_size_;
  for (const NoisyDataset& d : data_) total += d.observations.size();
  return total;
}

Vector JointObjective::pack(const MlpParams& params, std::span<const NoiseEstimate> noises) const {
  if (noises.size() != data_.size()) throw ValidationError("one noise estimate per dataset is required");
  Vector z(size());
  z.head(theta_size_) = flatten(params);
  Eigen::Index offset = theta_size_;
  for (const NoiseEstimate& n : noises) {
    z.segment(offset, n.values.size()) = Eigen::Map<const Vector>(n.values.data(), n.values.size());
    offset += n.values.size();
  }
  return z;
}

MlpParams JointObjective::unpack_params(const Vector& z) const { return unflatten(widths_, z.head(theta_size_)); }

std::vector<NoiseEstimate> JointObjective::unpack_noise(const Vector& z) const {
  std::vector<NoiseEstimate> out;
  Eigen::Index offset = theta_size_;
  for (const NoisyDataset& d : data_) {
    out.push_back({Eigen::Map<const Matrix>(z.data() + offset, d.dim(), d.size())});
    offset += d.observations.size();
  }
  return out;
}

double JointObjective::operator()(const Vector& z, Vector& grad) const {
  const MlpParams params = unpack_params(z);
  const std::vector<NoiseEstimate> noises = unpack_noise(z);
  LossEvaluation eval = evaluate(params, noises, data_, tableau_, config_, true);
  if (std::isfinite(eval.value)) grad = std::move(eval.gradient);
  return eval.value;
}

}  // namespace rkid

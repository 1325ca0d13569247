#include "rkid/commands.hpp"

#include <cmath>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<Trajectory> cmd_simulate(const ExperimentConfig& config, const fs::path& out) {
  std::vector<Trajectory> runs = clean_trajectories(config);
  if (runs.size() == 1) {
    save_trajectory_csv(out, runs[0].times, runs[0].states);
  } else {
    for (std::size_t k = 0; k < runs.size(); ++k) {
      save_trajectory_csv(out / ("trajectory_" + std::to_string(k) + ".csv"), runs[k].times, runs[k].states);
    }
  }
  return runs;
}

NoisyDataset cmd_corrupt(const fs::path& trajectory_csv, const CorruptionSpec& spec, double percent,
                         const fs::path& out) {
  const Trajectory clean = load_trajectory_csv(trajectory_csv);
  NoisyDataset data = corrupt_trajectory(clean, spec, percent, spec.seed);
  data.provenance["source"] = trajectory_csv.filename().string();
  data.validate();
  save_dataset(out, data);
  return data;
}

NoisyDataset cmd_ingest(const fs::path& csv, const fs::path& out) {
  const Trajectory raw = load_trajectory_csv(csv);
  NoisyDataset data;
  data.times = raw.times;
  data.observations = raw.states;
  data.provenance = {{"generator", "ingest"}, {"source", csv.filename().string()}};
  data.validate();
  save_dataset(out, data);
  return data;
}

TrainOutcome cmd_train(const std::vector<fs::path>& datasets, const TrainSpec& spec, const fs::path& out_dir,
                       const std::string& config_hash) {
  if (datasets.empty()) throw ValidationError("train needs at least one dataset");
  std::vector<NoisyDataset> data;
  for (const fs::path& p : datasets) data.push_back(load_dataset(p));

  std::ostringstream trace;
  trace << "iteration,f,grad_norm,step\n";
  TrainOutcome outcome = train_model(data, spec, [&](const IterationRecord& r) {
    trace << r.iteration << ',' << format_double(r.value) << ',' << format_double(r.grad_norm) << ','
          << format_double(r.step) << '\n';
  });
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::string file = "noise_" + std::to_string(k) + ".csv";
    save_trajectory_csv(out_dir / file, data[k].times, outcome.noise[k].values, "nu");
    outcome.model.noise_files.push_back(file);
  }
  outcome.model.config_hash = config_hash;
  outcome.model.report["trace"] = "trace.csv";
  save_model(out_dir / "model.json", outcome.model);
  write_text_file(out_dir / "trace.csv", trace.str());
  write_text_file(out_dir / "report.json", dump_json(outcome.model.report));
  return outcome;
}

json cmd_evaluate(const fs::path& model_path, const fs::path& dataset_path, std::optional<SystemId> system,
                  const std::optional<fs::path>& noise_csv) {
  const TrainedModel model = load_model(model_path);
  const NoisyDataset data = load_dataset(dataset_path);
  if (model.flow.params.input_dim() != data.dim()) {
    throw ValidationError("model dimension " + std::to_string(model.flow.params.input_dim()) +
                          " does not match dataset dimension " + std::to_string(data.dim()));
  }

  std::optional<NoiseEstimate> noise;
  if (noise_csv) {
    noise = NoiseEstimate{load_trajectory_csv(*noise_csv).states};
  } else if (!model.noise_files.empty()) {
    const fs::path p = model_path.parent_path() / model.noise_files.front();
    if (fs::exists(p)) {
      Matrix values = load_trajectory_csv(p).states;
      if (values.rows() == data.dim() && values.cols() == data.size()) noise = NoiseEstimate{std::move(values)};
    }
  }
  if (noise && (noise->values.rows() != data.dim() || noise->values.cols() != data.size())) {
    throw ValidationError("learned noise shape does not match the dataset");
  }
  return evaluate_model(model.flow, noise ? &*noise : nullptr, data, system);
}

Trajectory predict_orbit(const FlowModel& model, const Vector& x0, const Vector& times) {
  if (x0.size() != model.params.input_dim()) throw ValidationError("x0 length does not match the model");
  if (times.size() < 1) throw ValidationError("prediction needs at least one time");
  Trajectory out;
  out.times = times;
  out.states.resize(x0.size(), times.size());
  out.states.col(0) = x0;
  for (Eigen::Index j = 1; j < times.size(); ++j) {
    const double dt = times(j) - times(j - 1);
    if (!(dt > 0.0)) throw ValidationError("prediction times must be strictly increasing");
    Vector next;
    try {
      next = rk_step(model, out.states.col(j - 1), dt);
    } catch (const DivergenceError&) {
      next.resize(0);
    }
    if (next.size() == 0 || !next.allFinite()) {
      std::ostringstream msg;
      msg << "predicted orbit diverged after t=" << format_double(times(j - 1));
      throw DivergenceError(msg.str());
    }
    out.states.col(j) = next;
  }
  return out;
}

FieldGrid export_field(const MlpParams& params, const PlaneSpec& plane, std::optional<SystemId> analytic) {
  const int n = static_cast<int>(params.input_dim());
  if (plane.axis_u < 0 || plane.axis_u >= n || plane.axis_v < 0 || plane.axis_v >= n) {
    throw ValidationError("plane axis outside the state dimension " + std::to_string(n));
  }
  if (plane.axis_u == plane.axis_v) throw ValidationError("plane axes must differ");
  if (plane.nu < 2 || plane.nv < 2) throw ValidationError("grid resolution must be at least 2");
  if (!std::isfinite(plane.u_lo) || !std::isfinite(plane.u_hi) || !std::isfinite(plane.v_lo) ||
      !std::isfinite(plane.v_hi)) {
    throw ValidationError("grid bounds must be finite");
  }
  if (plane.base.size() != 0 && plane.base.size() != n) throw ValidationError("base point length mismatch");
  if (analytic && system_dimension(*analytic) != n) throw ValidationError("analytic system dimension mismatch");

  const Vector base = plane.base.size() == n ? plane.base : Vector::Zero(n);
  const Vector us = Vector::LinSpaced(plane.nu, plane.u_lo, plane.u_hi);
  const Vector vs = Vector::LinSpaced(plane.nv, plane.v_lo, plane.v_hi);
  FieldGrid grid;
  grid.points.resize(n, plane.nu * plane.nv);
  Eigen::Index col = 0;
  for (int a = 0; a < plane.nu; ++a) {
    for (int b = 0; b < plane.nv; ++b, ++col) {
      grid.points.col(col) = base;
      grid.points(plane.axis_u, col) = us(a);
      grid.points(plane.axis_v, col) = vs(b);
    }
  }
  grid.learned = mlp_forward_batch(params, grid.points);
  if (analytic) {
    const VectorField f = system_field(*analytic);
    grid.analytic = Matrix(n, grid.points.cols());
    for (Eigen::Index k = 0; k < grid.points.cols(); ++k) grid.analytic->col(k) = f(grid.points.col(k));
  }
  return grid;
}

void write_field_csv(const fs::path& path, const FieldGrid& grid) {
  const Eigen::Index n = grid.points.rows();
  std::ostringstream out;
  for (Eigen::Index i = 0; i < n; ++i) out << (i ? "," : "") << 'x' << i + 1;
  for (Eigen::Index i = 0; i < n; ++i) out << ",fhat" << i + 1;
  if (grid.analytic) {
    for (Eigen::Index i = 0; i < n; ++i) out << ",f" << i + 1;
  }
  out << '\n';
  for (Eigen::Index k = 0; k < grid.points.cols(); ++k) {
    for (Eigen::Index i = 0; i < n; ++i) out << (i ? "," : "") << format_double(grid.points(i, k));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(grid.learned(i, k));
    if (grid.analytic) {
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double((*grid.analytic)(i, k));
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace rkid

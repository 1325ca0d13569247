#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rkid/experiment.hpp"

// File-level operations behind the rkid command line tool.
namespace rkid {

/// Simulates the configured system. One trajectory goes to `out`; several go
/// to out/trajectory_<k>.csv.
std::vector<Trajectory> cmd_simulate(const ExperimentConfig& config, const std::filesystem::path& out);

NoisyDataset cmd_corrupt(const std::filesystem::path& trajectory_csv, const CorruptionSpec& spec, double percent,
                         const std::filesystem::path& out);

/// Wraps an external trajectory CSV as a dataset with observations only.
NoisyDataset cmd_ingest(const std::filesystem::path& csv, const std::filesystem::path& out);

/// Writes model.json, noise_<k>.csv, report.json and trace.csv into out_dir.
TrainOutcome cmd_train(const std::vector<std::filesystem::path>& datasets, const TrainSpec& spec,
                       const std::filesystem::path& out_dir, const std::string& config_hash = {});

/// Learned noise defaults to the model's first noise file when its shape
/// matches the dataset.
nlohmann::json cmd_evaluate(const std::filesystem::path& model_path, const std::filesystem::path& dataset_path,
                            std::optional<SystemId> system,
                            const std::optional<std::filesystem::path>& noise_csv = std::nullopt);

/// Iterates the learned flow map from x0 across `times`. Divergence is
/// reported with the last finite time.
Trajectory predict_orbit(const FlowModel& model, const Vector& x0, const Vector& times);

struct PlaneSpec {
  int axis_u = 0;
  int axis_v = 1;
  Vector base;  // values of the coordinates held fixed
  double u_lo = -1.0, u_hi = 1.0;
  double v_lo = -1.0, v_hi = 1.0;
  int nu = 2;
  int nv = 2;
};

/// Grid rows (point, learned field, optional analytic field) over a plane
/// through `base` spanned by two coordinate axes. The v index varies fastest.
struct FieldGrid {
  Matrix points;
  Matrix learned;
  std::optional<Matrix> analytic;
};

FieldGrid export_field(const MlpParams& params, const PlaneSpec& plane, std::optional<SystemId> analytic);
void write_field_csv(const std::filesystem::path& path, const FieldGrid& grid);

}  // namespace rkid

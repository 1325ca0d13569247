#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rkid/corrupt.hpp"
#include "rkid/integrate.hpp"
#include "rkid/io.hpp"
#include "rkid/loss.hpp"
#include "rkid/optimize.hpp"
#include "rkid/systems.hpp"

namespace rkid {

struct SimulationSpec {
  std::vector<double> x0;
  double t0 = 0.0;
  double t1 = 25.0;
  int m = 2500;
  std::string gaps = "fixed";  // "fixed" or "exponential"
  double mean_dt = 0.01;
  std::uint64_t seed = 0;
  // More than one trajectory: initial conditions drawn uniformly from
  // [box_lo, box_hi] instead of x0.
  int trajectories = 1;
  std::vector<double> box_lo;
  std::vector<double> box_hi;
  double max_substep = kDefaultMaxSubstep;
};

struct CorruptionSpec {
  std::string distribution = "gaussian";  // "gaussian" or "student_t"
  std::vector<double> percents{0.0};
  std::optional<int> dof;
  std::uint64_t seed = 0;
};

struct TrainSpec {
  std::vector<int> hidden{32, 32, 32};
  std::string tableau = "rk4";
  LossConfig loss;
  OptimizerOptions optimizer;
  int smoothing_window = 5;
  std::uint64_t init_seed = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::optional<SystemId> system;
  std::filesystem::path input_csv;  // used when no analytic system is named
  SimulationSpec simulation;
  CorruptionSpec corruption;
  TrainSpec train;
  int trials = 1;
  std::filesystem::path output_dir = "runs/experiment";
  nlohmann::json source = nlohmann::json::object();

  void validate() const;
  std::string hash() const;
};

/// Relative paths inside the config resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Ground truth for the configured system: RK4 for smooth systems, implicit
/// midpoint for the double pendulum. Several trajectories when requested.
std::vector<Trajectory> simulate_system(SystemId system, const SimulationSpec& spec);

/// The experiment's clean trajectories (simulated or read from input_csv).
std::vector<Trajectory> clean_trajectories(const ExperimentConfig& config);

NoisyDataset corrupt_trajectory(const Trajectory& clean, const CorruptionSpec& spec, double percent,
                                std::uint64_t seed);

struct TrainOutcome {
  TrainedModel model;
  std::vector<NoiseEstimate> noise;
  OptimizeReport report;
};

/// Xavier-initialised network and smoothed noise warm start, then L-BFGS on
/// the joint loss over all datasets.
TrainOutcome train_model(std::span<const NoisyDataset> data, const TrainSpec& spec,
                         const IterationCallback& on_iteration = {});

/// Metrics object {E_N, E_N_zero, E_f, E_F, moments, true_moments}. Entries
/// that need missing inputs are null. `learned_noise` may be null.
nlohmann::json evaluate_model(const FlowModel& model, const NoiseEstimate* learned_noise, const NoisyDataset& data,
                              std::optional<SystemId> system);

/// Combined metrics over several datasets fit by one model: E_f over the
/// union of clean states, E_N over all samples.
nlohmann::json evaluate_model_multi(const FlowModel& model, std::span<const NoiseEstimate> learned,
                                    std::span<const NoisyDataset> data, std::optional<SystemId> system);

nlohmann::json report_to_json(const OptimizeReport& report);

/// Runs simulate -> corrupt -> train -> evaluate for every noise level and
/// trial, writing artifacts under out_dir and returning the summary table.
nlohmann::json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                              std::ostream* log = nullptr);

}  // namespace rkid

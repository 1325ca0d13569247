// rkid: simulate benchmarks, corrupt and ingest data, train RK-embedded
// network models, evaluate them and run configured experiment sweeps.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rkid/commands.hpp"
#include "rkid/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kIo = 1, kInvalid = 2, kDiverged = 3, kPartial = 4 };

std::optional<rkid::SystemId> system_option(const std::string& name) {
  if (name.empty()) return std::nullopt;
  auto id = rkid::parse_system_id(name);
  if (!id) throw rkid::ValidationError("unknown system '" + name + "'");
  return id;
}

rkid::Vector to_vector(const std::vector<double>& v) {
  rkid::Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

void override_seed(rkid::ExperimentConfig& config, const std::optional<std::uint64_t>& seed) {
  if (!seed) return;
  config.simulation.seed = *seed;
  config.corruption.seed = *seed;
  config.train.init_seed = *seed;
  config.source["seed_override"] = *seed;
}

void emit_json(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << rkid::dump_json(j);
  } else {
    rkid::write_text_file(out, rkid::dump_json(j));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runge-Kutta embedded network system identification"};
  app.require_subcommand(1);

  std::string config_path, out, input, model_path, noise_path, system_name;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> data_paths;

  auto* simulate = app.add_subcommand("simulate", "Simulate a benchmark system to a trajectory CSV");
  simulate->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--seed", seed, "Override every seed in the config");
  simulate->add_option("--out", out, "Output CSV (directory for several trajectories)")->required();

  std::string distribution = "gaussian";
  std::optional<double> percent;
  std::optional<int> dof;
  auto* corrupt = app.add_subcommand("corrupt", "Add measurement noise to a trajectory CSV");
  corrupt->add_option("--input", input, "Clean trajectory CSV")->required()->check(CLI::ExistingFile);
  corrupt->add_option("--config", config_path, "Take the corruption section from this config");
  corrupt->add_option("--distribution", distribution, "gaussian or student_t");
  corrupt->add_option("--percent", percent, "Noise amplitude in percent of each coordinate's std");
  corrupt->add_option("--dof", dof, "Student's t degrees of freedom");
  corrupt->add_option("--seed", seed, "Noise seed");
  corrupt->add_option("--out", out, "Output dataset JSON")->required();

  auto* ingest = app.add_subcommand("ingest", "Wrap an external trajectory CSV as a dataset");
  ingest->add_option("--input", input, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--out", out, "Output dataset JSON")->required();

  auto* train = app.add_subcommand("train", "Fit a model and per-sample noise to one or more datasets");
  train->add_option("--data", data_paths, "Dataset JSON files")->required()->check(CLI::ExistingFile);
  train->add_option("--config", config_path, "Take the train section from this config");
  train->add_option("--seed", seed, "Initialisation seed");
  train->add_option("--out", out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Compute error metrics and noise moments");
  evaluate->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--data", input, "Dataset JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--system", system_name, "Analytic system for the vector-field error");
  evaluate->add_option("--noise", noise_path, "Learned noise CSV (default: the model's own)");
  evaluate->add_option("--out", out, "Metrics JSON (default: stdout)");

  std::vector<double> x0;
  double t0 = 0.0, t1 = 1.0;
  int samples = 101;
  auto* predict = app.add_subcommand("predict", "Iterate the learned flow map from x0");
  predict->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  predict->add_option("--x0", x0, "Initial state")->required()->expected(-1);
  predict->add_option("--t0", t0, "Start time");
  predict->add_option("--t1", t1, "End time");
  predict->add_option("--m", samples, "Number of output samples including x0")->check(CLI::PositiveNumber);
  predict->add_option("--out", out, "Output trajectory CSV")->required();

  rkid::PlaneSpec plane;
  std::vector<int> axes{0, 1};
  std::vector<double> base, u_range{-1.0, 1.0}, v_range{-1.0, 1.0};
  auto* export_field = app.add_subcommand("export-field", "Evaluate the learned field on a planar grid");
  export_field->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  export_field->add_option("--axes", axes, "Two zero-based coordinates spanning the plane")->expected(2);
  export_field->add_option("--base", base, "Point the plane passes through")->expected(-1);
  export_field->add_option("--u-range", u_range, "Range along the first axis")->expected(2);
  export_field->add_option("--v-range", v_range, "Range along the second axis")->expected(2);
  export_field->add_option("--nu", plane.nu, "Grid points along the first axis");
  export_field->add_option("--nv", plane.nv, "Grid points along the second axis");
  export_field->add_option("--analytic", system_name, "Also write this system's exact field");
  export_field->add_option("--out", out, "Output grid CSV")->required();

  auto* run = app.add_subcommand("run-experiment", "Simulate, corrupt, train and evaluate a full sweep");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override every seed in the config");
  run->add_option("--out", out, "Output directory (default: the config's)");

  std::string validate_data, validate_model;
  auto* validate = app.add_subcommand("validate", "Check a config, dataset or model file");
  validate->add_option("--config", config_path, "Experiment config")->check(CLI::ExistingFile);
  validate->add_option("--data", validate_data, "Dataset JSON")->check(CLI::ExistingFile);
  validate->add_option("--model", validate_model, "Model JSON")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (simulate->parsed()) {
      auto config = rkid::load_experiment_config(config_path);
      override_seed(config, seed);
      const auto runs = rkid::cmd_simulate(config, out);
      std::cerr << "wrote " << runs.size() << " trajectory file(s) with " << runs.front().size() << " samples\n";
    } else if (corrupt->parsed()) {
      rkid::CorruptionSpec spec;
      if (!config_path.empty()) spec = rkid::load_experiment_config(config_path).corruption;
      if (corrupt->count("--distribution")) spec.distribution = distribution;
      if (dof) spec.dof = dof;
      if (seed) spec.seed = *seed;
      rkid::cmd_corrupt(input, spec, percent.value_or(spec.percents.front()), out);
    } else if (ingest->parsed()) {
      rkid::cmd_ingest(input, out);
    } else if (train->parsed()) {
      rkid::TrainSpec spec;
      std::string hash;
      if (!config_path.empty()) {
        auto config = rkid::load_experiment_config(config_path);
        spec = config.train;
        hash = config.hash();
      }
      if (seed) spec.init_seed = *seed;
      std::vector<fs::path> paths(data_paths.begin(), data_paths.end());
      const auto outcome = rkid::cmd_train(paths, spec, out, hash);
      std::cerr << "termination " << rkid::termination_name(outcome.report.termination) << " after "
                << outcome.report.iterations << " iterations, loss " << outcome.report.value << "\n";
      if (outcome.report.termination == rkid::Termination::kLineSearchFailure) return kPartial;
    } else if (evaluate->parsed()) {
      std::optional<fs::path> noise;
      if (!noise_path.empty()) noise = noise_path;
      emit_json(rkid::cmd_evaluate(model_path, input, system_option(system_name), noise), out);
    } else if (predict->parsed()) {
      const auto model = rkid::load_model(model_path);
      const rkid::Vector times =
          samples == 1 ? rkid::Vector::Constant(1, t0) : rkid::uniform_times(t0, t1, samples);
      const auto orbit = rkid::predict_orbit(model.flow, to_vector(x0), times);
      rkid::save_trajectory_csv(out, orbit.times, orbit.states);
    } else if (export_field->parsed()) {
      const auto model = rkid::load_model(model_path);
      plane.axis_u = axes[0];
      plane.axis_v = axes[1];
      plane.base = to_vector(base);
      plane.u_lo = u_range[0];
      plane.u_hi = u_range[1];
      plane.v_lo = v_range[0];
      plane.v_hi = v_range[1];
      const auto grid = rkid::export_field(model.flow.params, plane, system_option(system_name));
      rkid::write_field_csv(out, grid);
    } else if (run->parsed()) {
      auto config = rkid::load_experiment_config(config_path);
      override_seed(config, seed);
      const fs::path dir = out.empty() ? config.output_dir : fs::path(out);
      const json summary = rkid::run_experiment(config, dir, &std::cerr);
      bool partial = false;
      for (const json& t : summary["trials"]) {
        if (t.value("status", "") != "ok" || t.value("termination", "") == "line-search-failure") partial = true;
      }
      std::cout << rkid::dump_json(summary["rows"]);
      if (partial) return kPartial;
    } else if (validate->parsed()) {
      if (config_path.empty() && validate_data.empty() && validate_model.empty()) {
        throw rkid::ValidationError("validate needs --config, --data or --model");
      }
      if (!config_path.empty()) rkid::load_experiment_config(config_path);
      if (!validate_data.empty()) rkid::load_dataset(validate_data).validate();
      if (!validate_model.empty()) rkid::load_model(validate_model);
      std::cout << "ok\n";
    }
  } catch (const rkid::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const rkid::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const rkid::ConvergenceError& e) {
    std::cerr << "did not converge: " << e.what() << "\n";
    return kDiverged;
  } catch (const rkid::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}

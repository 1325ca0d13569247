#include "rkid/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "rkid/errors.hpp"
#include "rkid/metrics.hpp"
#include "rkid/network.hpp"

namespace rkid {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config field '") + key + "': " + e.what());
  }
}

OptimizerOptions optimizer_from_json(const json& j) {
  OptimizerOptions o;
  o.memory = get_or(j, "memory", o.memory);
  o.max_iters = get_or(j, "max_iters", o.max_iters);
  o.grad_tol = get_or(j, "grad_tol", o.grad_tol);
  o.f_tol = get_or(j, "f_tol", o.f_tol);
  o.wolfe_c1 = get_or(j, "wolfe_c1", o.wolfe_c1);
  o.wolfe_c2 = get_or(j, "wolfe_c2", o.wolfe_c2);
  o.max_linesearch = get_or(j, "max_linesearch", o.max_linesearch);
  o.validate();
  return o;
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json moments_json(const Matrix& noise) {
  json out = {{"mu", json::array()}, {"var", json::array()}, {"skew", json::array()}, {"kurt", json::array()}};
  for (Eigen::Index i = 0; i < noise.rows(); ++i) {
    const Vector row = noise.row(i).transpose();
    try {
      const Moments mo = noise_moments({row.data(), static_cast<std::size_t>(row.size())});
      out["mu"].push_back(mo.mean);
      out["var"].push_back(mo.variance);
      out["skew"].push_back(mo.skew);
      out["kurt"].push_back(mo.kurtosis);
    } catch (const ValidationError&) {
      for (const char* key : {"mu", "var", "skew", "kurt"}) out[key].push_back(nullptr);
    }
  }
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string level_dir(double percent) { return "noise_" + format_double(percent); }

struct Stats {
  json mean = nullptr;
  json std = nullptr;
  json median = nullptr;
  int ignored = 0;
};

Stats summarize(const std::vector<double>& values) {
  Stats s;
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  s.ignored = static_cast<int>(values.size() - finite.size());
  if (finite.empty()) return s;
  double mean = 0.0;
  for (double v : finite) mean += v;
  mean /= static_cast<double>(finite.size());
  s.mean = mean;
  if (finite.size() > 1) {
    double ss = 0.0;
    for (double v : finite) ss += (v - mean) * (v - mean);
    s.std = std::sqrt(ss / static_cast<double>(finite.size() - 1));
  }
  s.median = median_over_trials(finite).median;
  return s;
}

double metric_or_nan(const json& metrics, const char* key) {
  if (!metrics.contains(key) || !metrics.at(key).is_number()) return std::numeric_limits<double>::quiet_NaN();
  return metrics.at(key).get<double>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!system && input_csv.empty()) throw ValidationError("config needs either 'system' or 'input_csv'");
  if (system) {
    const int n = system_dimension(*system);
    if (simulation.trajectories < 1) throw ValidationError("simulation.trajectories must be >= 1");
    if (simulation.trajectories == 1 && static_cast<int>(simulation.x0.size()) != n) {
      throw ValidationError("simulation.x0 length does not match the system dimension");
    }
    if (simulation.trajectories > 1 &&
        (static_cast<int>(simulation.box_lo.size()) != n || static_cast<int>(simulation.box_hi.size()) != n)) {
      throw ValidationError("simulation.box_lo/box_hi must match the system dimension");
    }
    if (simulation.m < 2) throw ValidationError("simulation.m must be at least 2");
    if (simulation.gaps != "fixed" && simulation.gaps != "exponential") {
      throw ValidationError("simulation.gaps must be 'fixed' or 'exponential'");
    }
  } else if (!std::filesystem::exists(input_csv)) {
    throw ValidationError("input_csv '" + input_csv.string() + "' does not exist");
  }
  if (corruption.distribution != "gaussian" && corruption.distribution != "student_t") {
    throw ValidationError("corruption.distribution must be 'gaussian' or 'student_t'");
  }
  if (corruption.distribution == "student_t" && !corruption.dof) {
    throw ValidationError("student_t corruption requires 'dof'");
  }
  if (corruption.percents.empty()) throw ValidationError("corruption.percent needs at least one level");
  for (double p : corruption.percents) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("noise percent must be finite and >= 0");
  }
  if (trials < 1) throw ValidationError("trials must be >= 1");
  for (int h : train.hidden) {
    if (h < 1) throw ValidationError("hidden widths must be positive");
  }
  if (!tableau_by_name(train.tableau)) throw ValidationError("unknown tableau '" + train.tableau + "'");
  train.loss.validate();
  train.optimizer.validate();
  if (train.smoothing_window < 1 || train.smoothing_window % 2 == 0) {
    throw ValidationError("smoothing_window must be a positive odd count");
  }
}

std::string ExperimentConfig::hash() const { return content_hash(source.dump()); }

ExperimentConfig parse_experiment_config(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("experiment config must be a JSON object");
  ExperimentConfig c;
  c.source = j;
  c.name = get_or<std::string>(j, "name", c.name);
  if (j.contains("system") && !j.at("system").is_null()) {
    const auto name = j.at("system").get<std::string>();
    c.system = parse_system_id(name);
    if (!c.system) throw ValidationError("unknown system '" + name + "'");
  }
  if (j.contains("input_csv")) {
    std::filesystem::path p = j.at("input_csv").get<std::string>();
    c.input_csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }

  const json sim = j.value("simulation", json::object());
  SimulationSpec& s = c.simulation;
  s.x0 = get_or(sim, "x0", s.x0);
  s.t0 = get_or(sim, "t0", s.t0);
  s.t1 = get_or(sim, "t1", s.t1);
  s.m = get_or(sim, "m", s.m);
  s.gaps = get_or(sim, "gaps", s.gaps);
  s.mean_dt = get_or(sim, "mean_dt", s.mean_dt);
  s.seed = get_or(sim, "seed", s.seed);
  s.trajectories = get_or(sim, "trajectories", s.trajectories);
  s.box_lo = get_or(sim, "box_lo", s.box_lo);
  s.box_hi = get_or(sim, "box_hi", s.box_hi);
  s.max_substep = get_or(sim, "max_substep", s.max_substep);

  const json cor = j.value("corruption", json::object());
  CorruptionSpec& k = c.corruption;
  k.distribution = get_or(cor, "distribution", k.distribution);
  if (cor.contains("percent")) {
    const json& p = cor.at("percent");
    k.percents = p.is_array() ? p.get<std::vector<double>>() : std::vector<double>{p.get<double>()};
  }
  if (cor.contains("dof") && !cor.at("dof").is_null()) k.dof = cor.at("dof").get<int>();
  k.seed = get_or(cor, "seed", k.seed);

  const json tr = j.value("train", json::object());
  TrainSpec& t = c.train;
  t.hidden = get_or(tr, "hidden", t.hidden);
  t.tableau = get_or(tr, "tableau", t.tableau);
  t.loss = loss_config_from_json(tr.value("loss", json::object()));
  t.optimizer = optimizer_from_json(tr.value("optimizer", json::object()));
  t.smoothing_window = get_or(tr, "smoothing_window", t.smoothing_window);
  t.init_seed = get_or(tr, "seed", t.init_seed);

  c.trials = get_or(j, "trials", c.trials);
  if (j.contains("output")) {
    std::filesystem::path p = j.at("output").get<std::string>();
    c.output_dir = p;
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  try {
    return parse_experiment_config(parse_json_file(path), path.parent_path());
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::vector<Trajectory> simulate_system(SystemId system, const SimulationSpec& spec) {
  const int n = system_dimension(system);
  const VectorField field = system_field(system);

  std::vector<Vector> starts;
  if (spec.trajectories <= 1) {
    if (static_cast<int>(spec.x0.size()) != n) throw ValidationError("x0 length does not match the system dimension");
    starts.push_back(to_vector(spec.x0));
  } else {
    std::mt19937_64 gen(spec.seed);
    for (int k = 0; k < spec.trajectories; ++k) {
      Vector x(n);
      for (int i = 0; i < n; ++i) {
        std::uniform_real_distribution<double> u(spec.box_lo[i], spec.box_hi[i]);
        x(i) = u(gen);
      }
      starts.push_back(std::move(x));
    }
  }

  std::vector<Trajectory> out;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const Vector times = spec.gaps == "exponential"
                             ? sample_exponential_times(spec.mean_dt, spec.t0, spec.m, spec.seed + 7919 * k)
                             : uniform_times(spec.t0, spec.t1, spec.m);
    if (system == SystemId::kDoublePendulum) {
      ImplicitMidpointOptions opts;
      opts.max_substep = spec.max_substep;
      out.push_back(implicit_midpoint_simulate(field, starts[k], times, opts));
    } else {
      out.push_back(rk4_simulate(field, starts[k], times, spec.max_substep));
    }
  }
  return out;
}

std::vector<Trajectory> clean_trajectories(const ExperimentConfig& config) {
  if (config.system) return simulate_system(*config.system, config.simulation);
  return {load_trajectory_csv(config.input_csv)};
}

NoisyDataset corrupt_trajectory(const Trajectory& clean, const CorruptionSpec& spec, double percent,
                                std::uint64_t seed) {
  if (spec.distribution == "gaussian") return add_gaussian_noise(clean, percent, seed);
  if (spec.distribution == "student_t") {
    if (!spec.dof) throw ValidationError("student_t corruption requires 'dof'");
    return add_student_t_noise(clean, percent, *spec.dof, seed);
  }
  throw ValidationError("unknown noise distribution '" + spec.distribution + "'");
}

json report_to_json(const OptimizeReport& report) {
  return {{"termination", termination_name(report.termination)},
          {"iterations", report.iterations},
          {"evaluations", report.evaluations},
          {"loss", finite_or_null(report.value)},
          {"grad_norm", finite_or_null(report.grad_norm)}};
}

TrainOutcome train_model(std::span<const NoisyDataset> data, const TrainSpec& spec,
                         const IterationCallback& on_iteration) {
  if (data.empty()) throw ValidationError("training needs at least one dataset");
  const int n = static_cast<int>(data.front().dim());
  for (const NoisyDataset& d : data) {
    d.validate();
    if (d.dim() != n) throw ValidationError("all training datasets must share the state dimension");
  }
  const auto tableau = tableau_by_name(spec.tableau);
  if (!tableau) throw ValidationError("unknown tableau '" + spec.tableau + "'");

  const std::vector<int> widths = make_widths(n, spec.hidden);
  const MlpParams init = xavier_init(widths, spec.init_seed);
  std::vector<NoiseEstimate> warm;
  for (const NoisyDataset& d : data) {
    const int window = std::min<int>(spec.smoothing_window, static_cast<int>(d.size()) | 1);
    warm.push_back({smooth_initial_noise(d.observations, std::min<int>(window, static_cast<int>(d.size())))});
  }

  const JointObjective objective(widths, data, *tableau, spec.loss);
  const Vector z0 = objective.pack(init, warm);
  OptimizeReport report = lbfgs_minimize([&](const Vector& z, Vector& g) { return objective(z, g); }, z0,
                                         spec.optimizer, on_iteration);

  TrainOutcome out;
  out.model.flow = FlowModel{objective.unpack_params(report.x), *tableau};
  out.model.loss = spec.loss;
  out.model.report = report_to_json(report);
  out.noise = objective.unpack_noise(report.x);
  out.report = std::move(report);
  return out;
}

json evaluate_model(const FlowModel& model, const NoiseEstimate* learned_noise, const NoisyDataset& data,
                    std::optional<SystemId> system) {
  if (model.params.input_dim() != data.dim()) throw ValidationError("model and dataset dimensions differ");
  json out = {{"E_N", nullptr}, {"E_N_zero", nullptr}, {"E_f", nullptr}, {"E_F", nullptr},
              {"moments", nullptr}, {"true_moments", nullptr}};
  if (data.true_noise) {
    const Matrix zero = Matrix::Zero(data.dim(), data.size());
    out["E_N_zero"] = noise_error(zero, *data.true_noise);
    if (learned_noise) out["E_N"] = noise_error(learned_noise->values, *data.true_noise);
    out["true_moments"] = moments_json(*data.true_noise);
  }
  if (learned_noise) out["moments"] = moments_json(learned_noise->values);
  if (data.truth) {
    if (system) out["E_f"] = finite_or_null(vector_field_error(model.params, system_field(*system), *data.truth));
    const double orbit = forward_orbit_error(model, Trajectory{data.times, *data.truth});
    out["E_F"] = finite_or_null(orbit);
    if (!std::isfinite(orbit)) out["E_F_diverged"] = true;
  }
  return out;
}

json evaluate_model_multi(const FlowModel& model, std::span<const NoiseEstimate> learned,
                          std::span<const NoisyDataset> data, std::optional<SystemId> system) {
  if (data.size() == 1) return evaluate_model(model, learned.empty() ? nullptr : &learned[0], data[0], system);
  if (!learned.empty() && learned.size() != data.size()) throw ValidationError("one noise estimate per dataset");
  json out = {{"E_N", nullptr}, {"E_N_zero", nullptr}, {"E_f", nullptr}, {"E_F", nullptr},
              {"moments", nullptr}, {"true_moments", nullptr}};
  Eigen::Index total = 0;
  const Eigen::Index n = data.front().dim();
  for (const NoisyDataset& d : data) total += d.size();
  const bool have_truth = std::all_of(data.begin(), data.end(), [](const NoisyDataset& d) { return d.truth.has_value(); });
  const bool have_noise =
      std::all_of(data.begin(), data.end(), [](const NoisyDataset& d) { return d.true_noise.has_value(); });

  Matrix states(n, total), noise(n, total), estimate(n, total);
  Eigen::Index col = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const Eigen::Index m = data[k].size();
    if (have_truth) states.middleCols(col, m) = *data[k].truth;
    if (have_noise) noise.middleCols(col, m) = *data[k].true_noise;
    if (!learned.empty()) estimate.middleCols(col, m) = learned[k].values;
    col += m;
  }
  if (have_noise) {
    out["E_N_zero"] = noise_error(Matrix::Zero(n, total), noise);
    if (!learned.empty()) out["E_N"] = noise_error(estimate, noise);
    out["true_moments"] = moments_json(noise);
  }
  if (!learned.empty()) out["moments"] = moments_json(estimate);
  if (have_truth && system) out["E_f"] = finite_or_null(vector_field_error(model.params, system_field(*system), states));
  return out;
}

json run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir, std::ostream* log) {
  config.validate();
  const std::vector<Trajectory> clean = clean_trajectories(config);
  for (std::size_t k = 0; k < clean.size(); ++k) {
    save_trajectory_csv(out_dir / ("truth_" + std::to_string(k) + ".csv"), clean[k].times, clean[k].states);
  }

  json summary;
  summary["name"] = config.name;
  summary["config_hash"] = config.hash();
  summary["rows"] = json::array();
  summary["trials"] = json::array();

  for (double percent : config.corruption.percents) {
    std::vector<double> en, ef, eorbit;
    int completed = 0;
    for (int trial = 0; trial < config.trials; ++trial) {
      const std::filesystem::path dir = out_dir / level_dir(percent) / ("trial_" + std::to_string(trial));
      json row = {{"percent", percent}, {"trial", trial}};
      try {
        std::vector<NoisyDataset> data;
        for (std::size_t k = 0; k < clean.size(); ++k) {
          data.push_back(corrupt_trajectory(clean[k], config.corruption, percent,
                                            config.corruption.seed + static_cast<std::uint64_t>(trial) + 104729 * k));
          data.back().provenance["config_hash"] = config.hash();
          data.back().provenance["trajectory"] = k;
          save_dataset(dir / ("dataset_" + std::to_string(k) + ".json"), data.back());
        }

        TrainSpec spec = config.train;
        spec.init_seed += static_cast<std::uint64_t>(trial);
        std::ostringstream trace;
        trace << "iteration,f,grad_norm,step\n";
        TrainOutcome outcome = train_model(data, spec, [&](const IterationRecord& r) {
          trace << r.iteration << ',' << format_double(r.value) << ',' << format_double(r.grad_norm) << ','
                << format_double(r.step) << '\n';
        });
        write_text_file(dir / "trace.csv", trace.str());

        for (std::size_t k = 0; k < data.size(); ++k) {
          const std::string file = "noise_" + std::to_string(k) + ".csv";
          save_trajectory_csv(dir / file, data[k].times, outcome.noise[k].values, "nu");
          outcome.model.noise_files.push_back(file);
        }
        outcome.model.config_hash = config.hash();
        save_model(dir / "model.json", outcome.model);

        const json metrics = evaluate_model_multi(outcome.model.flow, outcome.noise, data, config.system);
        write_text_file(dir / "metrics.json", dump_json(metrics));

        row["status"] = "ok";
        row["termination"] = termination_name(outcome.report.termination);
        row["iterations"] = outcome.report.iterations;
        row["loss"] = finite_or_null(outcome.report.value);
        row["E_N"] = metrics["E_N"];
        row["E_N_zero"] = metrics["E_N_zero"];
        row["E_f"] = metrics["E_f"];
        row["E_F"] = metrics["E_F"];
        en.push_back(metric_or_nan(metrics, "E_N"));
        ef.push_back(metric_or_nan(metrics, "E_f"));
        eorbit.push_back(metrics.contains("E_F_diverged") ? std::numeric_limits<double>::infinity()
                                                          : metric_or_nan(metrics, "E_F"));
        ++completed;
      } catch (const std::exception& e) {
        row["status"] = std::string("failed: ") + e.what();
      }
      if (log) {
        *log << config.name << " noise " << percent << "% trial " << trial << ": " << row.value("status", "")
             << " E_N=" << row.value("E_N", json(nullptr)) << " E_f=" << row.value("E_f", json(nullptr))
             << " E_F=" << row.value("E_F", json(nullptr)) << std::endl;
      }
      summary["trials"].push_back(row);
    }

    const Stats sn = summarize(en), sf = summarize(ef), so = summarize(eorbit);
    summary["rows"].push_back({{"percent", percent},
                               {"trials", config.trials},
                               {"completed", completed},
                               {"E_N_mean", sn.mean},
                               {"E_N_std", sn.std},
                               {"E_N_median", sn.median},
                               {"E_f_mean", sf.mean},
                               {"E_f_std", sf.std},
                               {"E_f_median", sf.median},
                               {"E_F_median", so.median},
                               {"E_F_ignored", so.ignored}});
  }

  write_text_file(out_dir / "summary.json", dump_json(summary));
  std::ostringstream csv;
  csv << "percent,trials,completed,E_N_mean,E_N_std,E_f_mean,E_f_std,E_F_median,E_F_ignored\n";
  for (const json& r : summary["rows"]) {
    auto cell = [](const json& v) { return v.is_number() ? format_double(v.get<double>()) : std::string(); };
    csv << cell(r["percent"]) << ',' << r["trials"].get<int>() << ',' << r["completed"].get<int>() << ','
        << cell(r["E_N_mean"]) << ',' << cell(r["E_N_std"]) << ',' << cell(r["E_f_mean"]) << ','
        << cell(r["E_f_std"]) << ',' << cell(r["E_F_median"]) << ',' << r["E_F_ignored"].get<int>() << '\n';
  }
  write_text_file(out_dir / "summary.csv", csv.str());
  return summary;
}

}  // namespace rkid

// Acceptance checks, one PASS/FAIL line per criterion. Usage:
//   rkid_acceptance <group>    group: fast | cubic | lorenz | pendulum | multi | ingest | all

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "rkid/commands.hpp"
#include "rkid/errors.hpp"
#include "rkid/metrics.hpp"

using namespace rkid;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const fs::path kConfigs = RKID_CONFIG_DIR;
const fs::path kWork = fs::path("acceptance");

// One finished trial with its artifacts loaded back from disk.
struct Trial {
  json row;
  json metrics;
  TrainedModel model;
  std::vector<NoisyDataset> data;
  std::vector<Matrix> learned;
};

struct Sweep {
  json summary;
  std::vector<Trial> trials;
};

Sweep run_config(const ExperimentConfig& config) {
  const fs::path out = kWork / config.name;
  fs::remove_all(out);
  Sweep s;
  s.summary = run_experiment(config, out, &std::cout);
  for (const json& row : s.summary["trials"]) {
    Trial t;
    t.row = row;
    if (row["status"] == "ok") {
      const fs::path dir = out / ("noise_" + format_double(row["percent"].get<double>())) /
                           ("trial_" + std::to_string(row["trial"].get<int>()));
      t.metrics = parse_json_file(dir / "metrics.json");
      t.model = load_model(dir / "model.json");
      for (std::size_t k = 0; k < t.model.noise_files.size(); ++k) {
        t.data.push_back(load_dataset(dir / ("dataset_" + std::to_string(k) + ".json")));
        t.learned.push_back(load_trajectory_csv(dir / t.model.noise_files[k]).states);
      }
    }
    s.trials.push_back(std::move(t));
  }
  return s;
}

Sweep run_config(const std::string& file) { return run_config(load_experiment_config(kConfigs / file)); }

double median_of(const Sweep& s, const char* key) {
  std::vector<double> v;
  for (const Trial& t : s.trials) {
    v.push_back(t.metrics.contains(key) && t.metrics[key].is_number() ? t.metrics[key].get<double>() : NAN);
  }
  return median_over_trials(v).median;
}

bool all_ok(const Sweep& s) {
  for (const Trial& t : s.trials) {
    if (t.row["status"] != "ok") return false;
  }
  return true;
}

// Denoising gain on every successful fit with at least 5% noise.
void denoising_gain(const std::vector<const Sweep*>& sweeps, const std::string& label) {
  int checked = 0, passed = 0;
  double worst = 0.0;
  for (const Sweep* s : sweeps) {
    for (const Trial& t : s->trials) {
      if (t.row["status"] != "ok" || t.row["percent"].get<double>() < 5.0) continue;
      const double ratio = t.metrics["E_N"].get<double>() / t.metrics["E_N_zero"].get<double>();
      worst = std::max(worst, ratio);
      ++checked;
      passed += ratio < 0.5;
    }
  }
  verdict(9, checked > 0 && passed == checked,
          label + ": " + std::to_string(passed) + "/" + std::to_string(checked) +
              " fits with E_N < 0.5 E_N(zero); worst ratio " + fmt("%.3g", worst));
}

// Learned noise norm against the injected one, for fits with injected noise.
void degenerate_guard(const std::vector<const Sweep*>& sweeps, const std::string& label) {
  int checked = 0, passed = 0;
  double worst = 0.0;
  for (const Sweep* s : sweeps) {
    for (const Trial& t : s->trials) {
      if (t.row["status"] != "ok") continue;
      for (std::size_t k = 0; k < t.data.size(); ++k) {
        const double truth = t.data[k].true_noise ? t.data[k].true_noise->norm() : 0.0;
        if (!(truth > 0.0)) continue;
        const double ratio = t.learned[k].norm() / truth;
        worst = std::max(worst, ratio);
        ++checked;
        passed += ratio <= 2.0;
      }
    }
  }
  verdict(10, checked > 0 && passed == checked,
          label + ": " + std::to_string(passed) + "/" + std::to_string(checked) +
              " fits with |N_hat| <= 2 |N|; largest ratio " + fmt("%.3f", worst));
}

MlpParams random_params(const std::vector<int>& widths, std::mt19937_64& gen) {
  std::normal_distribution<double> normal(0.0, 0.5);
  MlpParams p = MlpParams::zeros(widths);
  for (auto& w : p.weights) w = w.unaryExpr([&](double) { return normal(gen); });
  for (auto& b : p.biases) b = b.unaryExpr([&](double) { return normal(gen); });
  return p;
}

void gradient_exactness() {
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> gap(0.01, 0.1);
  std::normal_distribution<double> normal;
  const double h = 1e-6;
  double worst = 0.0;
  int passed = 0;
  for (int inst = 0; inst < 50; ++inst) {
    NoisyDataset d;
    d.times.resize(20);
    d.times(0) = 0.0;
    for (int j = 1; j < 20; ++j) d.times(j) = d.times(j - 1) + gap(gen);
    d.observations = Matrix(2, 20).unaryExpr([&](double) { return normal(gen); });
    LossConfig c;
    c.q = 1 + inst % 3;
    c.beta = 1e-3;
    const RkTableau t = inst % 2 ? RkTableau::kutta3() : RkTableau::classical_rk4();
    const MlpParams p = random_params({2, 8, 2}, gen);
    const NoiseEstimate nu{Matrix(2, 20).unaryExpr([&](double) { return 0.1 * normal(gen); })};
    const std::vector<NoisyDataset> data{d};
    const JointObjective obj(p.widths, data, t, c);
    const Vector z = obj.pack(p, {&nu, 1});
    Vector g(z.size()), scratch(z.size()), fd(z.size());
    obj(z, g);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      Vector zp = z, zm = z;
      zp(i) += h;
      zm(i) -= h;
      fd(i) = (obj(zp, scratch) - obj(zm, scratch)) / (2 * h);
    }
    const double rel = (fd - g).norm() / g.norm();
    worst = std::max(worst, rel);
    passed += rel < 1e-6;
  }
  verdict(1, passed == 50,
          std::to_string(passed) + "/50 instances within 1e-6; worst relative error " + fmt("%.2e", worst));
}

void rk_order() {
  Vector x0(3);
  x0 << 1, 1, 1;
  const auto f = system_field(SystemId::kLorenz);
  const Matrix ref = rk4_simulate(f, x0, uniform_times(0, 1, 801), kNoSubstepping).states;
  auto grid_error = [&](Eigen::Index steps) {
    const Matrix s = rk4_simulate(f, x0, uniform_times(0, 1, steps + 1), kNoSubstepping).states;
    const Eigen::Index stride = 800 / steps;
    double worst = 0.0;
    for (Eigen::Index j = 0; j <= steps; ++j) worst = std::max(worst, (s.col(j) - ref.col(j * stride)).norm());
    return worst;
  };
  const double order = std::log2(grid_error(100) / grid_error(200));
  verdict(2, order >= 3.8 && order <= 4.2, "observed order " + fmt("%.3f", order) + " (h = 0.01 vs 0.005)");
}

void symplectic_energy() {
  Vector x0(4);
  x0 << 1, 0, 0, 0;
  const Trajectory tr =
      implicit_midpoint_simulate(system_field(SystemId::kDoublePendulum), x0, uniform_times(0, 50, 5001));
  const double e0 = double_pendulum_energy(x0);
  double drift = 0.0;
  for (Eigen::Index j = 0; j < tr.size(); ++j) {
    drift = std::max(drift, std::abs(double_pendulum_energy(tr.states.col(j)) - e0) / std::abs(e0));
  }
  verdict(3, drift < 1e-4, "max relative energy deviation " + fmt("%.2e", drift));
}

bool strong_wolfe(const IterationRecord& r, const OptimizerOptions& o) {
  return r.dphi0 < 0.0 && r.value <= r.phi0 + o.wolfe_c1 * r.step * r.dphi0 + 1e-12 * std::abs(r.phi0) &&
         std::abs(r.dphi) <= o.wolfe_c2 * std::abs(r.dphi0);
}

void optimizer_suite() {
  const OptimizerOptions o;
  int steps = 0, wolfe = 0;
  auto count = [&](const OptimizeReport& r) {
    for (const auto& rec : r.trace) {
      ++steps;
      wolfe += strong_wolfe(rec, o);
    }
  };
  Vector a(5);
  a << 3, -1, 0.5, 2, -4;
  const OptimizeReport q = lbfgs_minimize(
      [&](const Vector& x, Vector& g) {
        g = 2.0 * (x - a);
        return (x - a).squaredNorm();
      },
      Vector::Zero(5), o);
  count(q);
  const double qerr = (q.x - a).norm();

  Vector x0(2);
  x0 << -1.2, 1.0;
  OptimizerOptions tight = o;
  tight.grad_tol = 1e-10;
  const OptimizeReport r = lbfgs_minimize(
      [](const Vector& x, Vector& g) {
        const double u = 1 - x(0), v = x(1) - x(0) * x(0);
        g(0) = -2 * u - 400 * x(0) * v;
        g(1) = 200 * v;
        return u * u + 100 * v * v;
      },
      x0, tight);
  count(r);
  const double rerr = (r.x - Vector::Ones(2)).lpNorm<Eigen::Infinity>();
  const bool pass = qerr < 1e-10 && rerr < 1e-6 && wolfe == steps;
  verdict(12, pass,
          "quadratic error " + fmt("%.1e", qerr) + ", Rosenbrock error " + fmt("%.1e", rerr) + ", strong Wolfe on " +
              std::to_string(wolfe) + "/" + std::to_string(steps) + " accepted steps");
}

json small_cubic_config() {
  return json::parse(R"({
    "name": "determinism_small",
    "system": "cubic",
    "simulation": {"x0": [2, 0], "t1": 5, "m": 500},
    "corruption": {"percent": [10], "seed": 11},
    "train": {"hidden": [16, 16], "loss": {"gamma": 0.01}, "optimizer": {"max_iters": 150}, "seed": 5},
    "trials": 2
  })");
}

bool identical_reruns(const json& config_json, const std::string& tag, std::string& detail) {
  const ExperimentConfig config = parse_experiment_config(config_json);
  const fs::path a = kWork / (tag + "_a"), b = kWork / (tag + "_b");
  fs::remove_all(a);
  fs::remove_all(b);
  const json sa = run_experiment(config, a), sb = run_experiment(config, b);
  int files = 0, same = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), a);
    ++files;
    same += fs::exists(b / rel) && read_text_file(entry.path()) == read_text_file(b / rel);
  }
  detail = std::to_string(same) + "/" + std::to_string(files) + " artifact files byte-identical";
  return sa == sb && files > 0 && same == files;
}

void group_fast() {
  gradient_exactness();
  rk_order();
  symplectic_energy();
  optimizer_suite();
  std::string detail;
  const bool same = identical_reruns(small_cubic_config(), "determinism", detail);
  verdict(13, same, "cubic sweep rerun: " + detail);
}

void group_cubic() {
  const Sweep clean = run_config("cubic_clean.json");
  const Sweep noisy = run_config("cubic_noisy.json");
  const Sweep exp_gaps = run_config("cubic_exp_gaps.json");

  const double ef0 = median_of(clean, "E_f"), ef10 = median_of(noisy, "E_f"), en10 = median_of(noisy, "E_N");
  verdict(4, all_ok(clean) && all_ok(noisy) && ef0 <= 1e-3 && ef10 <= 1e-2 && en10 <= 1e-3,
          "median E_f(0%) " + fmt("%.3e", ef0) + ", E_f(10%) " + fmt("%.3e", ef10) + ", E_N(10%) " +
              fmt("%.3e", en10) + "; E_F(0%) " + fmt("%.3e", median_of(clean, "E_F")));
  const double efexp = median_of(exp_gaps, "E_f");
  verdict(5, all_ok(exp_gaps) && efexp <= 3.0 * ef10,
          "median E_f exponential gaps " + fmt("%.3e", efexp) + " vs fixed " + fmt("%.3e", ef10) + " (ratio " +
              fmt("%.2f", efexp / ef10) + ")");
  denoising_gain({&noisy, &exp_gaps}, "cubic");
  degenerate_guard({&noisy, &exp_gaps}, "cubic");
}

void group_lorenz() {
  const Sweep five = run_config("lorenz.json");
  const double ef = median_of(five, "E_f");
  // Predicted orbit over five training horizons from the true initial state.
  const Vector times = uniform_times(0, 125, 12501);
  Vector x0(3);
  x0 << 5, 5, 25;
  int bounded = 0;
  double xmax = 0.0, zmin = INFINITY, zmax = -INFINITY;
  for (const Trial& t : five.trials) {
    if (t.row["status"] != "ok") continue;
    try {
      const Trajectory orbit = predict_orbit(t.model.flow, x0, times);
      const double xy = orbit.states.topRows(2).cwiseAbs().maxCoeff();
      const double lo = orbit.states.row(2).minCoeff(), hi = orbit.states.row(2).maxCoeff();
      xmax = std::max(xmax, xy);
      zmin = std::min(zmin, lo);
      zmax = std::max(zmax, hi);
      bounded += xy <= 30.0 && lo >= 0.0 && hi <= 60.0;
    } catch (const DivergenceError&) {
      xmax = INFINITY;
    }
  }
  verdict(6, all_ok(five) && ef <= 1e-2 && bounded == static_cast<int>(five.trials.size()),
          "median E_f(5%) " + fmt("%.3e", ef) + "; " + std::to_string(bounded) + "/" +
              std::to_string(five.trials.size()) + " orbits to t=125 in box (max |x|,|y| " + fmt("%.1f", xmax) +
              ", z in [" + fmt("%.1f", zmin) + ", " + fmt("%.1f", zmax) + "])");

  const Sweep gauss = run_config("lorenz_gaussian_moments.json");
  const Sweep student = run_config("lorenz_student_t_moments.json");
  bool moments_ok = all_ok(gauss) && all_ok(student);
  std::string detail;
  if (moments_ok) {
    const json& g = gauss.trials[0].metrics;
    const double var = g["moments"]["var"][0], skew = g["moments"]["skew"][0], kurt = g["moments"]["kurt"][0];
    const double true_var = g["true_moments"]["var"][0];
    const double t_kurt = student.trials[0].metrics["moments"]["kurt"][0];
    const double t_true = student.trials[0].metrics["true_moments"]["kurt"][0];
    moments_ok = std::abs(var - true_var) <= 0.15 * true_var && std::abs(skew) < 0.1 && std::abs(kurt) < 0.3 &&
                 t_kurt > 0.3;
    detail = "gaussian x: var " + fmt("%.4f", var) + " vs injected " + fmt("%.4f", true_var) + ", skew " +
             fmt("%.3f", skew) + ", kurt " + fmt("%.3f", kurt) + "; student T(10) x: kurt " + fmt("%.3f", t_kurt) +
             " (injected " + fmt("%.3f", t_true) + ")";
  } else {
    detail = "a moment fit failed";
  }
  verdict(7, moments_ok, detail);
  denoising_gain({&five, &gauss, &student}, "lorenz");
  degenerate_guard({&five, &gauss, &student}, "lorenz");
}

void group_pendulum() {
  const Sweep s = run_config("double_pendulum.json");
  const double ef = median_of(s, "E_f"), en = median_of(s, "E_N");
  verdict(8, all_ok(s) && ef <= 5e-2 && en <= 2e-2,
          "E_f(10%) " + fmt("%.3e", ef) + ", E_N(10%) " + fmt("%.3e", en) + ", E_F " + fmt("%.3e", median_of(s, "E_F")));
  denoising_gain({&s}, "double pendulum");
  degenerate_guard({&s}, "double pendulum");
}

void group_multi() {
  const ExperimentConfig multi_config = load_experiment_config(kConfigs / "lorenz_multi.json");
  const Sweep multi = run_config(multi_config);
  const Sweep single = run_config("lorenz_long.json");
  if (!all_ok(multi) || !all_ok(single)) {
    verdict(11, false, "a training run failed");
    return;
  }
  // Held-out grid spanning the box the short trajectories started from.
  const auto& lo = multi_config.simulation.box_lo;
  const auto& hi = multi_config.simulation.box_hi;
  const int per_axis = 9;
  Matrix grid(3, per_axis * per_axis * per_axis);
  Eigen::Index col = 0;
  for (int a = 0; a < per_axis; ++a) {
    for (int b = 0; b < per_axis; ++b) {
      for (int c = 0; c < per_axis; ++c, ++col) {
        grid(0, col) = lo[0] + (hi[0] - lo[0]) * (a + 0.5) / per_axis;
        grid(1, col) = lo[1] + (hi[1] - lo[1]) * (b + 0.5) / per_axis;
        grid(2, col) = lo[2] + (hi[2] - lo[2]) * (c + 0.5) / per_axis;
      }
    }
  }
  const VectorField f = system_field(SystemId::kLorenz);
  const double e_multi = vector_field_error(multi.trials[0].model.flow.params, f, grid);
  const double e_single = vector_field_error(single.trials[0].model.flow.params, f, grid);
  const double ratio = e_multi / e_single;
  verdict(11, ratio < 0.8,
          "off-attractor grid E_f: 50 short trajectories " + fmt("%.3e", e_multi) + ", one long trajectory " +
              fmt("%.3e", e_single) + " (ratio " + fmt("%.3f", ratio) + ")");
}

// Stand-in for an externally produced 3-D series: a mean-field model with an
// unstable fixed point and a limit cycle, written to CSV and then ingested.
void group_ingest() {
  const double mu = 0.1, omega = 1.0, a = -0.1, lambda = 10.0;
  const VectorField field = [=](const Vector& s) {
    Vector d(3);
    d(0) = mu * s(0) - omega * s(1) + a * s(0) * s(2);
    d(1) = omega * s(0) + mu * s(1) + a * s(1) * s(2);
    d(2) = -lambda * (s(2) - s(0) * s(0) - s(1) * s(1));
    return d;
  };
  Vector x0(3);
  x0 << 0.05, 0.0, 0.0;
  const Trajectory tr = rk4_simulate(field, x0, uniform_times(0, 75, 1500));
  const fs::path csv = kWork / "mean_field_input" / "series.csv";
  save_trajectory_csv(csv, tr.times, tr.states);
  const NoisyDataset raw = cmd_ingest(csv, kWork / "mean_field_input" / "ingested.json");

  json config = json::parse(R"({
    "name": "mean_field",
    "corruption": {"percent": [5], "seed": 21},
    "train": {"hidden": [32, 32, 32], "loss": {"gamma": 0.01}, "optimizer": {"max_iters": 300}, "seed": 3},
    "trials": 2
  })");
  config["input_csv"] = fs::absolute(csv).string();
  const Sweep s = run_config(parse_experiment_config(config));
  denoising_gain({&s}, "ingested 3-D series (" + std::to_string(raw.size()) + " samples)");
  std::string detail;
  const bool same = identical_reruns(config, "mean_field_rerun", detail);
  verdict(13, same, "ingested series rerun: " + detail);
}

}  // namespace

int main(int argc, char** argv) {
  const std::string group = argc > 1 ? argv[1] : "all";
  const std::map<std::string, std::function<void()>> groups{
      {"fast", group_fast},         {"cubic", group_cubic}, {"lorenz", group_lorenz},
      {"pendulum", group_pendulum}, {"multi", group_multi}, {"ingest", group_ingest}};
  try {
    if (group == "all") {
      for (const char* g : {"fast", "cubic", "lorenz", "pendulum", "multi", "ingest"}) groups.at(g)();
    } else if (auto it = groups.find(group); it != groups.end()) {
      it->second();
    } else {
      std::cerr << "unknown group '" << group << "'\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "acceptance run aborted: " << e.what() << "\n";
    return 1;
  }
  return failures == 0 ? 0 : 1;
}

#include "rkid/optimize.hpp"

#include <cmath>
#include <algorithm>
#include <deque>
#include <optional>
#include <limits>

#include "rkid/errors.hpp"

namespace rkid {

void OptimizerOptions::validate() const {
  if (memory < 1) throw ValidationError("optimizer memory must be >= 1");
  if (max_iters < 0) throw ValidationError("optimizer max_iters must be >= 0");
  if (!(grad_tol > 0.0) || !(f_tol > 0.0)) throw ValidationError("optimizer tolerances must be positive");
  if (!(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) {
    throw ValidationError("line search constants must satisfy 0 < c1 < c2 < 1");
  }
  if (max_linesearch < 1) throw ValidationError("max_linesearch must be >= 1");
}

std::string termination_name(Termination reason) {
  switch (reason) {
    case Termination::kGradientTol: return "gradient-tol";
    case Termination::kFunctionTol: return "f-tol";
    case Termination::kMaxIters: return "max-iters";
    case Termination::kLineSearchFailure: return "line-search-failure";
  }
  return "unknown";
}

namespace {

struct TrialPoint {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Vector x;
  Vector g;
  bool finite() const { return std::isfinite(phi) && std::isfinite(dphi); }
};

// Minimiser of the cubic matching values and slopes at a and b, or NaN when
// the cubic has no usable minimiser.
double cubic_minimizer(const TrialPoint& a, const TrialPoint& b) {
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double disc = d1 * d1 - a.dphi * b.dphi;
  if (!(disc >= 0.0)) return std::numeric_limits<double>::quiet_NaN();
  const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
  const double denom = b.dphi - a.dphi + 2.0 * d2;
  if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
}

class LineSearch {
public:
  LineSearch(const Objective& objective, const OptimizerOptions& options, int& evaluations)
      : objective_(objective), options_(options), evaluations_(evaluations) {}

  // Strong Wolfe search along d from (x, f0, g0). Returns the accepted point,
  // or nothing when the evaluation budget runs out.
  std::optional<TrialPoint> search(const Vector& x, double f0, const Vector& g0, const Vector& d, double alpha0) {
    x_ = &x;
    d_ = &d;
    phi0_ = f0;
    dphi0_ = g0.dot(d);
    budget_ = options_.max_linesearch;
    best_.reset();

    TrialPoint prev{0.0, f0, dphi0_, x, g0};
    double alpha = alpha0;
    for (int i = 0; budget_ > 0; ++i) {
      TrialPoint cur = evaluate(alpha);
      if (!cur.finite() || cur.phi > phi0_ + options_.wolfe_c1 * alpha * dphi0_ || (i > 0 && cur.phi >= prev.phi)) {
        return zoom(prev, cur);
      }
      if (std::abs(cur.dphi) <= -options_.wolfe_c2 * dphi0_) return cur;
      if (cur.dphi >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return std::nullopt;
  }

  double dphi0() const { return dphi0_; }

  /// Lowest sufficient-decrease point of the last search, Wolfe or not.
  const std::optional<TrialPoint>& best() const { return best_; }

private:
  TrialPoint evaluate(double alpha) {
    --budget_;
    ++evaluations_;
    TrialPoint p;
    p.alpha = alpha;
    p.x = *x_ + alpha * *d_;
    p.g = Vector::Zero(p.x.size());
    p.phi = objective_(p.x, p.g);
    p.dphi = std::isfinite(p.phi) ? p.g.dot(*d_) : std::numeric_limits<double>::quiet_NaN();
    if (p.finite() && p.phi <= phi0_ + options_.wolfe_c1 * alpha * dphi0_ && p.phi < phi0_ &&
        (!best_ || p.phi < best_->phi)) {
      best_ = p;
    }
    return p;
  }

  // `lo` satisfies sufficient decrease with the lowest value seen; the
  // minimiser lies between lo and hi.
  std::optional<TrialPoint> zoom(TrialPoint lo, TrialPoint hi) {
    while (budget_ > 0) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double width = std::abs(hi.alpha - lo.alpha);
      if (width <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) return std::nullopt;
      double alpha = hi.finite() ? cubic_minimizer(lo, hi) : std::numeric_limits<double>::quiet_NaN();
      if (!std::isfinite(alpha) || alpha < left + 0.1 * width || alpha > left + 0.9 * width) {
        alpha = 0.5 * (lo.alpha + hi.alpha);
      }
      TrialPoint cur = evaluate(alpha);
      if (!cur.finite() || cur.phi > phi0_ + options_.wolfe_c1 * alpha * dphi0_ || cur.phi >= lo.phi) {
        hi = std::move(cur);
        continue;
      }
      if (std::abs(cur.dphi) <= -options_.wolfe_c2 * dphi0_) return cur;
      if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = std::move(cur);
    }
    return std::nullopt;
  }

  const Objective& objective_;
  const OptimizerOptions& options_;
  int& evaluations_;
  const Vector* x_ = nullptr;
  const Vector* d_ = nullptr;
  double phi0_ = 0.0;
  double dphi0_ = 0.0;
  int budget_ = 0;
  std::optional<TrialPoint> best_;
};

struct CurvaturePair {
  Vector s;
  Vector y;
  double rho;
};

Vector two_loop_direction(const Vector& g, const std::deque<CurvaturePair>& pairs) {
  Vector q = -g;
  std::vector<double> alphas(pairs.size());
  for (std::size_t i = pairs.size(); i-- > 0;) {
    alphas[i] = pairs[i].rho * pairs[i].s.dot(q);
    q -= alphas[i] * pairs[i].y;
  }
  const CurvaturePair& last = pairs.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double beta = pairs[i].rho * pairs[i].y.dot(q);
    q += (alphas[i] - beta) * pairs[i].s;
  }
  return q;
}

}  // namespace

OptimizeReport lbfgs_minimize(const Objective& objective, const Vector& x0, const OptimizerOptions& options,
                              const IterationCallback& on_iteration) {
  options.validate();
  OptimizeReport report;
  report.x = x0;
  Vector g = Vector::Zero(x0.size());
  report.value = objective(report.x, g);
  report.evaluations = 1;
  if (!std::isfinite(report.value) || !g.allFinite()) {
    throw ValidationError("objective is not finite at the starting point");
  }
  report.grad_norm = g.lpNorm<Eigen::Infinity>();
  if (report.grad_norm <= options.grad_tol) {
    report.termination = Termination::kGradientTol;
    return report;
  }

  std::deque<CurvaturePair> pairs;
  LineSearch line_search(objective, options, report.evaluations);
  while (true) {
    if (report.iterations >= options.max_iters) {
      report.termination = Termination::kMaxIters;
      return report;
    }

    std::optional<TrialPoint> accepted;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (pairs.empty()) break;
        pairs.clear();
      }
      Vector d;
      double alpha0 = 1.0;
      if (pairs.empty()) {
        d = -g;
        alpha0 = 1.0 / g.norm();
      } else {
        d = two_loop_direction(g, pairs);
        if (!(g.dot(d) < 0.0)) {
          pairs.clear();
          d = -g;
          alpha0 = 1.0 / g.norm();
        }
      }
      accepted = line_search.search(report.x, report.value, g, d, alpha0);
    }
    if (!accepted) {
      if (const auto& best = line_search.best()) {
        report.x = best->x;
        report.value = best->phi;
        report.grad_norm = best->g.lpNorm<Eigen::Infinity>();
      }
      report.termination = Termination::kLineSearchFailure;
      return report;
    }

    IterationRecord record;
    record.iteration = report.iterations + 1;
    record.phi0 = report.value;
    record.dphi0 = line_search.dphi0();
    record.step = accepted->alpha;
    record.dphi = accepted->dphi;

    CurvaturePair pair{accepted->x - report.x, accepted->g - g, 0.0};
    const double sy = pair.s.dot(pair.y);
    if (sy > 1e-10 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      pairs.push_back(std::move(pair));
      if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
    }

    const double previous = report.value;
    report.x = std::move(accepted->x);
    g = std::move(accepted->g);
    report.value = accepted->phi;
    report.grad_norm = g.lpNorm<Eigen::Infinity>();
    ++report.iterations;

    record.value = report.value;
    record.grad_norm = report.grad_norm;
    report.trace.push_back(record);
    if (on_iteration) on_iteration(record);

    if (report.grad_norm <= options.grad_tol) {
      report.termination = Termination::kGradientTol;
      return report;
    }
    const double scale = std::max({std::abs(previous), std::abs(report.value), 1.0});
    if (previous - report.value <= options.f_tol * scale) {
      report.termination = Termination::kFunctionTol;
      return report;
    }
  }
}

}  // namespace rkid

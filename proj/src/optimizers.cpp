#include "ktune/optimizers.hpp"

#include <algorithm>
#include <cmath>

#include "ktune/spline.hpp"

namespace ktune {

namespace {

constexpr double kGolden = 0.3819660112501051;  // 2 - phi

long long memo_key(double k) { return std::llround(k * 1e9); }

// Ordering used everywhere a "best" point is selected: higher improvement
// wins; ties prefer k closest to initial_k, then smaller k.
bool beats(double k_a, double v_a, double k_b, double v_b, double initial_k) {
  if (v_a != v_b) return v_a > v_b;
  double da = std::fabs(k_a - initial_k), db = std::fabs(k_b - initial_k);
  if (da != db) return da < db;
  return k_a < k_b;
}

// Guarded evaluation with budget accounting and the value-tolerance
// convergence rule: converged once two consecutive fresh evaluations land
// within `tolerance` of the best value seen so far.
class Runner {
 public:
  Runner(Objective& obj, const SearchConfig& cfg) : obj_(obj), cfg_(cfg) {}

  // Returns false when the evaluation budget is exhausted.
  bool eval(double k, double& value) {
    if (!obj_.is_memoized(k) && obj_.evaluations() >= cfg_.max_evaluations)
      return false;
    value = obj_(k);
    if (has_best_ && obj_.evaluations() >= 2) {
      if (std::fabs(value - best_value_) < cfg_.tolerance) {
        if (++within_tolerance_ >= 2) converged_ = true;
      } else {
        within_tolerance_ = 0;
      }
    }
    if (!has_best_ || beats(k, value, best_k_, best_value_, cfg_.initial_k)) {
      has_best_ = true;
      best_k_ = k;
      best_value_ = value;
    }
    return true;
  }

  bool converged() const { return converged_; }
  bool budget_left() const { return obj_.evaluations() < cfg_.max_evaluations; }

 private:
  Objective& obj_;
  const SearchConfig& cfg_;
  bool has_best_ = false;
  bool converged_ = false;
  int within_tolerance_ = 0;
  double best_k_ = 0.0;
  double best_value_ = 0.0;
};

SearchOutcome finalize(const Objective& obj, Method method,
                       const SearchConfig& cfg) {
  auto history = obj.history();
  if (history.empty()) throw std::runtime_error("optimizer made no evaluations");
  SearchOutcome out;
  out.trace.method = method;
  out.evaluations = static_cast<int>(history.size());
  bool first = true;
  int index = 0;
  for (const auto& e : history) {
    if (first || beats(e.k, e.improvement, out.k_star, out.improvement_pct,
                       cfg.initial_k)) {
      out.k_star = e.k;
      out.improvement_pct = e.improvement;
      first = false;
    }
    out.trace.iterations.push_back(
        {++index, e.k, e.improvement, out.improvement_pct});
  }
  return out;
}

}  // namespace

void SearchConfig::validate() const {
  if (k_min <= 0) throw std::runtime_error("k_min must be positive");
  if (!(k_min < initial_k && initial_k < k_max))
    throw std::runtime_error("initial_k must lie strictly inside (k_min, k_max)");
  if (max_evaluations < 3)
    throw std::runtime_error("max_evaluations must be at least 3");
  if (tolerance <= 0) throw std::runtime_error("tolerance must be positive");
}

Objective::Objective(std::function<double(double)> fn) : fn_(std::move(fn)) {}

double Objective::operator()(double k) {
  long long key = memo_key(k);
  {
    std::lock_guard lock(mutex_);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
  }
  double value = fn_(k);
  std::lock_guard lock(mutex_);
  auto [it, inserted] = memo_.emplace(key, value);
  if (inserted) {
    history_.push_back({k, value});
    ++evaluations_;
  }
  return it->second;
}

bool Objective::is_memoized(double k) const {
  std::lock_guard lock(mutex_);
  return memo_.count(memo_key(k)) > 0;
}

int Objective::evaluations() const {
  std::lock_guard lock(mutex_);
  return evaluations_;
}

std::vector<Objective::Evaluation> Objective::history() const {
  std::lock_guard lock(mutex_);
  return history_;
}

std::vector<double> multires_stage1_grid(const SearchConfig& cfg) {
  std::vector<double> grid(8);
  for (int i = 0; i < 8; ++i)
    grid[i] = cfg.k_min + (cfg.k_max - cfg.k_min) * i / 7.0;
  return grid;
}

const std::vector<double>& multires_delta_schedule() {
  static const std::vector<double> deltas = {0.2, 0.1, 0.05};
  return deltas;
}

SearchOutcome multires_search(Objective& objective, const SearchConfig& cfg) {
  cfg.validate();
  Runner run(objective, cfg);

  auto grid = multires_stage1_grid(cfg);
  std::vector<double> values;
  for (double k : grid) {
    double v;
    if (!run.eval(k, v))
      throw std::runtime_error("evaluation budget too small for the stage-1 grid");
    values.push_back(v);
  }

  // Spline argmax sampled at 0.01 steps seeds the refinements; it never
  // replaces an evaluated point in the final answer.
  NaturalCubicSpline spline(grid, values);
  double seed_k = cfg.initial_k;
  double seed_v = -std::numeric_limits<double>::infinity();
  bool first = true;
  for (double k = cfg.k_min; k <= cfg.k_max + 1e-12; k += 0.01) {
    double kk = std::min(k, cfg.k_max);
    double v = spline.evaluate(kk);
    if (first || beats(kk, v, seed_k, seed_v, cfg.initial_k)) {
      seed_k = kk;
      seed_v = v;
      first = false;
    }
  }

  auto best_evaluated = [&]() {
    auto hist = objective.history();
    double bk = hist.front().k, bv = hist.front().improvement;
    for (const auto& e : hist) {
      if (beats(e.k, e.improvement, bk, bv, cfg.initial_k)) {
        bk = e.k;
        bv = e.improvement;
      }
    }
    return bk;
  };

  double center = seed_k;
  for (double delta : multires_delta_schedule()) {
    for (double cand : {center - delta, center + delta}) {
      cand = std::clamp(cand, cfg.k_min, cfg.k_max);
      double v;
      if (!run.eval(cand, v)) break;
    }
    center = best_evaluated();
  }
  return finalize(objective, Method::MultiRes, cfg);
}

SearchOutcome golden_section(Objective& objective, const SearchConfig& cfg) {
  cfg.validate();
  Runner run(objective, cfg);

  double v;
  run.eval(cfg.initial_k, v);

  double a = cfg.k_min, b = cfg.k_max;
  double x1 = a + kGolden * (b - a);
  double x2 = b - kGolden * (b - a);
  double f1 = 0, f2 = 0;
  bool ok = run.eval(x1, f1) && run.eval(x2, f2);

  while (ok && !run.converged() && run.budget_left() && (b - a) > 1e-9) {
    if (beats(x1, f1, x2, f2, cfg.initial_k)) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = a + kGolden * (b - a);
      ok = run.eval(x1, f1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = b - kGolden * (b - a);
      ok = run.eval(x2, f2);
    }
  }
  return finalize(objective, Method::GoldenSection, cfg);
}

SearchOutcome brent(Objective& objective, const SearchConfig& cfg) {
  cfg.validate();
  Runner run(objective, cfg);

  double a = cfg.k_min, b = cfg.k_max;
  double x = cfg.initial_k, w = x, v = x;
  double imp;
  run.eval(x, imp);
  double fx = -imp, fw = fx, fv = fx;

  double d = 0.0, e = 0.0;
  const double eps = 1e-8;
  for (int iter = 0; iter < 200; ++iter) {
    if (run.converged() || !run.budget_left()) break;
    double m = 0.5 * (a + b);
    double tol1 = eps * std::fabs(x) + 1e-10;
    double tol2 = 2.0 * tol1;
    if (std::fabs(x - m) <= tol2 - 0.5 * (b - a)) break;

    bool use_golden = true;
    if (std::fabs(e) > tol1) {
      // Parabola through x, w, v.
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0) p = -p;
      q = std::fabs(q);
      double e_prev = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_prev) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        double u_try = x + d;
        if (u_try - a < tol2 || b - u_try < tol2)
          d = (x < m ? tol1 : -tol1);
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x < m ? b - x : a - x);
      d = kGolden * e;
    }
    double u = x + (std::fabs(d) >= tol1 ? d : (d > 0 ? tol1 : -tol1));
    u = std::clamp(u, a, b);

    double fu_imp;
    if (!run.eval(u, fu_imp)) break;
    double fu = -fu_imp;

    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return finalize(objective, Method::Brent, cfg);
}

SearchOutcome run_method(Method method, Objective& objective,
                         const SearchConfig& cfg) {
  switch (method) {
    case Method::MultiRes: return multires_search(objective, cfg);
    case Method::GoldenSection: return golden_section(objective, cfg);
    case Method::Brent: return brent(objective, cfg);
  }
  throw std::runtime_error("unknown method");
}

}  // namespace ktune

#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <vector>

#include "ktune/core_model.hpp"

namespace ktune {

struct SearchConfig {
  double k_min = 0.2;
  double k_max = 3.0;
  int max_evaluations = 15;
  double tolerance = 0.02;  // percentage points of BD-Rate improvement
  double initial_k = 1.0;

  void validate() const;
};

// Memoizing wrapper around the BD-Rate improvement function of k.
// Repeated evaluation at the same k (to 1e-9) returns the stored value
// without touching the underlying function or the counter.
class Objective {
 public:
  explicit Objective(std::function<double(double)> fn);

  double operator()(double k);
  bool is_memoized(double k) const;
  int evaluations() const;

  struct Evaluation {
    double k;
    double improvement;
  };
  // Fresh evaluations in call order.
  std::vector<Evaluation> history() const;

 private:
  std::function<double(double)> fn_;
  mutable std::mutex mutex_;
  std::map<long long, double> memo_;
  std::vector<Evaluation> history_;
  int evaluations_ = 0;
};

struct SearchOutcome {
  double k_star = 1.0;
  double improvement_pct = 0.0;
  int evaluations = 0;
  OptimizerTrace trace;
};

// Coarse 8-point grid, spline-seeded refinements at delta = 0.2, 0.1, 0.05.
SearchOutcome multires_search(Objective& objective, const SearchConfig& cfg);

SearchOutcome golden_section(Objective& objective, const SearchConfig& cfg);

// Parabolic interpolation with golden-section fallback.
SearchOutcome brent(Objective& objective, const SearchConfig& cfg);

SearchOutcome run_method(Method method, Objective& objective,
                         const SearchConfig& cfg);

// Stage-1 grid for the multi-resolution search (8 equally spaced points;
// 0.2, 0.6, ... 3.0 over the default domain).
std::vector<double> multires_stage1_grid(const SearchConfig& cfg);

// Refinement half-widths applied in succession.
const std::vector<double>& multires_delta_schedule();

}  // namespace ktune

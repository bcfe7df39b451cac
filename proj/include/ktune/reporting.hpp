#pragma once

#include "ktune/core_model.hpp"
#include "ktune/bd_metrics.hpp"

namespace ktune {

struct ClassSummaryRow {
  ClassLabel class_label;
  Method method;
  int clip_count = 0;
  double mean_improvement_pct = 0.0;
  double best_improvement_pct = 0.0;
};

struct ClassSummary {
  std::vector<ClassSummaryRow> rows;  // sorted by (class, method)
  // Cross-method best improvement per class present in the input.
  std::vector<std::pair<ClassLabel, double>> best_per_class;
};

ClassSummary per_class_summary(const std::vector<ClipResult>& results);

struct NormalizedTrace {
  bool normalized = false;  // false: final improvement was not positive
  std::vector<double> best_so_far;  // raw best-so-far per iteration
  std::vector<double> fraction;     // best-so-far / final, when normalized
};

NormalizedTrace convergence_report(const OptimizerTrace& trace,
                                   double final_improvement);

struct SavingsCdf {
  std::vector<std::pair<double, double>> points;  // (savings %, cum fraction)
  int included = 0;
  int excluded = 0;  // probe quality outside a clip's fitted range
};

// Empirical CDF of per-clip bitrate savings at a fixed quality.
SavingsCdf savings_cdf(const std::vector<std::pair<RDCurve, RDCurve>>& curve_pairs,
                       double probe_quality);

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;   // (rate, quality)
  std::vector<std::pair<double, double>> fitted;   // 200 samples of the fit
};

std::vector<PlotSeries> rd_comparison_plot_data(
    const RDCurve& baseline, const std::vector<RDCurve>& candidates);

// Artifact writers.
void write_summary_csv(const std::filesystem::path& path,
                       const ClassSummary& summary);
void write_cdf_csv(const std::filesystem::path& path, const SavingsCdf& cdf);
// Deterministic self-contained SVG line chart.
void write_svg_chart(const std::filesystem::path& path,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label,
                     const std::vector<PlotSeries>& series);

// Runs the full reporting pass over a pipeline run directory: writes
// summary.csv, cdf.csv, per-trace convergence CSVs and SVG figures.
void report_run_directory(const std::filesystem::path& run_dir,
                          const std::filesystem::path& out_dir,
                          QualityMetric metric, double probe_quality);

}  // namespace ktune

#include "ktune/reporting.hpp"

#include <algorithm>

#include "ktune/pipeline.hpp"
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace ktune {

namespace {

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) out.push_back(field);
  return out;
}

}  // namespace

ClassSummary per_class_summary(const std::vector<ClipResult>& results) {
  if (results.empty())
    throw std::runtime_error("per_class_summary: no results");
  std::map<std::pair<int, int>, std::vector<double>> groups;
  for (const auto& r : results) {
    groups[{static_cast<int>(r.class_label), static_cast<int>(r.method)}]
        .push_back(r.bd_rate_improvement_pct);
  }
  ClassSummary summary;
  std::map<int, double> class_best;
  for (const auto& [key, values] : groups) {
    ClassSummaryRow row;
    row.class_label = static_cast<ClassLabel>(key.first);
    row.method = static_cast<Method>(key.second);
    row.clip_count = static_cast<int>(values.size());
    row.best_improvement_pct = *std::max_element(values.begin(), values.end());
    double sum = 0;
    for (double v : values) sum += v;
    row.mean_improvement_pct = sum / values.size();
    summary.rows.push_back(row);
    auto [it, inserted] = class_best.emplace(key.first, row.best_improvement_pct);
    if (!inserted) it->second = std::max(it->second, row.best_improvement_pct);
  }
  for (const auto& [cls, best] : class_best)
    summary.best_per_class.emplace_back(static_cast<ClassLabel>(cls), best);
  return summary;
}

NormalizedTrace convergence_report(const OptimizerTrace& trace,
                                   double final_improvement) {
  NormalizedTrace out;
  for (const auto& e : trace.iterations) out.best_so_far.push_back(e.best_so_far_pct);
  if (final_improvement > 0) {
    out.normalized = true;
    for (double b : out.best_so_far)
      out.fraction.push_back(std::clamp(b / final_improvement, 0.0, 1.0));
  }
  return out;
}

SavingsCdf savings_cdf(
    const std::vector<std::pair<RDCurve, RDCurve>>& curve_pairs,
    double probe_quality) {
  SavingsCdf cdf;
  std::vector<double> savings;
  for (const auto& [baseline, candidate] : curve_pairs) {
    LogRateFit fb = fit_log_rate(baseline);
    LogRateFit fc = fit_log_rate(candidate);
    if (probe_quality < fb.domain_low || probe_quality > fb.domain_high ||
        probe_quality < fc.domain_low || probe_quality > fc.domain_high) {
      ++cdf.excluded;
      continue;
    }
    savings.push_back(savings_at_quality(baseline, candidate, probe_quality));
    ++cdf.included;
  }
  std::sort(savings.begin(), savings.end());
  size_t n = savings.size();
  for (size_t i = 0; i < n; ++i) {
    double frac = static_cast<double>(i + 1) / n;
    if (!cdf.points.empty() && cdf.points.back().first == savings[i])
      cdf.points.back().second = frac;  // collapse ties to the upper step
    else
      cdf.points.emplace_back(savings[i], frac);
  }
  return cdf;
}

std::vector<PlotSeries> rd_comparison_plot_data(
    const RDCurve& baseline, const std::vector<RDCurve>& candidates) {
  std::vector<PlotSeries> out;
  auto add = [&](const RDCurve& curve, const std::string& name) {
    if (curve.metric().kind != baseline.metric().kind)
      throw std::runtime_error("plot curves must share a metric");
    PlotSeries s;
    s.name = name;
    for (const RDPoint& p : curve.points())
      s.points.emplace_back(p.achieved_bitrate, p.quality);
    LogRateFit fit = fit_log_rate(curve);
    for (int i = 0; i < 200; ++i) {
      double q = fit.domain_low +
                 (fit.domain_high - fit.domain_low) * i / 199.0;
      s.fitted.emplace_back(std::pow(10.0, fit.evaluate(q)), q);
    }
    out.push_back(std::move(s));
  };
  add(baseline, "baseline");
  for (size_t i = 0; i < candidates.size(); ++i) {
    std::ostringstream name;
    name << "k=" << format_sig6(candidates[i].k());
    add(candidates[i], name.str());
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path,
                       const ClassSummary& summary) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "class,method,n,mean_improvement_pct,best_improvement_pct\n";
  for (const auto& row : summary.rows)
    out << to_string(row.class_label) << ',' << to_string(row.method) << ','
        << row.clip_count << ',' << format_sig6(row.mean_improvement_pct)
        << ',' << format_sig6(row.best_improvement_pct) << '\n';
}

void write_cdf_csv(const std::filesystem::path& path, const SavingsCdf& cdf) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "savings_pct,cumulative_fraction\n";
  for (const auto& [s, f] : cdf.points)
    out << format_sig6(s) << ',' << format_sig6(f) << '\n';
}

void write_svg_chart(const std::filesystem::path& path,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label,
                     const std::vector<PlotSeries>& series) {
  const int width = 800, height = 500;
  const int ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (const auto* pts : {&s.points, &s.fitted}) {
      for (const auto& [x, y] : *pts) {
        xmin = std::min(xmin, x); xmax = std::max(xmax, x);
        ymin = std::min(ymin, y); ymax = std::max(ymax, y);
      }
    }
  }
  if (xmin > xmax) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  auto px = [&](double x) {
    return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
  };
  auto py = [&](double y) {
    return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb);
  };
  static const char* colors[] = {"#000000", "#d62728", "#1f77b4",
                                 "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\""
      << width - mr << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
      << height / 2 << ")\">" << y_label << "</text>\n";

  for (size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 6];
    const auto& s = series[i];
    if (!s.fitted.empty()) {
      out << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.fitted)
        out << format_sig6(px(x)) << ',' << format_sig6(py(y)) << ' ';
      out << "\"/>\n";
    }
    for (const auto& [x, y] : s.points)
      out << "<circle cx=\"" << format_sig6(px(x)) << "\" cy=\""
          << format_sig6(py(y)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << width - mr - 150 << "\" y=\"" << mt + 16 * (i + 1)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << s.name
        << "</text>\n";
  }
  out << "</svg>\n";
}

void report_run_directory(const std::filesystem::path& run_dir,
                          const std::filesystem::path& out_dir,
                          QualityMetric metric, double probe_quality) {
  auto results_path = run_dir / "results.csv";
  std::ifstream in(results_path);
  if (!in)
    throw std::runtime_error("missing results file: " + results_path.string());
  std::string line;
  if (!std::getline(in, line) || line != results_csv_header())
    throw std::runtime_error("results header mismatch in " +
                             results_path.string());
  std::vector<ClipResult> results;
  while (std::getline(in, line)) {
    if (!line.empty()) results.push_back(clip_result_from_csv_row(line));
  }
  if (results.empty())
    throw std::runtime_error("no results in " + results_path.string());

  std::filesystem::create_directories(out_dir);

  write_summary_csv(out_dir / "summary.csv", per_class_summary(results));

  // Convergence CSVs from the persisted traces.
  std::vector<PlotSeries> conv_series;
  for (const auto& r : results) {
    std::string stem = r.clip_id + "_" + to_string(r.method);
    auto trace_path = run_dir / "traces" / (stem + ".csv");
    std::ifstream tin(trace_path);
    if (!tin)
      throw std::runtime_error("missing trace file: " + trace_path.string());
    std::string tline;
    std::getline(tin, tline);  // header
    OptimizerTrace trace;
    trace.method = r.method;
    while (std::getline(tin, tline)) {
      if (tline.empty()) continue;
      auto f = split(tline);
      if (f.size() != 4)
        throw std::runtime_error("malformed trace row in " +
                                 trace_path.string());
      trace.iterations.push_back({std::stoi(f[0]), std::stod(f[1]),
                                  std::stod(f[2]), std::stod(f[3])});
    }
    NormalizedTrace norm =
        convergence_report(trace, r.bd_rate_improvement_pct);
    std::ofstream cout_(out_dir / ("convergence_" + stem + ".csv"));
    cout_ << "iteration,best_so_far_pct,fraction_of_final\n";
    for (size_t i = 0; i < norm.best_so_far.size(); ++i) {
      cout_ << (i + 1) << ',' << format_sig6(norm.best_so_far[i]) << ',';
      cout_ << (norm.normalized ? format_sig6(norm.fraction[i]) : "");
      cout_ << '\n';
    }
    if (norm.normalized) {
      PlotSeries s;
      s.name = stem;
      for (size_t i = 0; i < norm.fraction.size(); ++i)
        s.fitted.emplace_back(static_cast<double>(i + 1), norm.fraction[i]);
      conv_series.push_back(std::move(s));
    }
  }
  write_svg_chart(out_dir / "convergence.svg", "Normalized improvement vs iteration",
                  "iteration", "fraction of final improvement", conv_series);

  // Savings CDF from the persisted curve pairs.
  std::vector<std::pair<RDCurve, RDCurve>> pairs;
  for (const auto& r : results) {
    auto base_path = run_dir / "curves" / (r.clip_id + "_baseline.csv");
    auto kstar_path = run_dir / "curves" /
                      (r.clip_id + "_" + to_string(r.method) + "_kstar.csv");
    if (!std::filesystem::exists(base_path))
      throw std::runtime_error("missing curve file: " + base_path.string());
    if (!std::filesystem::exists(kstar_path))
      throw std::runtime_error("missing curve file: " + kstar_path.string());
    pairs.emplace_back(read_curve_csv(base_path, metric, 1.0),
                       read_curve_csv(kstar_path, metric, r.k_star));
  }
  SavingsCdf cdf = savings_cdf(pairs, probe_quality);
  write_cdf_csv(out_dir / "cdf.csv", cdf);
  {
    std::ofstream side(out_dir / "cdf_excluded.txt");
    side << "included=" << cdf.included << "\nexcluded=" << cdf.excluded << '\n';
  }
  PlotSeries cdf_series;
  cdf_series.name = "clips";
  for (const auto& [s, f] : cdf.points) cdf_series.fitted.emplace_back(s, f);
  write_svg_chart(out_dir / "cdf.svg",
                  "CDF of bitrate savings at " + format_sig6(probe_quality),
                  "savings (%)", "cumulative fraction", {cdf_series});
}

}  // namespace ktune

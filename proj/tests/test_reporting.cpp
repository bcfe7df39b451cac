#include "doctest.h"

#include <cmath>

#include "ktune/pipeline.hpp"
#include "ktune/reporting.hpp"
#include "test_support.hpp"

using namespace ktune;
using namespace ktune::test;

namespace {

ClipResult make_result(const std::string& id, ClassLabel cls, Method method,
                       double improvement) {
  ClipResult r;
  r.clip_id = id;
  r.class_label = cls;
  r.method = method;
  r.k_star = 1.3;
  r.bd_rate_improvement_pct = improvement;
  r.objective_evaluations = 10;
  return r;
}

}  // namespace

TEST_CASE("per_class_summary single result") {
  auto summary = per_class_summary(
      {make_result("s1", ClassLabel::Sports, Method::Brent, 8.391)});
  REQUIRE(summary.rows.size() == 1);
  CHECK(summary.rows[0].class_label == ClassLabel::Sports);
  CHECK(summary.rows[0].method == Method::Brent);
  CHECK(summary.rows[0].mean_improvement_pct == 8.391);
  CHECK(summary.rows[0].best_improvement_pct == 8.391);
  CHECK(summary.rows[0].clip_count == 1);
}

TEST_CASE("per_class_summary mean and best") {
  auto summary = per_class_summary(
      {make_result("a", ClassLabel::Gaming, Method::Brent, 2.0),
       make_result("b", ClassLabel::Gaming, Method::Brent, 4.0)});
  REQUIRE(summary.rows.size() == 1);
  CHECK(summary.rows[0].mean_improvement_pct == doctest::Approx(3.0));
  CHECK(summary.rows[0].best_improvement_pct == 4.0);
  CHECK(summary.rows[0].clip_count == 2);
}

TEST_CASE("per_class_summary spans all classes and picks cross-method best") {
  std::vector<ClipResult> results;
  for (int i = 0; i < 11; ++i) {
    auto cls = static_cast<ClassLabel>(i);
    results.push_back(make_result("c" + std::to_string(i), cls, Method::Brent,
                                  1.0 + i));
    results.push_back(make_result("c" + std::to_string(i), cls,
                                  Method::GoldenSection, 2.0 + i));
  }
  auto summary = per_class_summary(results);
  CHECK(summary.rows.size() == 22);  // 11 classes x 2 methods
  REQUIRE(summary.best_per_class.size() == 11);
  for (const auto& [cls, best] : summary.best_per_class)
    CHECK(best == doctest::Approx(2.0 + static_cast<int>(cls)));
}

TEST_CASE("per_class_summary rejects empty input") {
  CHECK_THROWS_AS(per_class_summary({}), std::runtime_error);
}

TEST_CASE("convergence_report normalizes best-so-far by the final value") {
  OptimizerTrace trace;
  trace.iterations = {{1, 0.6, 2, 2}, {2, 1.4, 6, 6}, {3, 1.5, 8, 8}};
  NormalizedTrace norm = convergence_report(trace, 8.0);
  REQUIRE(norm.normalized);
  REQUIRE(norm.fraction.size() == 3);
  CHECK(norm.fraction[0] == doctest::Approx(0.25));
  CHECK(norm.fraction[1] == doctest::Approx(0.75));
  CHECK(norm.fraction[2] == doctest::Approx(1.0));
  for (size_t i = 1; i < norm.fraction.size(); ++i) {
    CHECK(norm.fraction[i] >= norm.fraction[i - 1]);
    CHECK(norm.fraction[i] <= 1.0);
  }
}

TEST_CASE("convergence_report passes raw trace through when final is zero") {
  OptimizerTrace trace;
  trace.iterations = {{1, 1.0, 0, 0}, {2, 1.2, 0, 0}};
  NormalizedTrace norm = convergence_report(trace, 0.0);
  CHECK(!norm.normalized);
  CHECK(norm.fraction.empty());
  CHECK(norm.best_so_far.size() == 2);
}

TEST_CASE("savings_cdf empirical fractions") {
  // Four linear curves at known uniform rate offsets.
  auto line_curve = [](double scale) {
    std::vector<RDPoint> pts;
    for (double q : {36.0, 38.0, 40.0, 42.0}) {
      RDPoint p;
      p.quality = q;
      p.achieved_bitrate = scale * std::pow(10.0, 1.0 + 0.1 * q);
      p.target_bitrate = p.achieved_bitrate;
      pts.push_back(p);
    }
    return RDCurve(1.0, QualityMetric{MetricKind::PSNR}, std::move(pts));
  };
  std::vector<std::pair<RDCurve, RDCurve>> pairs;
  for (double saving : {1.0, 3.0, 5.0, 7.0})
    pairs.emplace_back(line_curve(1.0), line_curve(1.0 - saving / 100.0));
  SavingsCdf cdf = savings_cdf(pairs, 40.0);
  CHECK(cdf.included == 4);
  CHECK(cdf.excluded == 0);
  REQUIRE(cdf.points.size() == 4);
  std::vector<double> expected_savings = {1.0, 3.0, 5.0, 7.0};
  std::vector<double> expected_fracs = {0.25, 0.5, 0.75, 1.0};
  for (size_t i = 0; i < 4; ++i) {
    CHECK(cdf.points[i].first == doctest::Approx(expected_savings[i]).epsilon(1e-6));
    CHECK(cdf.points[i].second == doctest::Approx(expected_fracs[i]));
  }
  CHECK(cdf.points.back().second == 1.0);

  SUBCASE("identical savings collapse to one step") {
    std::vector<std::pair<RDCurve, RDCurve>> same;
    for (int i = 0; i < 3; ++i)
      same.emplace_back(line_curve(1.0), line_curve(0.95));
    SavingsCdf step = savings_cdf(same, 40.0);
    REQUIRE(step.points.size() == 1);
    CHECK(step.points[0].first == doctest::Approx(5.0).epsilon(1e-6));
    CHECK(step.points[0].second == 1.0);
  }
  SUBCASE("probe outside a fitted domain is excluded and counted") {
    SavingsCdf out_of_range = savings_cdf(pairs, 20.0);
    CHECK(out_of_range.included == 0);
    CHECK(out_of_range.excluded == 4);
  }
}

TEST_CASE("rd_comparison_plot_data series shapes") {
  auto mk = [](double scale, double k) {
    std::vector<RDPoint> pts;
    for (int i = 0; i < 11; ++i) {
      double q = 34.0 + i;
      RDPoint p;
      p.quality = q;
      p.achieved_bitrate = scale * std::pow(10.0, 1.0 + 0.1 * q);
      p.target_bitrate = p.achieved_bitrate;
      p.k = k;
      pts.push_back(p);
    }
    return RDCurve(k, QualityMetric{MetricKind::PSNR}, std::move(pts));
  };
  RDCurve baseline = mk(1.0, 1.0);
  SUBCASE("baseline only") {
    auto series = rd_comparison_plot_data(baseline, {});
    REQUIRE(series.size() == 1);
    CHECK(series[0].points.size() == 11);
    CHECK(series[0].fitted.size() == 200);
  }
  SUBCASE("baseline plus three candidates") {
    auto series =
        rd_comparison_plot_data(baseline, {mk(0.9, 1.2), mk(0.8, 1.5), mk(0.7, 2.0)});
    CHECK(series.size() == 4);
  }
  SUBCASE("fitted samples agree with the fit at the knot qualities") {
    auto series = rd_comparison_plot_data(baseline, {});
    LogRateFit fit = fit_log_rate(baseline);
    // The fitted polyline endpoints sit on the fit's domain bounds.
    CHECK(series[0].fitted.front().second == doctest::Approx(fit.domain_low));
    CHECK(series[0].fitted.back().second == doctest::Approx(fit.domain_high));
    for (const auto& [rate, q] : series[0].fitted)
      CHECK(std::fabs(std::log10(rate) - fit.evaluate(q)) < 1e-9);
  }
}

TEST_CASE("report_run_directory writes the four artifact kinds") {
  TempDir dir("report");
  auto manifest = dir.path() / "corpus.csv";
  write_file(manifest,
             "clip_id,path,class,width,height,frames,fps\n"
             "Gaming_clip0,/tmp/a.y4m,Gaming,1280,720,150,30\n"
             "Vlog_clip1,/tmp/b.y4m,Vlog,640,360,150,30\n");
  RunConfig cfg;
  cfg.manifest_path = manifest;
  cfg.methods = {Method::Brent};
  cfg.out_dir = dir.path() / "run";
  run_batch(cfg);

  auto report_dir = dir.path() / "report";
  report_run_directory(cfg.out_dir, report_dir, QualityMetric{MetricKind::PSNR},
                       40.0);
  CHECK(std::filesystem::exists(report_dir / "summary.csv"));
  CHECK(std::filesystem::exists(report_dir / "cdf.csv"));
  CHECK(std::filesystem::exists(report_dir / "convergence_Gaming_clip0_brent.csv"));
  CHECK(std::filesystem::exists(report_dir / "cdf.svg"));
  CHECK(std::filesystem::exists(report_dir / "convergence.svg"));

  SUBCASE("rerun is byte-identical") {
    std::string summary1 = read_file(report_dir / "summary.csv");
    std::string cdf1 = read_file(report_dir / "cdf.csv");
    std::string svg1 = read_file(report_dir / "cdf.svg");
    report_run_directory(cfg.out_dir, report_dir,
                         QualityMetric{MetricKind::PSNR}, 40.0);
    CHECK(read_file(report_dir / "summary.csv") == summary1);
    CHECK(read_file(report_dir / "cdf.csv") == cdf1);
    CHECK(read_file(report_dir / "cdf.svg") == svg1);
  }

  SUBCASE("summary means recompute from the results CSV") {
    std::ifstream in(cfg.out_dir / "results.csv");
    std::string line;
    std::getline(in, line);
    std::vector<ClipResult> results;
    while (std::getline(in, line))
      if (!line.empty()) results.push_back(clip_result_from_csv_row(line));
    auto summary = per_class_summary(results);
    for (const auto& row : summary.rows) {
      double sum = 0;
      int n = 0;
      for (const auto& r : results) {
        if (r.class_label == row.class_label && r.method == row.method) {
          sum += r.bd_rate_improvement_pct;
          ++n;
        }
      }
      CHECK(row.clip_count == n);
      CHECK(row.mean_improvement_pct == doctest::Approx(sum / n).epsilon(1e-9));
    }
  }
}

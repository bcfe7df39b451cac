#include "doctest.h"

#include <cmath>
#include <random>

#include "ktune/bd_metrics.hpp"
#include "test_support.hpp"

using namespace ktune;
using namespace ktune::test;

namespace {

RDCurve curve_from_log_line(double slope, double intercept,
                            std::vector<double> qualities) {
  std::vector<RDPoint> pts;
  for (double q : qualities) {
    RDPoint p;
    p.quality = q;
    p.achieved_bitrate = std::pow(10.0, intercept + slope * q);
    p.target_bitrate = p.achieved_bitrate;
    pts.push_back(p);
  }
  return RDCurve(1.0, QualityMetric{MetricKind::PSNR}, std::move(pts));
}

RDCurve scale_rates(const RDCurve& curve, double factor, double k = 2.0) {
  std::vector<RDPoint> pts = curve.points();
  for (auto& p : pts) {
    p.achieved_bitrate *= factor;
    p.target_bitrate *= factor;
    p.k = k;
  }
  return RDCurve(k, curve.metric(), std::move(pts));
}

SyntheticProfile profile_a() {
  SyntheticProfile p;
  p.p0 = 38.0;
  p.r0 = 1e6;
  p.s = 2.2;
  p.c = -0.05;
  p.k_star = 1.5;
  p.w = 0.8;
  p.g = 0.5;
  return p;
}

}  // namespace

TEST_CASE("fit_log_rate recovers an exact linear relation from 4 points") {
  RDCurve curve = curve_from_log_line(0.1, 1.0, {30, 33, 36, 39});
  LogRateFit fit = fit_log_rate(curve);
  CHECK(fit.coefficients[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fit.coefficients[1] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(std::fabs(fit.coefficients[2]) < 1e-9);
  CHECK(std::fabs(fit.coefficients[3]) < 1e-9);
  CHECK(fit.domain_low == 30.0);
  CHECK(fit.domain_high == 39.0);
}

TEST_CASE("fit_log_rate interpolates in-model cubic data to 1e-9") {
  std::vector<RDPoint> pts;
  auto poly = [](double q) {
    return 2.0 + 0.12 * q - 0.002 * q * q + 3e-5 * q * q * q;
  };
  for (int i = 0; i < 11; ++i) {
    double q = 30.0 + i;
    RDPoint p;
    p.quality = q;
    p.achieved_bitrate = std::pow(10.0, poly(q));
    p.target_bitrate = p.achieved_bitrate;
    pts.push_back(p);
  }
  RDCurve curve(1.0, QualityMetric{MetricKind::PSNR}, pts);
  LogRateFit fit = fit_log_rate(curve);
  for (const auto& p : curve.points())
    CHECK(std::fabs(fit.evaluate(p.quality) - std::log10(p.achieved_bitrate)) <
          1e-9);
}

TEST_CASE("fit_log_rate matches the independent normal-equations oracle") {
  RDCurve curve = profile_curve(profile_a(), 1.0, default_bitrate_ladder());
  LogRateFit fit = fit_log_rate(curve);
  std::vector<double> q, lr;
  double span_lo = 1e300, span_hi = -1e300;
  for (const auto& p : curve.points()) {
    q.push_back(p.quality);
    lr.push_back(std::log10(p.achieved_bitrate));
    span_lo = std::min(span_lo, lr.back());
    span_hi = std::max(span_hi, lr.back());
  }
  auto oracle = oracle_polyfit(q, lr);
  double span = span_hi - span_lo;
  for (const auto& p : curve.points()) {
    double ours = fit.evaluate(p.quality);
    double theirs = oracle[0] + p.quality * (oracle[1] + p.quality * (oracle[2] + p.quality * oracle[3]));
    CHECK(std::fabs(ours - theirs) < 1e-6 * span);
  }
}

TEST_CASE("fit_log_rate rejects degenerate input") {
  std::vector<RDPoint> pts = {{1e5, 1e5, 30, 1}, {2e5, 2e5, 30.0, 1},
                              {4e5, 4e5, 30.0, 1}, {8e5, 8e5, 30.0, 1}};
  RDCurve curve(1.0, QualityMetric{MetricKind::PSNR}, pts);
  CHECK_THROWS_WITH_AS(fit_log_rate(curve),
                       doctest::Contains("insufficient points"),
                       std::runtime_error);
}

TEST_CASE("bd_rate of identical curves is exactly zero") {
  RDCurve curve = profile_curve(profile_a(), 1.0, default_bitrate_ladder());
  BDResult r = bd_rate(curve, curve);
  CHECK(r.bd_rate_improvement_pct == 0.0);
  CHECK(r.bd_quality_delta == 0.0);
}

TEST_CASE("bd_rate of a uniform 0.9x rate scaling is 10 percent") {
  RDCurve baseline = profile_curve(profile_a(), 1.0, default_bitrate_ladder());
  RDCurve candidate = scale_rates(baseline, 0.9);
  BDResult r = bd_rate(baseline, candidate);
  CHECK(r.bd_rate_improvement_pct == doctest::Approx(10.0).epsilon(1e-8));
}

TEST_CASE("bd_rate matches the trapezoid quadrature oracle") {
  SyntheticProfile p = profile_a();
  RDCurve baseline = profile_curve(p, 1.0, default_bitrate_ladder());
  RDCurve candidate = profile_curve(p, p.k_star, default_bitrate_ladder());
  BDResult r = bd_rate(baseline, candidate);
  double oracle = trapezoid_bd_improvement(baseline, candidate);
  CHECK(r.bd_rate_improvement_pct == doctest::Approx(oracle).epsilon(1e-9));
  CHECK(std::fabs(r.bd_rate_improvement_pct - oracle) < 1e-6);
  CHECK(r.bd_rate_improvement_pct > 0);
}

TEST_CASE("bd_rate errors on disjoint quality ranges") {
  RDCurve low = curve_from_log_line(0.1, 1.0, {20, 22, 24, 26});
  RDCurve high = curve_from_log_line(0.1, 1.0, {40, 42, 44, 46});
  CHECK_THROWS_WITH_AS(bd_rate(low, high),
                       doctest::Contains("no overlapping quality range"),
                       std::runtime_error);
}

TEST_CASE("bd_rate properties over randomized synthetic pairs") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    SyntheticProfile p = profile_a();
    p.s = 1.8 + u(rng);
    p.c = -0.04 * u(rng);
    p.k_star = 0.6 + 1.8 * u(rng);
    p.w = 0.4 + 1.2 * u(rng);
    double k = 0.3 + 2.4 * u(rng);
    RDCurve a = profile_curve(p, 1.0, default_bitrate_ladder());
    RDCurve b = profile_curve(p, k, default_bitrate_ladder());

    // Antisymmetry of the average log-rate delta.
    double dab = bd_rate(a, b).avg_log_rate_delta;
    double dba = bd_rate(b, a).avg_log_rate_delta;
    CHECK(std::fabs(dab + dba) < 1e-12);

    // Scale equivariance.
    double imp = bd_rate(a, b).bd_rate_improvement_pct;
    double imp_scaled =
        bd_rate(scale_rates(a, 3.7, 1.0), scale_rates(b, 3.7, k))
            .bd_rate_improvement_pct;
    CHECK(std::fabs(imp - imp_scaled) < 1e-9);

    // Quality-shift invariance.
    auto shift = [&](const RDCurve& c) {
      auto pts = c.points();
      for (auto& pt : pts) pt.quality += 2.5;
      return RDCurve(c.k(), c.metric(), std::move(pts));
    };
    double imp_shifted = bd_rate(shift(a), shift(b)).bd_rate_improvement_pct;
    CHECK(std::fabs(imp - imp_shifted) < 1e-9);
  }
}

TEST_CASE("rate_at_quality closed form and domain guard") {
  RDCurve curve = curve_from_log_line(0.1, 1.0, {36, 38, 40, 42});
  CHECK(rate_at_quality(curve, 40.0) == doctest::Approx(100000.0).epsilon(1e-9));
  CHECK_THROWS_WITH_AS(rate_at_quality(curve, 30.0),
                       doctest::Contains("quality outside curve range"),
                       std::runtime_error);
}

TEST_CASE("rate_at_quality inverts the synthetic model analytically") {
  // c = 0, g = 0 keeps the closed-form inverse exact:
  // R(D) = R0 exp((D - P0) / s).
  SyntheticProfile p = profile_a();
  p.c = 0.0;
  p.g = 0.0;
  RDCurve curve = profile_curve(p, p.k_star, default_bitrate_ladder());
  double expected = p.r0 * std::exp((40.0 - p.p0) / p.s);
  double got = rate_at_quality(curve, 40.0);
  CHECK(std::fabs(got - expected) / expected < 1e-3);
}

TEST_CASE("savings_at_quality") {
  RDCurve baseline = profile_curve(profile_a(), 1.0, default_bitrate_ladder());
  SUBCASE("identical curves") {
    CHECK(savings_at_quality(baseline, baseline, 38.0) == 0.0);
  }
  SUBCASE("uniform 0.95x scaling") {
    RDCurve candidate = scale_rates(baseline, 0.95);
    LogRateFit fb = fit_log_rate(baseline);
    LogRateFit fc = fit_log_rate(candidate);
    double q = std::max(fb.domain_low, fc.domain_low) + 0.5;
    CHECK(savings_at_quality(baseline, candidate, q) ==
          doctest::Approx(5.0).epsilon(1e-8));
  }
}

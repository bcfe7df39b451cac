#include "ktune/bd_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ktune {

namespace {

// Solves a 4x4 linear system by Gaussian elimination with partial pivoting.
std::array<double, 4> solve4(std::array<std::array<double, 5>, 4> m) {
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::fabs(m[r][col]) > std::fabs(m[pivot][col])) pivot = r;
    }
    if (std::fabs(m[pivot][col]) < 1e-300)
      throw std::runtime_error("degenerate curve");
    std::swap(m[col], m[pivot]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  std::array<double, 4> x{};
  for (int i = 0; i < 4; ++i) x[i] = m[i][4] / m[i][i];
  return x;
}

LogRateFit fit_quality_axis(const RDCurve& curve) {
  std::vector<double> q, lr;
  for (const RDPoint& p : curve.points()) {
    q.push_back(p.quality);
    lr.push_back(std::log10(p.achieved_bitrate));
  }
  LogRateFit fit;
  fit.coefficients = fit_cubic(q, lr);
  fit.domain_low = *std::min_element(q.begin(), q.end());
  fit.domain_high = *std::max_element(q.begin(), q.end());
  return fit;
}

// Dual fit: quality as a cubic of log10(rate).
LogRateFit fit_rate_axis(const RDCurve& curve) {
  std::vector<double> lr, q;
  for (const RDPoint& p : curve.points()) {
    lr.push_back(std::log10(p.achieved_bitrate));
    q.push_back(p.quality);
  }
  LogRateFit fit;
  fit.coefficients = fit_cubic(lr, q);
  fit.domain_low = lr.front();
  fit.domain_high = lr.back();
  return fit;
}

double mean_fit_difference(const LogRateFit& a, const LogRateFit& b,
                           double lo, double hi) {
  double integral = (a.antiderivative(hi) - a.antiderivative(lo)) -
                    (b.antiderivative(hi) - b.antiderivative(lo));
  return integral / (hi - lo);
}

}  // namespace

double LogRateFit::evaluate(double quality) const {
  const auto& c = coefficients;
  return c[0] + quality * (c[1] + quality * (c[2] + quality * c[3]));
}

double LogRateFit::antiderivative(double quality) const {
  const auto& c = coefficients;
  return quality * (c[0] + quality * (c[1] / 2 + quality * (c[2] / 3 + quality * c[3] / 4)));
}

std::array<double, 4> fit_cubic(const std::vector<double>& x,
                                const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 4)
    throw std::runtime_error("insufficient points for cubic fit");
  std::set<double> distinct(x.begin(), x.end());
  if (distinct.size() < 4)
    throw std::runtime_error("insufficient points for cubic fit");

  // Center and scale the abscissa to condition the normal equations,
  // then expand the fitted polynomial back to the original variable.
  double lo = *distinct.begin(), hi = *distinct.rbegin();
  double mid = (lo + hi) / 2, half = (hi - lo) / 2;

  std::array<double, 7> xp{};  // sums of t^0 .. t^6
  std::array<double, 4> xy{};  // sums of y * t^0 .. t^3
  for (size_t i = 0; i < x.size(); ++i) {
    double t = (x[i] - mid) / half;
    double tp = 1.0;
    for (int p = 0; p <= 6; ++p) {
      xp[p] += tp;
      if (p <= 3) xy[p] += y[i] * tp;
      tp *= t;
    }
  }
  std::array<std::array<double, 5>, 4> m{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) m[r][c] = xp[r + c];
    m[r][4] = xy[r];
  }
  auto b = solve4(m);

  // b gives y = sum b_i t^i with t = (x - mid)/half; expand in x.
  double u = 1.0 / half, v = -mid / half;  // t = u x + v
  std::array<double, 4> out{};
  // t^0
  out[0] += b[0];
  // t^1 = v + u x
  out[0] += b[1] * v;
  out[1] += b[1] * u;
  // t^2 = v^2 + 2uv x + u^2 x^2
  out[0] += b[2] * v * v;
  out[1] += b[2] * 2 * u * v;
  out[2] += b[2] * u * u;
  // t^3
  out[0] += b[3] * v * v * v;
  out[1] += b[3] * 3 * u * v * v;
  out[2] += b[3] * 3 * u * u * v;
  out[3] += b[3] * u * u * u;
  return out;
}

LogRateFit fit_log_rate(const RDCurve& curve) { return fit_quality_axis(curve); }

BDResult bd_rate(const RDCurve& baseline, const RDCurve& candidate) {
  if (baseline.metric().kind != candidate.metric().kind)
    throw std::runtime_error("curves use different quality metrics");

  LogRateFit fb = fit_quality_axis(baseline);
  LogRateFit fc = fit_quality_axis(candidate);
  double d1 = std::max(fb.domain_low, fc.domain_low);
  double d2 = std::min(fb.domain_high, fc.domain_high);
  if (!(d1 < d2)) throw std::runtime_error("no overlapping quality range");

  BDResult r;
  r.overlap_low = d1;
  r.overlap_high = d2;
  r.avg_log_rate_delta = mean_fit_difference(fb, fc, d1, d2);
  r.bd_rate_improvement_pct = (1.0 - std::pow(10.0, -r.avg_log_rate_delta)) * 100.0;

  LogRateFit qb = fit_rate_axis(baseline);
  LogRateFit qc = fit_rate_axis(candidate);
  double r1 = std::max(qb.domain_low, qc.domain_low);
  double r2 = std::min(qb.domain_high, qc.domain_high);
  if (r1 < r2) r.bd_quality_delta = mean_fit_difference(qc, qb, r1, r2);
  return r;
}

double rate_at_quality(const RDCurve& curve, double quality) {
  LogRateFit fit = fit_quality_axis(curve);
  const double eps = 1e-9 * std::max(1.0, std::fabs(fit.domain_high));
  if (quality < fit.domain_low - eps || quality > fit.domain_high + eps)
    throw std::runtime_error("quality outside curve range");
  return std::pow(10.0, fit.evaluate(quality));
}

double savings_at_quality(const RDCurve& baseline, const RDCurve& candidate,
                          double quality) {
  double rb = rate_at_quality(baseline, quality);
  double rc = rate_at_quality(candidate, quality);
  return (rb - rc) / rb * 100.0;
}

}  // namespace ktune

#pragma once

#include <array>

#include "ktune/core_model.hpp"

namespace ktune {

// Cubic least-squares fit of log10(rate) as a function of quality.
// value(q) = c[0] + c[1] q + c[2] q^2 + c[3] q^3 over [domain_low, domain_high].
struct LogRateFit {
  std::array<double, 4> coefficients{};
  double domain_low = 0.0;
  double domain_high = 0.0;

  double evaluate(double quality) const;
  // Antiderivative evaluated at q, for analytic integration.
  double antiderivative(double quality) const;
};

struct BDResult {
  double bd_rate_improvement_pct = 0.0;  // positive = bitrate saved
  double avg_log_rate_delta = 0.0;       // baseline minus candidate, log10 units
  double bd_quality_delta = 0.0;         // positive = quality gained at equal rate
  double overlap_low = 0.0;
  double overlap_high = 0.0;
};

LogRateFit fit_log_rate(const RDCurve& curve);

// Generic helper: cubic least-squares of y against x (normal equations).
std::array<double, 4> fit_cubic(const std::vector<double>& x,
                                const std::vector<double>& y);

BDResult bd_rate(const RDCurve& baseline, const RDCurve& candidate);

// 10^(fit at quality); errors outside the fitted quality span.
double rate_at_quality(const RDCurve& curve, double quality);

// Percent bitrate saved by candidate at a fixed quality.
double savings_at_quality(const RDCurve& baseline, const RDCurve& candidate,
                          double quality);

}  // namespace ktune

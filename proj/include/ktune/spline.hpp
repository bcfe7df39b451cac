#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ktune {

// Natural cubic spline through (x, y) knots, x strictly increasing.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)) {
    size_t n = x_.size();
    if (n < 3 || y_.size() != n)
      throw std::runtime_error("spline needs at least 3 knots");
    for (size_t i = 1; i < n; ++i) {
      if (x_[i] <= x_[i - 1])
        throw std::runtime_error("spline knots must be strictly increasing");
    }
    // Tridiagonal solve for second derivatives, natural end conditions.
    m_.assign(n, 0.0);
    std::vector<double> c(n, 0.0), d(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
      double h0 = x_[i] - x_[i - 1];
      double h1 = x_[i + 1] - x_[i];
      double rhs = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
      double diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
      c[i] = h1 / diag;
      d[i] = (rhs - h0 * d[i - 1]) / diag;
    }
    for (size_t i = n - 2; i >= 1; --i) m_[i] = d[i] - c[i] * m_[i + 1];
  }

  double evaluate(double x) const {
    size_t n = x_.size();
    size_t i = 0;
    if (x <= x_.front()) {
      i = 0;
    } else if (x >= x_.back()) {
      i = n - 2;
    } else {
      size_t lo = 0, hi = n - 1;
      while (hi - lo > 1) {
        size_t mid = (lo + hi) / 2;
        (x_[mid] <= x ? lo : hi) = mid;
      }
      i = lo;
    }
    double h = x_[i + 1] - x_[i];
    double a = (x_[i + 1] - x) / h;
    double b = (x - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_;
  std::vector<double> m_;  // second derivatives at knots
};

}  // namespace ktune

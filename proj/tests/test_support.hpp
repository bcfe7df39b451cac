#pragma once

#include <unistd.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ktune/bd_metrics.hpp"
#include "ktune/core_model.hpp"
#include "ktune/encoder_backend.hpp"

namespace ktune::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ktune_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline ClipManifest test_clip(const std::string& id = "Sports_720P-0b9e",
                              ClassLabel cls = ClassLabel::Sports) {
  ClipManifest m;
  m.clip_id = id;
  m.source_path = "/tmp/" + id + ".y4m";
  m.class_label = cls;
  m.width = 1280;
  m.height = 720;
  m.frame_count = 150;
  m.fps = 30.0;
  return m;
}

inline RDCurve profile_curve(const SyntheticProfile& profile, double k,
                             const std::vector<double>& ladder,
                             MetricKind kind = MetricKind::PSNR,
                             const std::string& clip_id = "clip") {
  SyntheticBackend backend;
  backend.set_profile(clip_id, profile);
  ClipManifest clip = test_clip(clip_id);
  std::vector<RDPoint> points;
  for (double target : ladder) {
    EncodeRequest req{clip, k, target, QualityMetric{kind}};
    points.push_back(backend.encode(req));
  }
  return RDCurve(k, QualityMetric{kind}, cleanup_monotone(std::move(points)));
}

// Independent cubic least-squares oracle: plain unscaled normal equations
// solved by Cramer-free Gauss-Jordan on the 4x4 system.
inline std::array<double, 4> oracle_polyfit(const std::vector<double>& x,
                                            const std::vector<double>& y) {
  double sx[7] = {0, 0, 0, 0, 0, 0, 0};
  double sy[4] = {0, 0, 0, 0};
  for (size_t i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int j = 0; j <= 6; ++j) {
      sx[j] += p;
      if (j <= 3) sy[j] += y[i] * p;
      p *= x[i];
    }
  }
  double a[4][5];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a[r][c] = sx[r + c];
    a[r][4] = sy[r];
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    for (int c = 0; c < 5; ++c) std::swap(a[col][c], a[piv][c]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int c = 0; c < 5; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2],
          a[3][4] / a[3][3]};
}

// Quadrature oracle for the BD-Rate integral: 10,000-interval trapezoid
// over the same cubic fits, then the same percentage mapping.
inline double trapezoid_bd_improvement(const RDCurve& baseline,
                                       const RDCurve& candidate) {
  LogRateFit fb = fit_log_rate(baseline);
  LogRateFit fc = fit_log_rate(candidate);
  double d1 = std::max(fb.domain_low, fc.domain_low);
  double d2 = std::min(fb.domain_high, fc.domain_high);
  const int n = 10000;
  double h = (d2 - d1) / n;
  double sum = 0.0;
  for (int i = 0; i <= n; ++i) {
    double d = d1 + h * i;
    double f = fb.evaluate(d) - fc.evaluate(d);
    sum += (i == 0 || i == n) ? 0.5 * f : f;
  }
  double delta = sum * h / (d2 - d1);
  return (1.0 - std::pow(10.0, -delta)) * 100.0;
}

inline void write_file(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path);
  out << content;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ktune::test

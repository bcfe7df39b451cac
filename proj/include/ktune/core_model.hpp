#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ktune {

// The eleven YouTube-UGC content classes.
enum class ClassLabel {
  Animation,
  CoverSong,
  Gaming,
  HowTo,
  LiveMusic,
  LyricVideo,
  MusicVideo,
  NewsClip,
  Sports,
  TelevisionClip,
  Vlog,
};

const std::vector<std::string>& class_label_names();
std::string to_string(ClassLabel label);
ClassLabel class_label_from_string(const std::string& name);

enum class MetricKind { PSNR, SSIM };

std::string to_string(MetricKind kind);
MetricKind metric_from_string(const std::string& name);

struct QualityMetric {
  MetricKind kind = MetricKind::PSNR;
};

struct ClipManifest {
  std::string clip_id;
  std::filesystem::path source_path;
  ClassLabel class_label = ClassLabel::Animation;
  int width = 0;
  int height = 0;
  int frame_count = 0;
  double fps = 0.0;

  void validate() const;
};

// One encode outcome at a fixed (k, target bitrate).
struct RDPoint {
  double target_bitrate = 0.0;    // bits/s
  double achieved_bitrate = 0.0;  // bits/s
  double quality = 0.0;           // dB (PSNR) or unitless (SSIM)
  double k = 1.0;
};

// Ordered operating points for one multiplier value. The constructor
// enforces the invariants needed by the cubic BD fit; use
// cleanup_monotone() first for raw encoder output.
class RDCurve {
 public:
  RDCurve(double k, QualityMetric metric, std::vector<RDPoint> points);

  double k() const { return k_; }
  const QualityMetric& metric() const { return metric_; }
  const std::vector<RDPoint>& points() const { return points_; }

 private:
  double k_;
  QualityMetric metric_;
  std::vector<RDPoint> points_;
};

// Drops points dominated by a cheaper, at-least-as-good point so the
// surviving set is strictly increasing in both rate and quality.
// Dropped points are reported through `dropped` when non-null.
std::vector<RDPoint> cleanup_monotone(std::vector<RDPoint> points,
                                      std::vector<RDPoint>* dropped = nullptr);

enum class Method { MultiRes, GoldenSection, Brent };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct TraceEntry {
  int iteration = 0;  // 1-based
  double k = 0.0;
  double improvement_pct = 0.0;
  double best_so_far_pct = 0.0;
};

struct OptimizerTrace {
  Method method = Method::Brent;
  std::vector<TraceEntry> iterations;
};

struct ClipResult {
  std::string clip_id;
  ClassLabel class_label = ClassLabel::Animation;
  Method method = Method::Brent;
  double k_star = 1.0;
  double bd_rate_improvement_pct = 0.0;
  double bd_quality_delta = 0.0;
  int objective_evaluations = 0;
  OptimizerTrace trace;
};

// Manifest CSV: clip_id,path,class,width,height,frames,fps
std::vector<ClipManifest> load_manifest(const std::filesystem::path& path);

// Results CSV row formatting (header in results_csv_header()).
std::string results_csv_header();
std::string to_results_csv_row(const ClipResult& result);
ClipResult clip_result_from_csv_row(const std::string& row);

// 11 log-spaced targets from 256 kb/s to 7 Mb/s.
std::vector<double> default_bitrate_ladder();

// Formats a double with 6 significant digits, no trailing noise.
std::string format_sig6(double value);

}  // namespace ktune

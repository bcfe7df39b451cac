#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "ktune/bd_metrics.hpp"
#include "ktune/core_model.hpp"
#include "ktune/encoder_backend.hpp"
#include "ktune/optimizers.hpp"

namespace ktune {

// Persistent store of encode results keyed by
// (clip_id, k rounded to 1e-6, target bitrate, metric, backend fingerprint).
// A change of fingerprint invalidates entries by construction of the key.
class EncodeCache {
 public:
  // Empty directory keeps the cache memory-only.
  explicit EncodeCache(std::filesystem::path directory = {});

  std::optional<RDPoint> get(const std::string& clip_id, double k,
                             double target_bitrate, MetricKind metric,
                             const std::string& fingerprint);
  void put(const std::string& clip_id, double k, double target_bitrate,
           MetricKind metric, const std::string& fingerprint,
           const RDPoint& point);

 private:
  std::filesystem::path directory_;
  std::mutex mutex_;
  std::unordered_map<std::string, RDPoint> entries_;
};

enum class BackendKind { Synthetic, Subprocess };

struct RunConfig {
  std::filesystem::path manifest_path;
  std::vector<Method> methods = {Method::Brent};
  QualityMetric metric;
  std::vector<double> ladder = default_bitrate_ladder();
  SearchConfig search;
  BackendKind backend = BackendKind::Synthetic;
  double synthetic_noise = 0.0;
  std::string command_template;  // subprocess backend
  LogFieldMap log_fields;
  int parallelism = 1;
  std::filesystem::path cache_dir;
  std::filesystem::path out_dir = "run";
  double probe_quality = 40.0;
  // Verify cache hits against a fresh backend call.
  bool cache_audit = false;

  void validate() const;
};

// Encodes one point per ladder entry (cache first), cleans up
// non-monotone points and validates the result as a curve.
RDCurve build_rd_curve(const ClipManifest& clip, double k,
                       const std::vector<double>& ladder, QualityMetric metric,
                       EncoderBackend& backend, EncodeCache& cache,
                       bool audit = false);

// BD-Rate improvement of the k-curve over the k=1 baseline, memoized per k.
Objective make_objective(const ClipManifest& clip, const RDCurve& baseline,
                         const std::vector<double>& ladder,
                         QualityMetric metric, EncoderBackend& backend,
                         EncodeCache& cache, bool audit = false);

struct ClipOutcome {
  ClipResult result;
  std::shared_ptr<RDCurve> baseline;
  std::shared_ptr<RDCurve> best_curve;
  std::optional<double> probe_savings_pct;  // at RunConfig::probe_quality
};

ClipOutcome optimize_clip(const ClipManifest& clip, Method method,
                          const RunConfig& cfg, EncoderBackend& backend,
                          EncodeCache& cache,
                          std::shared_ptr<RDCurve> shared_baseline = nullptr);

struct BatchFailure {
  std::string clip_id;
  Method method;
  std::string error;
};

struct BatchSummary {
  std::vector<ClipOutcome> outcomes;  // sorted by (clip_id, method)
  std::vector<BatchFailure> failures;
  long backend_calls = 0;
};

// Runs every (clip, method) pair, writes results.csv, per-clip traces,
// curve files and the probe table under cfg.out_dir. Per-clip failures are
// collected, not fatal.
BatchSummary run_batch(const RunConfig& cfg);

std::unique_ptr<EncoderBackend> make_backend(const RunConfig& cfg);

// Curve CSV helpers (header: achieved_bitrate,quality).
void write_curve_csv(const std::filesystem::path& path, const RDCurve& curve);
RDCurve read_curve_csv(const std::filesystem::path& path, QualityMetric metric,
                       double k = 1.0);

}  // namespace ktune

#pragma once

#include <map>
#include <memory>
#include <string>

#include "ktune/core_model.hpp"

namespace ktune {

enum class FrameType { I, P, B };

enum class CodecGeneration { H263, H26x };

// Default encoder Lagrangian for the given frame type and quantizer.
// H26x covers the H.264/H.265 defaults; H263 is the historical quadratic rule.
double lambda_default(FrameType frame_type, int q,
                      CodecGeneration generation = CodecGeneration::H26x);

struct EncodeRequest {
  ClipManifest clip;
  double k = 1.0;
  double target_bitrate = 0.0;
  QualityMetric metric;

  void validate() const;
};

class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;
  virtual RDPoint encode(const EncodeRequest& request) = 0;
  // Identifies the backend configuration for cache keying.
  virtual std::string fingerprint() const = 0;
};

// Deterministic closed-form quality model standing in for a real encoder.
//
//   quality(R, k) = P0 + s ln(R/R0) + c ln^2(R/R0)
//                   - w ln^2(k/k_star) (1 + g u(R))
//                   - spike_depth (1 - exp(-ln^2(k/k_star) / (2 spike_width^2)))
//
// with u(R) = max(0, ln(Rmax/R) / ln(Rmax/Rmin)) over [256 kb/s, 7 Mb/s].
// The penalty vanishes at k = k_star. The optional narrow spike term
// (default off) adds fine structure near the optimum for convergence studies.
struct SyntheticProfile {
  double p0 = 38.0;      // dB at the reference rate
  double r0 = 1e6;       // reference rate, bits/s
  double s = 2.2;        // slope, dB per ln-rate unit
  double c = 0.0;        // curvature, dB
  double k_star = 1.5;
  double w = 0.8;        // penalty weight, dB
  double g = 0.5;        // extra low-bitrate penalty factor
  double spike_depth = 0.0;  // dB; 0 disables the narrow term
  double spike_width = 0.01; // in ln(k) units

  void validate() const;
  double quality(double rate, double k) const;
};

class SyntheticBackend : public EncoderBackend {
 public:
  // noise_amplitude perturbs quality by a seeded hash of
  // (clip_id, k, target); 0 keeps the backend a pure function.
  explicit SyntheticBackend(double noise_amplitude = 0.0, uint64_t seed = 0);

  void set_profile(const std::string& clip_id, const SyntheticProfile& profile);
  // Profile for a clip: registered if present, otherwise derived
  // deterministically from the manifest.
  SyntheticProfile profile_for(const ClipManifest& clip) const;

  RDPoint encode(const EncodeRequest& request) override;
  std::string fingerprint() const override;

 private:
  std::map<std::string, SyntheticProfile> profiles_;
  double noise_amplitude_;
  uint64_t seed_;
};

// Column-name configuration for encoder log parsing. Defaults target the
// x265 CSV summary row (bitrate reported in kb/s).
struct LogFieldMap {
  std::string bitrate_column = "Bitrate";
  std::string psnr_column = "PSNR";
  std::string ssim_column = "SSIM";
  double bitrate_scale = 1000.0;  // kb/s -> bits/s
};

// Parses an encoder CSV log (header row, summary on the final data row).
std::pair<double, double> parse_encode_log(const std::string& log_text,
                                           QualityMetric metric,
                                           const LogFieldMap& fields = {});

// Runs an external k-aware encoder via a command template with the
// placeholders {input} {bitrate} {k} {metric_flags} {output} {log}.
class SubprocessBackend : public EncoderBackend {
 public:
  struct Options {
    std::string command_template;
    LogFieldMap fields;
    std::filesystem::path work_dir = ".";
    int timeout_seconds = 1800;
  };

  explicit SubprocessBackend(Options options);

  RDPoint encode(const EncodeRequest& request) override;
  std::string fingerprint() const override;

 private:
  Options options_;
};

}  // namespace ktune

#include "ktune/encoder_backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ktune {

namespace {

constexpr double kRateMin = 256000.0;
constexpr double kRateMax = 7000000.0;

uint64_t fnv1a(const std::string& data, uint64_t seed) {
  uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Hash mapped to [-1, 1].
double hash_noise(const std::string& key, uint64_t seed) {
  uint64_t h = fnv1a(key, seed);
  return (static_cast<double>(h >> 11) / static_cast<double>(1ull << 53)) * 2.0 - 1.0;
}

std::string replace_all(std::string text, const std::string& from,
                        const std::string& to) {
  size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
  return text;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

double lambda_default(FrameType frame_type, int q, CodecGeneration generation) {
  if (q < 0 || q > 51)
    throw std::runtime_error("quantizer " + std::to_string(q) +
                             " outside codec range [0, 51]");
  if (generation == CodecGeneration::H263) return 0.85 * q * q;
  double base = std::pow(2.0, (q - 12) / 3.0);
  switch (frame_type) {
    case FrameType::I: return 0.57 * base;
    case FrameType::P: return 0.85 * base;
    case FrameType::B:
      return 0.68 * std::max(2.0, std::min(4.0, (q - 12) / 6.0)) * base;
  }
  throw std::runtime_error("unknown frame type");
}

void EncodeRequest::validate() const {
  if (k <= 0) throw std::runtime_error("k must be positive");
  if (target_bitrate <= 0)
    throw std::runtime_error("target bitrate must be positive");
}

void SyntheticProfile::validate() const {
  if (s <= 0) throw std::runtime_error("synthetic profile: s must be positive");
  if (w < 0) throw std::runtime_error("synthetic profile: w must be non-negative");
  if (k_star <= 0)
    throw std::runtime_error("synthetic profile: k_star must be positive");
  if (spike_depth < 0 || spike_width <= 0)
    throw std::runtime_error("synthetic profile: invalid spike term");
  // dq/dR = (s + 2c ln(R/R0)) / R must stay positive; the expression in
  // parentheses is linear in ln R, so the endpoints suffice.
  for (double r : {kRateMin, kRateMax}) {
    if (s + 2.0 * c * std::log(r / r0) <= 0)
      throw std::runtime_error(
          "synthetic profile: quality not strictly increasing over the rate range");
  }
}

double SyntheticProfile::quality(double rate, double k) const {
  double x = std::log(rate / r0);
  double base = p0 + s * x + c * x * x;
  double u = std::max(0.0, std::log(kRateMax / rate) / std::log(kRateMax / kRateMin));
  double lk = std::log(k / k_star);
  double penalty = w * lk * lk * (1.0 + g * u);
  if (spike_depth > 0)
    penalty += spike_depth *
               (1.0 - std::exp(-lk * lk / (2.0 * spike_width * spike_width)));
  return base - penalty;
}

SyntheticBackend::SyntheticBackend(double noise_amplitude, uint64_t seed)
    : noise_amplitude_(noise_amplitude), seed_(seed) {}

void SyntheticBackend::set_profile(const std::string& clip_id,
                                   const SyntheticProfile& profile) {
  profile.validate();
  profiles_[clip_id] = profile;
}

SyntheticProfile SyntheticBackend::profile_for(const ClipManifest& clip) const {
  auto it = profiles_.find(clip.clip_id);
  if (it != profiles_.end()) return it->second;

  // Derived profile: deterministic in the manifest fields.
  auto unit = [&](const char* tag) {
    return (hash_noise(clip.clip_id + "|" + tag, 0x9e3779b97f4a7c15ull) + 1.0) / 2.0;
  };
  SyntheticProfile p;
  bool hd = clip.height >= 720;
  p.p0 = (hd ? 37.0 : 35.0) + 3.0 * unit("p0");
  p.r0 = hd ? 1.5e6 : 8e5;
  p.s = 1.8 + 1.0 * unit("s");
  p.c = -0.04 * unit("c");
  p.k_star = 0.6 + 1.8 * unit("kstar");
  p.w = 0.3 + 1.2 * unit("w");
  p.g = 0.8 * unit("g");
  p.validate();
  return p;
}

RDPoint SyntheticBackend::encode(const EncodeRequest& request) {
  request.validate();
  SyntheticProfile profile = profile_for(request.clip);
  double q = profile.quality(request.target_bitrate, request.k);
  if (noise_amplitude_ > 0) {
    std::ostringstream key;
    key << request.clip.clip_id << '|' << request.k << '|'
        << request.target_bitrate;
    q += noise_amplitude_ * hash_noise(key.str(), seed_);
  }
  RDPoint point;
  point.target_bitrate = request.target_bitrate;
  point.achieved_bitrate = request.target_bitrate;
  point.k = request.k;
  if (request.metric.kind == MetricKind::SSIM) {
    point.quality = std::clamp(1.0 - std::pow(10.0, -q / 10.0), 1e-9, 1.0);
  } else {
    point.quality = q;
  }
  return point;
}

std::string SyntheticBackend::fingerprint() const {
  std::ostringstream out;
  out << "synthetic;noise=" << noise_amplitude_ << ";seed=" << seed_;
  for (const auto& [id, p] : profiles_) {
    out << ';' << id << ':' << p.p0 << ',' << p.r0 << ',' << p.s << ',' << p.c
        << ',' << p.k_star << ',' << p.w << ',' << p.g << ',' << p.spike_depth
        << ',' << p.spike_width;
  }
  return "fp" + std::to_string(fnv1a(out.str(), 0));
}

std::pair<double, double> parse_encode_log(const std::string& log_text,
                                           QualityMetric metric,
                                           const LogFieldMap& fields) {
  std::vector<std::string> lines;
  std::stringstream ss(log_text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  if (lines.size() < 2)
    throw std::runtime_error("encode log has no data rows");

  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream s(l);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(trim(cell));
    return cells;
  };
  auto header = split(lines.front());
  auto summary = split(lines.back());

  const std::string& metric_column =
      metric.kind == MetricKind::PSNR ? fields.psnr_column : fields.ssim_column;
  auto find_col = [&](const std::string& name) -> size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("missing column '" + name + "' in encode log");
    return static_cast<size_t>(it - header.begin());
  };
  size_t bi = find_col(fields.bitrate_column);
  size_t mi = find_col(metric_column);

  auto cell_value = [&](size_t col, const std::string& name) {
    if (col >= summary.size())
      throw std::runtime_error("missing column '" + name + "' in summary row");
    try {
      return std::stod(summary[col]);
    } catch (const std::exception&) {
      throw std::runtime_error("non-numeric cell in column '" + name +
                               "' of the summary row: '" + summary[col] + "'");
    }
  };
  double bitrate = cell_value(bi, fields.bitrate_column) * fields.bitrate_scale;
  double quality = cell_value(mi, metric_column);
  return {bitrate, quality};
}

SubprocessBackend::SubprocessBackend(Options options)
    : options_(std::move(options)) {
  if (options_.command_template.empty())
    throw std::runtime_error("subprocess backend needs a command template");
}

RDPoint SubprocessBackend::encode(const EncodeRequest& request) {
  request.validate();
  if (!std::filesystem::exists(request.clip.source_path))
    throw std::runtime_error("clip file not found: " +
                             request.clip.source_path.string());

  std::ostringstream stem;
  stem << request.clip.clip_id << "_k" << request.k << "_r"
       << static_cast<long long>(request.target_bitrate);
  std::filesystem::create_directories(options_.work_dir);
  auto out_path = options_.work_dir / (stem.str() + ".out");
  auto log_path = options_.work_dir / (stem.str() + ".csv");

  std::string metric_flags = request.metric.kind == MetricKind::PSNR
                                 ? "--tune-psnr --psnr"
                                 : "--tune-ssim --ssim";
  std::string cmd = options_.command_template;
  cmd = replace_all(cmd, "{input}", request.clip.source_path.string());
  cmd = replace_all(cmd, "{bitrate}",
                    std::to_string(static_cast<long long>(request.target_bitrate)));
  cmd = replace_all(cmd, "{k}", format_sig6(request.k));
  cmd = replace_all(cmd, "{metric_flags}", metric_flags);
  cmd = replace_all(cmd, "{output}", out_path.string());
  cmd = replace_all(cmd, "{log}", log_path.string());

  std::string full = "timeout " + std::to_string(options_.timeout_seconds) +
                     "s sh -c '" + replace_all(cmd, "'", "'\\''") + "' 2>&1";
  FILE* pipe = popen(full.c_str(), "r");
  if (!pipe) throw std::runtime_error("failed to launch encoder subprocess");
  std::string captured;
  char buf[4096];
  size_t n;
  while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) captured.append(buf, n);
  int status = pclose(pipe);
  int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (exit_code == 124)
    throw std::runtime_error("encoder timed out after " +
                             std::to_string(options_.timeout_seconds) + "s: " + cmd);
  if (exit_code != 0)
    throw std::runtime_error("encoder exited with status " +
                             std::to_string(exit_code) + ": " + captured);

  std::ifstream log(log_path);
  if (!log)
    throw std::runtime_error("encoder log not found: " + log_path.string());
  std::stringstream text;
  text << log.rdbuf();
  auto [bitrate, quality] = parse_encode_log(text.str(), request.metric,
                                             options_.fields);
  RDPoint point;
  point.target_bitrate = request.target_bitrate;
  point.achieved_bitrate = bitrate;
  point.quality = quality;
  point.k = request.k;
  return point;
}

std::string SubprocessBackend::fingerprint() const {
  return "fp" + std::to_string(fnv1a("subprocess;" + options_.command_template +
                                         ";" + options_.fields.bitrate_column +
                                         ";" + options_.fields.psnr_column + ";" +
                                         options_.fields.ssim_column,
                                     0));
}

}  // namespace ktune

#include "ktune/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ktune {

namespace {

const std::vector<std::string> kClassNames = {
    "Animation",  "CoverSong",  "Gaming",   "HowTo",
    "LiveMusic",  "LyricVideo", "MusicVideo", "NewsClip",
    "Sports",     "TelevisionClip", "Vlog"};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double_field(const std::string& text, const std::string& what,
                          size_t row) {
  try {
    size_t pos = 0;
    double v = std::stod(text, &pos);
    if (pos != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("manifest row " + std::to_string(row) +
                             ": field '" + what + "' is not numeric: '" +
                             text + "'");
  }
}

}  // namespace

const std::vector<std::string>& class_label_names() { return kClassNames; }

std::string to_string(ClassLabel label) {
  return kClassNames.at(static_cast<size_t>(label));
}

ClassLabel class_label_from_string(const std::string& name) {
  for (size_t i = 0; i < kClassNames.size(); ++i) {
    if (kClassNames[i] == name) return static_cast<ClassLabel>(i);
  }
  std::string valid;
  for (const auto& n : kClassNames) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw std::runtime_error("unknown class label '" + name +
                           "' (valid labels: " + valid + ")");
}

std::string to_string(MetricKind kind) {
  return kind == MetricKind::PSNR ? "PSNR" : "SSIM";
}

MetricKind metric_from_string(const std::string& name) {
  if (name == "PSNR" || name == "psnr") return MetricKind::PSNR;
  if (name == "SSIM" || name == "ssim") return MetricKind::SSIM;
  throw std::runtime_error("unknown metric '" + name + "' (PSNR or SSIM)");
}

void ClipManifest::validate() const {
  if (clip_id.empty()) throw std::runtime_error("clip_id must be non-empty");
  if (width <= 0 || height <= 0)
    throw std::runtime_error("clip '" + clip_id + "': resolution must be positive");
  if (frame_count <= 0)
    throw std::runtime_error("clip '" + clip_id + "': frame_count must be positive");
  if (fps <= 0)
    throw std::runtime_error("clip '" + clip_id + "': fps must be positive");
}

RDCurve::RDCurve(double k, QualityMetric metric, std::vector<RDPoint> points)
    : k_(k), metric_(metric), points_(std::move(points)) {
  if (points_.size() < 4)
    throw std::runtime_error("RD curve needs at least 4 points, got " +
                             std::to_string(points_.size()));
  std::sort(points_.begin(), points_.end(),
            [](const RDPoint& a, const RDPoint& b) {
              return a.achieved_bitrate < b.achieved_bitrate;
            });
  for (size_t i = 0; i < points_.size(); ++i) {
    const RDPoint& p = points_[i];
    if (p.achieved_bitrate <= 0)
      throw std::runtime_error("RD point has non-positive bitrate");
    if (metric_.kind == MetricKind::PSNR) {
      if (!std::isfinite(p.quality) || p.quality <= 0)
        throw std::runtime_error("PSNR quality must be finite and positive");
    } else {
      if (!(p.quality > 0 && p.quality <= 1))
        throw std::runtime_error("SSIM quality must lie in (0, 1]");
    }
    if (i > 0) {
      if (p.achieved_bitrate <= points_[i - 1].achieved_bitrate)
        throw std::runtime_error("RD curve bitrates must be strictly increasing");
      if (p.quality < points_[i - 1].quality)
        throw std::runtime_error(
            "RD curve quality must be non-decreasing in bitrate; "
            "run cleanup_monotone first");
    }
  }
}

std::vector<RDPoint> cleanup_monotone(std::vector<RDPoint> points,
                                      std::vector<RDPoint>* dropped) {
  std::sort(points.begin(), points.end(),
            [](const RDPoint& a, const RDPoint& b) {
              if (a.achieved_bitrate != b.achieved_bitrate)
                return a.achieved_bitrate < b.achieved_bitrate;
              return a.quality > b.quality;
            });
  // Keep a point only if no cheaper point matches or beats its quality.
  std::vector<RDPoint> kept;
  for (const RDPoint& p : points) {
    if (!kept.empty() && (p.achieved_bitrate <= kept.back().achieved_bitrate ||
                          p.quality <= kept.back().quality)) {
      if (dropped) dropped->push_back(p);
      continue;
    }
    kept.push_back(p);
  }
  return kept;
}

std::string to_string(Method method) {
  switch (method) {
    case Method::MultiRes: return "multires";
    case Method::GoldenSection: return "golden";
    case Method::Brent: return "brent";
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  if (name == "multires" || name == "multi-res") return Method::MultiRes;
  if (name == "golden" || name == "golden-section") return Method::GoldenSection;
  if (name == "brent") return Method::Brent;
  throw std::runtime_error("unknown method '" + name +
                           "' (multires, golden, brent)");
}

std::vector<ClipManifest> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open manifest: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("manifest is empty (missing header): " +
                             path.string());
  const std::string expected = "clip_id,path,class,width,height,frames,fps";
  // Tolerate a UTF-8 BOM and trailing CR.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw std::runtime_error("manifest header mismatch, expected '" + expected +
                             "', got '" + line + "'");

  std::vector<ClipManifest> clips;
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 7)
      throw std::runtime_error("manifest row " + std::to_string(row) +
                               ": expected 7 fields, got " +
                               std::to_string(fields.size()));
    ClipManifest m;
    m.clip_id = fields[0];
    m.source_path = fields[1];
    m.class_label = class_label_from_string(fields[2]);
    m.width = static_cast<int>(parse_double_field(fields[3], "width", row));
    m.height = static_cast<int>(parse_double_field(fields[4], "height", row));
    m.frame_count =
        static_cast<int>(parse_double_field(fields[5], "frames", row));
    m.fps = parse_double_field(fields[6], "fps", row);
    try {
      m.validate();
    } catch (const std::exception& e) {
      throw std::runtime_error("manifest row " + std::to_string(row) + ": " +
                               e.what());
    }
    clips.push_back(std::move(m));
  }
  return clips;
}

std::vector<double> default_bitrate_ladder() {
  const double lo = 256000.0;
  const double hi = 7000000.0;
  const int n = 11;
  std::vector<double> ladder(n);
  for (int i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / (n - 1);
    ladder[i] = lo * std::pow(hi / lo, t);
  }
  ladder.front() = lo;
  ladder.back() = hi;
  return ladder;
}

std::string format_sig6(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

std::string results_csv_header() {
  return "clip_id,class,method,k_star,bd_rate_improvement_pct,"
         "bd_quality_delta,objective_evaluations";
}

std::string to_results_csv_row(const ClipResult& r) {
  std::ostringstream out;
  out << r.clip_id << ',' << to_string(r.class_label) << ','
      << to_string(r.method) << ',' << format_sig6(r.k_star) << ','
      << format_sig6(r.bd_rate_improvement_pct) << ','
      << format_sig6(r.bd_quality_delta) << ',' << r.objective_evaluations;
  return out.str();
}

ClipResult clip_result_from_csv_row(const std::string& row) {
  auto fields = split_csv_line(row);
  if (fields.size() != 7)
    throw std::runtime_error("results row: expected 7 fields, got " +
                             std::to_string(fields.size()));
  ClipResult r;
  r.clip_id = fields[0];
  r.class_label = class_label_from_string(fields[1]);
  r.method = method_from_string(fields[2]);
  r.k_star = std::stod(fields[3]);
  r.bd_rate_improvement_pct = std::stod(fields[4]);
  r.bd_quality_delta = std::stod(fields[5]);
  r.objective_evaluations = std::stoi(fields[6]);
  return r;
}

}  // namespace ktune

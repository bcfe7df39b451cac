#include "ktune/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace ktune {

namespace {

std::string cache_key(const std::string& clip_id, double k,
                      double target_bitrate, MetricKind metric,
                      const std::string& fingerprint) {
  std::ostringstream out;
  out << clip_id << '|' << std::llround(k * 1e6) << '|'
      << std::llround(target_bitrate) << '|' << to_string(metric) << '|'
      << fingerprint;
  return out.str();
}

std::string key_filename(const std::string& key) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str() + ".rec";
}

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool points_equal(const RDPoint& a, const RDPoint& b) {
  return a.target_bitrate == b.target_bitrate &&
         a.achieved_bitrate == b.achieved_bitrate && a.quality == b.quality &&
         a.k == b.k;
}

// Counts calls into the wrapped backend; used for cache accounting.
class CountingBackend : public EncoderBackend {
 public:
  CountingBackend(EncoderBackend& inner, std::atomic<long>& counter)
      : inner_(inner), counter_(counter) {}
  RDPoint encode(const EncodeRequest& request) override {
    ++counter_;
    return inner_.encode(request);
  }
  std::string fingerprint() const override { return inner_.fingerprint(); }

 private:
  EncoderBackend& inner_;
  std::atomic<long>& counter_;
};

}  // namespace

EncodeCache::EncodeCache(std::filesystem::path directory)
    : directory_(std::move(directory)) {
  if (!directory_.empty()) std::filesystem::create_directories(directory_);
}

std::optional<RDPoint> EncodeCache::get(const std::string& clip_id, double k,
                                        double target_bitrate,
                                        MetricKind metric,
                                        const std::string& fingerprint) {
  std::string key = cache_key(clip_id, k, target_bitrate, metric, fingerprint);
  {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it != entries_.end()) return it->second;
  }
  if (directory_.empty()) return std::nullopt;
  std::ifstream in(directory_ / key_filename(key));
  if (!in) return std::nullopt;
  RDPoint p;
  std::string stored_key, line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string name = line.substr(0, eq), value = line.substr(eq + 1);
    if (name == "key") stored_key = value;
    else if (name == "target_bitrate") p.target_bitrate = std::stod(value);
    else if (name == "achieved_bitrate") p.achieved_bitrate = std::stod(value);
    else if (name == "quality") p.quality = std::stod(value);
    else if (name == "k") p.k = std::stod(value);
  }
  if (stored_key != key) return std::nullopt;  // hash collision or stale file
  std::lock_guard lock(mutex_);
  entries_[key] = p;
  return p;
}

void EncodeCache::put(const std::string& clip_id, double k,
                      double target_bitrate, MetricKind metric,
                      const std::string& fingerprint, const RDPoint& point) {
  std::string key = cache_key(clip_id, k, target_bitrate, metric, fingerprint);
  {
    std::lock_guard lock(mutex_);
    entries_[key] = point;
  }
  if (directory_.empty()) return;
  std::ofstream out(directory_ / key_filename(key));
  out << "key=" << key << '\n'
      << "target_bitrate=" << format_full(point.target_bitrate) << '\n'
      << "achieved_bitrate=" << format_full(point.achieved_bitrate) << '\n'
      << "quality=" << format_full(point.quality) << '\n'
      << "k=" << format_full(point.k) << '\n';
}

void RunConfig::validate() const {
  if (methods.empty()) throw std::runtime_error("at least one method required");
  if (parallelism < 1) throw std::runtime_error("parallelism must be >= 1");
  if (ladder.size() < 4)
    throw std::runtime_error("bitrate ladder needs at least 4 entries");
  search.validate();
  if (backend == BackendKind::Subprocess && command_template.empty())
    throw std::runtime_error("subprocess backend needs --command-template");
}

RDCurve build_rd_curve(const ClipManifest& clip, double k,
                       const std::vector<double>& ladder, QualityMetric metric,
                       EncoderBackend& backend, EncodeCache& cache,
                       bool audit) {
  if (ladder.size() < 4)
    throw std::runtime_error("insufficient points: ladder has " +
                             std::to_string(ladder.size()) +
                             " entries, need at least 4");
  std::string fp = backend.fingerprint();
  std::vector<RDPoint> points;
  for (double target : ladder) {
    auto cached = cache.get(clip.clip_id, k, target, metric.kind, fp);
    RDPoint p;
    if (cached) {
      p = *cached;
      if (audit) {
        EncodeRequest req{clip, k, target, metric};
        RDPoint fresh = backend.encode(req);
        if (!points_equal(fresh, p))
          throw std::runtime_error("cache audit mismatch for clip '" +
                                   clip.clip_id + "' at k=" + format_sig6(k) +
                                   ", target=" + format_sig6(target));
      }
    } else {
      EncodeRequest req{clip, k, target, metric};
      try {
        p = backend.encode(req);
      } catch (const std::exception& e) {
        throw std::runtime_error("encode failed for clip '" + clip.clip_id +
                                 "' at k=" + format_sig6(k) + ", target=" +
                                 format_sig6(target) + ": " + e.what());
      }
      cache.put(clip.clip_id, k, target, metric.kind, fp, p);
    }
    points.push_back(p);
  }
  std::vector<RDPoint> dropped;
  auto kept = cleanup_monotone(std::move(points), &dropped);
  if (kept.size() < 4)
    throw std::runtime_error("insufficient points: only " +
                             std::to_string(kept.size()) +
                             " survive monotonicity cleanup for clip '" +
                             clip.clip_id + "' at k=" + format_sig6(k));
  return RDCurve(k, metric, std::move(kept));
}

Objective make_objective(const ClipManifest& clip, const RDCurve& baseline,
                         const std::vector<double>& ladder,
                         QualityMetric metric, EncoderBackend& backend,
                         EncodeCache& cache, bool audit) {
  auto base = std::make_shared<RDCurve>(baseline);
  return Objective([&backend, &cache, clip, base, ladder, metric,
                    audit](double k) {
    try {
      RDCurve candidate =
          build_rd_curve(clip, k, ladder, metric, backend, cache, audit);
      return bd_rate(*base, candidate).bd_rate_improvement_pct;
    } catch (const std::exception& e) {
      throw std::runtime_error("objective failed at k=" + format_sig6(k) +
                               ": " + e.what());
    }
  });
}

ClipOutcome optimize_clip(const ClipManifest& clip, Method method,
                          const RunConfig& cfg, EncoderBackend& backend,
                          EncodeCache& cache,
                          std::shared_ptr<RDCurve> shared_baseline) {
  std::shared_ptr<RDCurve> baseline = shared_baseline;
  if (!baseline) {
    baseline = std::make_shared<RDCurve>(build_rd_curve(
        clip, 1.0, cfg.ladder, cfg.metric, backend, cache, cfg.cache_audit));
  }
  Objective objective = make_objective(clip, *baseline, cfg.ladder, cfg.metric,
                                       backend, cache, cfg.cache_audit);
  SearchOutcome outcome = run_method(method, objective, cfg.search);

  ClipOutcome out;
  out.baseline = baseline;
  out.best_curve = std::make_shared<RDCurve>(
      build_rd_curve(clip, outcome.k_star, cfg.ladder, cfg.metric, backend,
                     cache, cfg.cache_audit));

  BDResult bd = bd_rate(*baseline, *out.best_curve);
  out.result.clip_id = clip.clip_id;
  out.result.class_label = clip.class_label;
  out.result.method = method;
  out.result.k_star = outcome.k_star;
  out.result.bd_rate_improvement_pct = outcome.improvement_pct;
  out.result.bd_quality_delta = bd.bd_quality_delta;
  out.result.objective_evaluations = outcome.evaluations;
  out.result.trace = outcome.trace;

  // Fixed-quality probe, recorded only when both fits cover it.
  LogRateFit fb = fit_log_rate(*baseline);
  LogRateFit fc = fit_log_rate(*out.best_curve);
  double probe = cfg.probe_quality;
  if (probe >= fb.domain_low && probe <= fb.domain_high &&
      probe >= fc.domain_low && probe <= fc.domain_high) {
    out.probe_savings_pct = savings_at_quality(*baseline, *out.best_curve, probe);
  }
  return out;
}

std::unique_ptr<EncoderBackend> make_backend(const RunConfig& cfg) {
  if (cfg.backend == BackendKind::Synthetic)
    return std::make_unique<SyntheticBackend>(cfg.synthetic_noise);
  SubprocessBackend::Options opt;
  opt.command_template = cfg.command_template;
  opt.fields = cfg.log_fields;
  opt.work_dir = cfg.out_dir / "encodes";
  return std::make_unique<SubprocessBackend>(std::move(opt));
}

void write_curve_csv(const std::filesystem::path& path, const RDCurve& curve) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "achieved_bitrate,quality\n";
  for (const RDPoint& p : curve.points())
    out << format_full(p.achieved_bitrate) << ',' << format_full(p.quality)
        << '\n';
}

RDCurve read_curve_csv(const std::filesystem::path& path, QualityMetric metric,
                       double k) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open curve file: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("achieved_bitrate,quality", 0) != 0)
    throw std::runtime_error("curve file missing header "
                             "'achieved_bitrate,quality': " + path.string());
  std::vector<RDPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("malformed curve row: " + line);
    RDPoint p;
    p.achieved_bitrate = std::stod(line.substr(0, comma));
    p.target_bitrate = p.achieved_bitrate;
    p.quality = std::stod(line.substr(comma + 1));
    p.k = k;
    points.push_back(p);
  }
  return RDCurve(k, metric, cleanup_monotone(std::move(points)));
}

BatchSummary run_batch(const RunConfig& cfg) {
  cfg.validate();
  auto clips = load_manifest(cfg.manifest_path);

  auto backend_impl = make_backend(cfg);
  BatchSummary summary;
  std::atomic<long> backend_calls{0};
  CountingBackend backend(*backend_impl, backend_calls);
  EncodeCache cache(cfg.cache_dir);

  struct Slot {
    std::optional<ClipOutcome> outcome;
    std::optional<BatchFailure> failure;
  };
  std::vector<std::vector<Slot>> slots(clips.size());
  for (auto& s : slots) s.resize(cfg.methods.size());

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      size_t ci = next.fetch_add(1);
      if (ci >= clips.size()) return;
      const ClipManifest& clip = clips[ci];
      std::shared_ptr<RDCurve> baseline;
      for (size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        Method method = cfg.methods[mi];
        try {
          if (!baseline) {
            baseline = std::make_shared<RDCurve>(
                build_rd_curve(clip, 1.0, cfg.ladder, cfg.metric, backend,
                               cache, cfg.cache_audit));
          }
          slots[ci][mi].outcome =
              optimize_clip(clip, method, cfg, backend, cache, baseline);
        } catch (const std::exception& e) {
          slots[ci][mi].failure = BatchFailure{clip.clip_id, method, e.what()};
        }
      }
    }
  };
  int threads = std::min<int>(cfg.parallelism, static_cast<int>(clips.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& per_clip : slots) {
    for (auto& slot : per_clip) {
      if (slot.outcome) summary.outcomes.push_back(std::move(*slot.outcome));
      if (slot.failure) summary.failures.push_back(std::move(*slot.failure));
    }
  }
  summary.backend_calls = backend_calls.load();

  // Canonical ordering makes outputs independent of scheduling.
  auto order = [](const ClipOutcome& a, const ClipOutcome& b) {
    if (a.result.clip_id != b.result.clip_id)
      return a.result.clip_id < b.result.clip_id;
    return to_string(a.result.method) < to_string(b.result.method);
  };
  std::sort(summary.outcomes.begin(), summary.outcomes.end(), order);

  std::filesystem::create_directories(cfg.out_dir);
  std::filesystem::create_directories(cfg.out_dir / "traces");
  std::filesystem::create_directories(cfg.out_dir / "curves");

  std::ofstream results(cfg.out_dir / "results.csv");
  results << results_csv_header() << '\n';
  for (const auto& o : summary.outcomes)
    results << to_results_csv_row(o.result) << '\n';

  std::ofstream probes(cfg.out_dir / "probes.csv");
  probes << "clip_id,method,probe_quality,savings_pct\n";
  for (const auto& o : summary.outcomes) {
    if (!o.probe_savings_pct) continue;
    probes << o.result.clip_id << ',' << to_string(o.result.method) << ','
           << format_sig6(cfg.probe_quality) << ','
           << format_sig6(*o.probe_savings_pct) << '\n';
  }

  for (const auto& o : summary.outcomes) {
    std::string stem = o.result.clip_id + "_" + to_string(o.result.method);
    std::ofstream trace(cfg.out_dir / "traces" / (stem + ".csv"));
    trace << "iteration,k,bd_rate_improvement_pct,best_so_far_pct\n";
    for (const auto& e : o.result.trace.iterations)
      trace << e.iteration << ',' << format_sig6(e.k) << ','
            << format_sig6(e.improvement_pct) << ','
            << format_sig6(e.best_so_far_pct) << '\n';
    write_curve_csv(cfg.out_dir / "curves" / (o.result.clip_id + "_baseline.csv"),
                    *o.baseline);
    write_curve_csv(cfg.out_dir / "curves" / (stem + "_kstar.csv"),
                    *o.best_curve);
  }

  std::ofstream log(cfg.out_dir / "run_summary.txt");
  log << "clips=" << clips.size() << "\nmethods=" << cfg.methods.size()
      << "\nresults=" << summary.outcomes.size()
      << "\nfailures=" << summary.failures.size()
      << "\nbackend_calls=" << summary.backend_calls << '\n';
  for (const auto& f : summary.failures)
    log << "failed " << f.clip_id << ' ' << to_string(f.method) << ": "
        << f.error << '\n';
  return summary;
}

}  // namespace ktune

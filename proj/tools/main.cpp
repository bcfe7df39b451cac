#include <iostream>

#include "CLI11.hpp"
#include "ktune/pipeline.hpp"
#include "ktune/reporting.hpp"

namespace {

using namespace ktune;

struct OptimizeArgs {
  std::string manifest;
  std::string method = "brent";
  std::string metric = "PSNR";
  std::string backend = "synthetic";
  std::string out_dir = "run";
  std::string cache_dir;
  std::string command_template;
  std::vector<double> ladder;
  double k_min = 0.2, k_max = 3.0, initial_k = 1.0;
  int max_evaluations = 15;
  double tolerance = 0.02;
  int parallelism = 1;
  double noise = 0.0;
  double probe = 40.0;
  bool cache_audit = false;
  bool print_config = false;
};

RunConfig to_run_config(const OptimizeArgs& a) {
  RunConfig cfg;
  cfg.manifest_path = a.manifest;
  if (a.method == "all") {
    cfg.methods = {Method::MultiRes, Method::GoldenSection, Method::Brent};
  } else {
    cfg.methods = {method_from_string(a.method)};
  }
  cfg.metric.kind = metric_from_string(a.metric);
  if (!a.ladder.empty()) cfg.ladder = a.ladder;
  cfg.search.k_min = a.k_min;
  cfg.search.k_max = a.k_max;
  cfg.search.initial_k = a.initial_k;
  cfg.search.max_evaluations = a.max_evaluations;
  cfg.search.tolerance = a.tolerance;
  if (a.backend == "synthetic") cfg.backend = BackendKind::Synthetic;
  else if (a.backend == "subprocess") cfg.backend = BackendKind::Subprocess;
  else throw CLI::ValidationError("--backend must be synthetic or subprocess");
  cfg.synthetic_noise = a.noise;
  cfg.command_template = a.command_template;
  cfg.parallelism = a.parallelism;
  cfg.cache_dir = a.cache_dir;
  cfg.out_dir = a.out_dir;
  cfg.probe_quality = a.probe;
  cfg.cache_audit = a.cache_audit;
  return cfg;
}

void print_resolved_config(const RunConfig& cfg) {
  std::cout << "manifest=" << cfg.manifest_path.string() << '\n';
  std::cout << "methods=";
  for (size_t i = 0; i < cfg.methods.size(); ++i)
    std::cout << (i ? "," : "") << to_string(cfg.methods[i]);
  std::cout << '\n';
  std::cout << "metric=" << to_string(cfg.metric.kind) << '\n';
  std::cout << "ladder=";
  for (size_t i = 0; i < cfg.ladder.size(); ++i)
    std::cout << (i ? "," : "") << format_sig6(cfg.ladder[i]);
  std::cout << '\n';
  std::cout << "k_min=" << cfg.search.k_min << "\nk_max=" << cfg.search.k_max
            << "\ninitial_k=" << cfg.search.initial_k
            << "\nmax_evaluations=" << cfg.search.max_evaluations
            << "\ntolerance=" << cfg.search.tolerance << '\n';
  std::cout << "backend="
            << (cfg.backend == BackendKind::Synthetic ? "synthetic"
                                                      : "subprocess")
            << "\nnoise=" << cfg.synthetic_noise
            << "\nparallelism=" << cfg.parallelism
            << "\ncache_dir=" << cfg.cache_dir.string()
            << "\nout_dir=" << cfg.out_dir.string()
            << "\nprobe_quality=" << cfg.probe_quality << '\n';
}

int cmd_optimize(const OptimizeArgs& args) {
  if (!std::filesystem::exists(args.manifest)) {
    std::cerr << "manifest not found: " << args.manifest << '\n';
    return 2;
  }
  RunConfig cfg = to_run_config(args);
  if (args.print_config) {
    print_resolved_config(cfg);
    return 0;
  }
  BatchSummary summary = run_batch(cfg);
  for (const auto& o : summary.outcomes) {
    std::cout << o.result.clip_id << ' ' << to_string(o.result.method)
              << " k*=" << format_sig6(o.result.k_star) << " improvement="
              << format_sig6(o.result.bd_rate_improvement_pct) << "% evals="
              << o.result.objective_evaluations << '\n';
  }
  for (const auto& f : summary.failures)
    std::cerr << "FAILED " << f.clip_id << ' ' << to_string(f.method) << ": "
              << f.error << '\n';
  std::cout << summary.outcomes.size() << " results, "
            << summary.failures.size() << " failures, "
            << summary.backend_calls << " backend calls; results in "
            << (cfg.out_dir / "results.csv").string() << '\n';
  return summary.failures.empty() ? 0 : 1;
}

int cmd_bdrate(const std::string& baseline_path,
               const std::string& candidate_path, const std::string& metric) {
  QualityMetric m{metric_from_string(metric)};
  RDCurve baseline = read_curve_csv(baseline_path, m, 1.0);
  RDCurve candidate = read_curve_csv(candidate_path, m, 1.0);
  BDResult r = bd_rate(baseline, candidate);
  std::cout << "bd_rate_improvement_pct=" << format_sig6(r.bd_rate_improvement_pct)
            << "\nbd_quality_delta=" << format_sig6(r.bd_quality_delta)
            << "\noverlap=[" << format_sig6(r.overlap_low) << ", "
            << format_sig6(r.overlap_high) << "]\n";
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& out_dir,
               const std::string& metric, double probe) {
  QualityMetric m{metric_from_string(metric)};
  report_run_directory(run_dir, out_dir.empty() ? run_dir : out_dir, m, probe);
  return 0;
}

int cmd_encode_probe(const OptimizeArgs& args, const std::string& clip_id,
                     double k, double bitrate) {
  if (!std::filesystem::exists(args.manifest)) {
    std::cerr << "manifest not found: " << args.manifest << '\n';
    return 2;
  }
  RunConfig cfg = to_run_config(args);
  auto clips = load_manifest(cfg.manifest_path);
  auto it = std::find_if(clips.begin(), clips.end(), [&](const ClipManifest& c) {
    return c.clip_id == clip_id;
  });
  if (it == clips.end())
    throw std::runtime_error("clip '" + clip_id + "' not in manifest");
  auto backend = make_backend(cfg);
  EncodeRequest req{*it, k, bitrate, cfg.metric};
  RDPoint p = backend->encode(req);
  std::cout << "achieved_bitrate=" << format_sig6(p.achieved_bitrate)
            << "\nquality=" << format_sig6(p.quality) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Per-clip Lagrangian multiplier tuner minimizing BD-Rate"};
  app.require_subcommand(1);
  app.set_config("--config");

  OptimizeArgs oa;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--manifest", oa.manifest, "Corpus manifest CSV")->required();
    sub->add_option("--metric", oa.metric, "PSNR or SSIM");
    sub->add_option("--backend", oa.backend, "synthetic or subprocess");
    sub->add_option("--command-template", oa.command_template,
                    "Encoder command with {input} {bitrate} {k} {metric_flags} "
                    "{output} {log}");
    sub->add_option("--ladder", oa.ladder, "Target bitrates (bits/s)");
    sub->add_option("--noise", oa.noise, "Synthetic backend noise amplitude");
    sub->add_option("--out", oa.out_dir, "Output directory");
    sub->add_option("--cache", oa.cache_dir, "Encode cache directory");
  };

  auto* opt = app.add_subcommand("optimize", "Optimize k for every clip");
  add_common(opt);
  opt->add_option("--method", oa.method, "multires, golden, brent or all");
  opt->add_option("--k-min", oa.k_min, "Search domain lower bound");
  opt->add_option("--k-max", oa.k_max, "Search domain upper bound");
  opt->add_option("--initial-k", oa.initial_k, "Starting multiplier");
  opt->add_option("--max-evaluations", oa.max_evaluations,
                  "Objective evaluation cap");
  opt->add_option("--tolerance", oa.tolerance,
                  "Stopping tolerance, percentage points");
  opt->add_option("--parallelism", oa.parallelism, "Concurrent clips");
  opt->add_option("--probe-quality", oa.probe, "Fixed-quality probe");
  opt->add_flag("--cache-audit", oa.cache_audit,
                "Re-encode on cache hits and verify stored points");
  opt->add_flag("--print-config", oa.print_config,
                "Print the resolved configuration and exit");

  std::string curve_a, curve_b, bd_metric = "PSNR";
  auto* bd = app.add_subcommand("bdrate", "BD metrics between two curve CSVs");
  bd->add_option("baseline", curve_a, "Baseline curve CSV")->required();
  bd->add_option("candidate", curve_b, "Candidate curve CSV")->required();
  bd->add_option("--metric", bd_metric, "PSNR or SSIM");

  std::string run_dir, report_out, report_metric = "PSNR";
  double report_probe = 40.0;
  auto* rep = app.add_subcommand("report", "Analytics over a run directory");
  rep->add_option("run_dir", run_dir, "Directory written by optimize")->required();
  rep->add_option("--out", report_out, "Report output directory");
  rep->add_option("--metric", report_metric, "PSNR or SSIM");
  rep->add_option("--probe-quality", report_probe, "Fixed-quality probe");

  std::string probe_clip;
  double probe_k = 1.0, probe_bitrate = 1e6;
  auto* ep = app.add_subcommand("encode-probe", "Single encode for debugging");
  add_common(ep);
  ep->add_option("--clip", probe_clip, "Clip id from the manifest")->required();
  ep->add_option("--k", probe_k, "Multiplier");
  ep->add_option("--bitrate", probe_bitrate, "Target bitrate (bits/s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (opt->parsed()) return cmd_optimize(oa);
    if (bd->parsed()) return cmd_bdrate(curve_a, curve_b, bd_metric);
    if (rep->parsed())
      return cmd_report(run_dir, report_out, report_metric, report_probe);
    if (ep->parsed())
      return cmd_encode_probe(oa, probe_clip, probe_k, probe_bitrate);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

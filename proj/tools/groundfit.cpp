// groundfit command-line tool: label scans, run the RANSAC baseline,
// generate synthetic scenes, evaluate masks, benchmark, and sweep the
// refinement grid. Stdout carries machine-readable JSON/CSV only;
// diagnostics go to stderr (GROUNDFIT_LOG=error|info|debug).

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "groundfit/groundfit.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace groundfit;

namespace {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level_from_env() {
  const char* env = std::getenv("GROUNDFIT_LOG");
  if (!env) return LogLevel::Info;
  const std::string v(env);
  if (v == "error") return LogLevel::Error;
  if (v == "info") return LogLevel::Info;
  if (v == "debug") return LogLevel::Debug;
  std::cerr << "groundfit: ignoring unknown GROUNDFIT_LOG=" << v << "\n";
  return LogLevel::Info;
}

const LogLevel g_log_level = log_level_from_env();
std::mutex g_log_mutex;

void log_line(LogLevel level, const std::string& msg) {
  if (level > g_log_level) return;
  std::lock_guard lock(g_log_mutex);
  std::cerr << "groundfit: " << msg << "\n";
}

/// Runs fn(0..n-1) on `workers` threads. Job i always sees the same inputs
/// regardless of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto drain = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
  };
  std::vector<std::thread> pool;
  const unsigned count = std::min<unsigned>(workers, static_cast<unsigned>(n));
  pool.reserve(count);
  for (unsigned w = 0; w < count; ++w) pool.emplace_back(drain);
  for (auto& t : pool) t.join();
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

json stats_to_json(const FitStats& stats) {
  return json{{"iterations", stats.iterations},
              {"final_loss", stats.final_loss},
              {"final_lr", stats.final_lr},
              {"stopped_early", stats.stopped_early}};
}

json report_to_json(const EvalReport& r) {
  json j{{"ground", {{"recall", round2(r.ground_recall)},
                     {"precision", round2(r.ground_precision)},
                     {"iou", round2(r.ground_iou)}}},
         {"nonground", {{"recall", round2(r.nonground_recall)},
                        {"precision", round2(r.nonground_precision)},
                        {"iou", round2(r.nonground_iou)}}},
         {"miou", round2(r.miou)},
         {"scans", r.scans}};
  if (r.flatness_sigma) {
    j["flatness_sigma"] = *r.flatness_sigma;
    j["flat"] = is_flat(*r.flatness_sigma);
  }
  return j;
}

/// Aligned text table in the benchmark-table layout.
std::string report_to_table(const EvalReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-10s | %7s %7s %7s | %7s %7s %7s | %7s\n",
                "", "Recall", "Prec.", "IoU", "Recall", "Prec.", "IoU", "mIoU");
  out += "           |        Ground          |       Non-Ground       |\n";
  out += line;
  std::snprintf(line, sizeof(line),
                "%-10s | %7s %7s %7s | %7s %7s %7s | %7s\n", "pseudolabel",
                fixed2(r.ground_recall).c_str(), fixed2(r.ground_precision).c_str(),
                fixed2(r.ground_iou).c_str(), fixed2(r.nonground_recall).c_str(),
                fixed2(r.nonground_precision).c_str(), fixed2(r.nonground_iou).c_str(),
                fixed2(r.miou).c_str());
  out += line;
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed on " + path.string());
}

struct LabelOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  std::string config_path;
  std::string format = "xyz_f32";
  unsigned parallel = 1;
  std::optional<long> seed;
  bool no_prefilter = false;
  bool no_refine = false;
  std::optional<double> quantile;
  std::optional<double> threshold;
  std::optional<double> pillar;
  std::optional<double> tau;
};

PipelineConfig make_pipeline_config(const LabelOptions& opt) {
  PipelineConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = pipeline_config_from(ConfigFile::parse_file(opt.config_path));
  }
  if (opt.no_prefilter) cfg.enable_prefilter = false;
  if (opt.no_refine) cfg.enable_refine = false;
  if (opt.quantile) cfg.noise_quantile = *opt.quantile;
  if (opt.threshold) cfg.distance_threshold = *opt.threshold;
  if (opt.pillar) cfg.pillar_size = *opt.pillar;
  if (opt.tau) cfg.recovery_margin = *opt.tau;
  if (opt.seed) cfg.optim.seed = *opt.seed;
  cfg.validate();
  return cfg;
}

int run_label(const LabelOptions& opt) {
  const auto cfg = make_pipeline_config(opt);
  const auto format = scan_format_from_string(opt.format);
  fs::create_directories(opt.out_dir);

  struct Result {
    json j;
    bool ok = false;
  };
  std::vector<Result> results(opt.inputs.size());

  parallel_for(opt.inputs.size(), opt.parallel, [&](std::size_t i) {
    const fs::path input = opt.inputs[i];
    const auto stem = input.stem().string();
    auto& result = results[i];
    try {
      PipelineConfig scan_cfg = cfg;
      scan_cfg.optim.seed = cfg.optim.seed + static_cast<std::int64_t>(i);
      const auto cloud = load_scan(input, format);
      const auto [mask, stats] = label_scan(cloud, scan_cfg);

      const auto mask_path = fs::path(opt.out_dir) / (stem + ".mask");
      save_mask(mask, mask_path);
      const auto stats_path = fs::path(opt.out_dir) / (stem + ".fitstats.json");
      write_text(stats_path, stats_to_json(stats).dump(2) + "\n");

      result.ok = true;
      result.j = {{"input", input.string()},
                  {"mask", mask_path.string()},
                  {"points", cloud.size()},
                  {"stats", stats_to_json(stats)},
                  {"ok", true}};
      log_line(LogLevel::Info,
               "labeled " + input.string() + " (" + std::to_string(cloud.size()) +
                   " pts, " + std::to_string(stats.iterations) + " iters)");
    } catch (const std::exception& e) {
      result.ok = false;
      result.j = {{"input", input.string()}, {"ok", false}, {"error", e.what()}};
      log_line(LogLevel::Error, "failed on " + input.string() + ": " + e.what());
    }
  });

  json out;
  out["results"] = json::array();
  std::size_t failed = 0;
  for (const auto& r : results) {
    out["results"].push_back(r.j);
    failed += r.ok ? 0 : 1;
  }
  out["labeled"] = results.size() - failed;
  out["failed"] = failed;
  std::cout << out.dump(2) << "\n";
  return failed == 0 ? 0 : 1;
}

struct RansacOptions {
  std::vector<std::string> inputs;
  std::string out_dir;
  std::string config_path;
  std::string format = "xyz_f32";
  std::optional<long> seed;
};

int run_ransac(const RansacOptions& opt) {
  RansacConfig cfg;
  if (!opt.config_path.empty()) {
    cfg = ransac_config_from(ConfigFile::parse_file(opt.config_path));
  }
  if (opt.seed) cfg.seed = *opt.seed;
  cfg.validate();
  const auto format = scan_format_from_string(opt.format);
  fs::create_directories(opt.out_dir);

  json results = json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < opt.inputs.size(); ++i) {
    const fs::path input = opt.inputs[i];
    try {
      RansacConfig scan_cfg = cfg;
      scan_cfg.seed = cfg.seed + static_cast<std::int64_t>(i);
      const auto cloud = load_scan(input, format);
      const auto [plane, mask] = ransac_plane(cloud, scan_cfg);
      const auto mask_path = fs::path(opt.out_dir) / (input.stem().string() + ".mask");
      save_mask(mask, mask_path);
      std::size_t inliers = 0;
      for (const auto l : mask.labels) inliers += l == Label::Ground;
      results.push_back(
          {{"input", input.string()},
           {"mask", mask_path.string()},
           {"normal", {plane.normal.x(), plane.normal.y(), plane.normal.z()}},
           {"offset", plane.offset},
           {"inliers", inliers},
           {"ok", true}});
    } catch (const std::exception& e) {
      ++failed;
      results.push_back({{"input", input.string()}, {"ok", false}, {"error", e.what()}});
      log_line(LogLevel::Error, "ransac failed on " + input.string() + ": " + e.what());
    }
  }
  std::cout << results.dump(2) << "\n";
  return failed == 0 ? 0 : 1;
}

struct SynthOptions {
  std::string out_dir;
  std::string spec_path;
  std::string suite;
  std::string format = "xyz_f32";
  std::optional<long> seed;
};

int run_synth(const SynthOptions& opt) {
  std::vector<SceneSpec> specs;
  if (!opt.spec_path.empty()) {
    auto spec = scene_spec_from(ConfigFile::parse_file(opt.spec_path));
    if (spec.name.empty()) spec.name = fs::path(opt.spec_path).stem().string();
    specs.push_back(std::move(spec));
  } else if (opt.suite == "standard-noisy") {
    specs = make_standard_suite(true, opt.seed.value_or(42));
  } else if (opt.suite == "standard-clean") {
    specs = make_standard_suite(false, opt.seed.value_or(42));
  } else {
    throw ConfigError("unknown suite '" + opt.suite + "'");
  }
  if (opt.seed && !opt.spec_path.empty()) {
    specs.front().seed = static_cast<std::uint64_t>(*opt.seed);
  }

  const auto format = scan_format_from_string(opt.format);
  const char* ext = format == ScanFormat::AsciiXyz ? ".xyz" : ".bin";
  fs::create_directories(opt.out_dir);

  json out = json::array();
  for (const auto& spec : specs) {
    const auto scene = generate(spec);
    const auto cloud_path = fs::path(opt.out_dir) / (spec.name + ext);
    const auto mask_path = fs::path(opt.out_dir) / (spec.name + ".mask");
    save_scan(scene.cloud, cloud_path, format);
    save_mask(scene.truth, mask_path);
    const double sigma = sigma_of(spec);
    out.push_back({{"name", spec.name},
                   {"cloud", cloud_path.string()},
                   {"mask", mask_path.string()},
                   {"points", scene.cloud.size()},
                   {"ground", scene.ground_count},
                   {"objects", scene.object_count},
                   {"multipath", scene.multipath_count},
                   {"sigma", sigma},
                   {"flat", is_flat(sigma)}});
    log_line(LogLevel::Info, "generated " + spec.name + " (" +
                                 std::to_string(scene.cloud.size()) + " pts)");
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

struct EvalOptions {
  std::string pred_dir;
  std::string truth_dir;
  std::string truth_format = "mask";  // or "kitti"
  std::string class_map_path;
  std::string clouds_dir;
  std::string cloud_format = "xyz_f32";
  bool table = false;
  bool per_scan = false;
};

int run_eval(const EvalOptions& opt) {
  std::vector<fs::path> preds;
  for (const auto& entry : fs::directory_iterator(opt.pred_dir)) {
    if (entry.path().extension() == ".mask") preds.push_back(entry.path());
  }
  std::sort(preds.begin(), preds.end());
  if (preds.empty()) {
    std::cerr << "groundfit: no .mask files in " << opt.pred_dir << "\n";
    return 2;
  }

  std::unordered_set<std::uint16_t> ground_ids;
  if (opt.truth_format == "kitti") {
    if (opt.class_map_path.empty()) {
      std::cerr << "groundfit: --truth-format kitti requires --class-map\n";
      return 2;
    }
    ground_ids = load_ground_class_map(opt.class_map_path);
  } else if (opt.truth_format != "mask") {
    std::cerr << "groundfit: unknown truth format " << opt.truth_format << "\n";
    return 2;
  }

  ConfusionCounts total;
  json per_scan = json::array();
  double sigma_sum = 0.0;
  std::size_t sigma_count = 0;
  for (const auto& pred_path : preds) {
    const auto stem = pred_path.stem().string();
    const auto pred = load_mask(pred_path);
    SegmentationMask truth;
    if (opt.truth_format == "kitti") {
      truth = mask_from_semantic_labels(
          load_semantic_labels(fs::path(opt.truth_dir) / (stem + ".label")),
          ground_ids);
    } else {
      truth = load_mask(fs::path(opt.truth_dir) / (stem + ".mask"));
    }
    ConfusionCounts counts;
    accumulate(pred, truth, counts);
    total += counts;
    json entry{{"scan", stem}, {"miou", round2(report(counts).miou)}};
    if (!opt.clouds_dir.empty()) {
      const char* ext = opt.cloud_format == "ascii_xyz" ? ".xyz" : ".bin";
      const auto cloud = load_scan(fs::path(opt.clouds_dir) / (stem + ext),
                                   scan_format_from_string(opt.cloud_format));
      const double sigma = flatness_sigma(truth, cloud);
      entry["flatness_sigma"] = sigma;
      entry["flat"] = is_flat(sigma);
      sigma_sum += sigma;
      ++sigma_count;
    }
    per_scan.push_back(entry);
  }

  auto rep = report(total, preds.size());
  if (sigma_count > 0) rep.flatness_sigma = sigma_sum / static_cast<double>(sigma_count);
  if (opt.table) {
    std::cout << report_to_table(rep);
  } else {
    json j = report_to_json(rep);
    if (opt.per_scan) j["per_scan"] = per_scan;
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

struct BenchOptions {
  std::vector<std::string> inputs;
  std::string config_path;
  std::string format = "xyz_f32";
  std::optional<long> seed;
};

int run_bench(const BenchOptions& opt) {
  LabelOptions lo;
  lo.config_path = opt.config_path;
  lo.seed = opt.seed;
  const auto cfg = make_pipeline_config(lo);
  const auto format = scan_format_from_string(opt.format);

  struct Job {
    PointCloud cloud;
    std::int64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < opt.inputs.size(); ++i) {
    jobs.push_back({load_scan(opt.inputs[i], format),
                    cfg.optim.seed + static_cast<std::int64_t>(i)});
  }

  const double hz = measure_throughput(
      [&](const Job& job) {
        PipelineConfig scan_cfg = cfg;
        scan_cfg.optim.seed = job.seed;
        label_scan(job.cloud, scan_cfg);
      },
      jobs);
  const auto band = throughput_band(hz);
  std::cout << json{{"scans", jobs.size()},
                    {"seconds", static_cast<double>(jobs.size()) / hz},
                    {"hz", hz},
                    {"band", to_string(band)}}
                   .dump(2)
            << "\n";
  return 0;
}

struct AblateOptions {
  std::string scenes_dir;
  std::string out_csv;
  std::string config_path;
  std::string format = "xyz_f32";
  std::vector<double> pillar_grid = {0.25, 0.50, 1.00};
  std::vector<double> tau_grid = {0.05, 0.10, 0.20};
  unsigned parallel = 1;
  std::optional<long> seed;
};

int run_ablate(const AblateOptions& opt) {
  LabelOptions lo;
  lo.config_path = opt.config_path;
  lo.seed = opt.seed;
  const auto base_cfg = make_pipeline_config(lo);
  if (opt.pillar_grid.empty() || opt.tau_grid.empty()) {
    throw ConfigError("empty ablation grid");
  }

  const char* ext = opt.format == "ascii_xyz" ? ".xyz" : ".bin";
  const auto format = scan_format_from_string(opt.format);
  struct SceneFiles {
    std::string name;
    PointCloud cloud;
    SegmentationMask truth;
  };
  std::vector<SceneFiles> scenes;
  std::vector<fs::path> masks;
  for (const auto& entry : fs::directory_iterator(opt.scenes_dir)) {
    if (entry.path().extension() == ".mask") masks.push_back(entry.path());
  }
  std::sort(masks.begin(), masks.end());
  for (const auto& mask_path : masks) {
    const auto stem = mask_path.stem().string();
    const auto cloud_path = fs::path(opt.scenes_dir) / (stem + ext);
    if (!fs::exists(cloud_path)) continue;
    scenes.push_back({stem, load_scan(cloud_path, format), load_mask(mask_path)});
  }
  if (scenes.empty()) {
    std::cerr << "groundfit: no cloud/mask pairs in " << opt.scenes_dir << "\n";
    return 2;
  }

  std::string csv = "v_xy,tau";
  for (const auto& s : scenes) csv += "," + s.name;
  csv += ",avg\n";

  for (const double v : opt.pillar_grid) {
    for (const double tau : opt.tau_grid) {
      std::vector<double> mious(scenes.size(), 0.0);
      parallel_for(scenes.size(), opt.parallel, [&](std::size_t i) {
        PipelineConfig cfg = base_cfg;
        cfg.pillar_size = v;
        cfg.recovery_margin = tau;
        cfg.optim.seed = base_cfg.optim.seed + static_cast<std::int64_t>(i);
        const auto [mask, stats] = label_scan(scenes[i].cloud, cfg);
        ConfusionCounts counts;
        accumulate(mask, scenes[i].truth, counts);
        mious[i] = report(counts).miou;
      });
      double avg = 0.0;
      char cell[32];
      std::snprintf(cell, sizeof(cell), "%.2f,%.2f", v, tau);
      csv += cell;
      for (const double m : mious) {
        avg += m / static_cast<double>(mious.size());
        csv += "," + fixed2(m);
      }
      csv += "," + fixed2(avg) + "\n";
      log_line(LogLevel::Info, "ablate v_xy=" + fixed2(v) + " tau=" + fixed2(tau) +
                                   " avg mIoU=" + fixed2(avg));
    }
  }

  if (!opt.out_csv.empty()) write_text(opt.out_csv, csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised LiDAR ground segmentation toolkit"};
  app.require_subcommand(1);

  LabelOptions label_opt;
  auto* label = app.add_subcommand(
      "label", "Pseudo-label scans with the elevation-surface pipeline");
  label->add_option("inputs", label_opt.inputs, "scan files")->required();
  label->add_option("--out", label_opt.out_dir, "output directory")->required();
  label->add_option("--config", label_opt.config_path, "config file");
  label->add_option("--format", label_opt.format, "xyz_f32|xyzi_f32|ascii_xyz");
  label->add_option("--parallel", label_opt.parallel, "worker threads")
      ->check(CLI::PositiveNumber);
  label->add_option("--seed", label_opt.seed, "base seed (per-scan seed = base + index)");
  label->add_flag("--no-prefilter", label_opt.no_prefilter, "disable the quantile prefilter");
  label->add_flag("--no-refine", label_opt.no_refine, "disable pillar refinement");
  label->add_option("--quantile", label_opt.quantile, "noise quantile q");
  label->add_option("--threshold", label_opt.threshold, "ground distance threshold D");
  label->add_option("--pillar", label_opt.pillar, "pillar size v_xy");
  label->add_option("--tau", label_opt.tau, "recovery margin tau");

  RansacOptions ransac_opt;
  auto* ransac = app.add_subcommand("ransac", "RANSAC ground-plane baseline");
  ransac->add_option("inputs", ransac_opt.inputs, "scan files")->required();
  ransac->add_option("--out", ransac_opt.out_dir, "output directory")->required();
  ransac->add_option("--config", ransac_opt.config_path, "config file");
  ransac->add_option("--format", ransac_opt.format, "scan format");
  ransac->add_option("--seed", ransac_opt.seed, "base seed");

  SynthOptions synth_opt;
  auto* synth = app.add_subcommand("synth", "Generate synthetic scenes with ground truth");
  synth->add_option("--out", synth_opt.out_dir, "output directory")->required();
  auto* spec_opt = synth->add_option("--spec", synth_opt.spec_path, "scene config file");
  synth->add_option("--suite", synth_opt.suite, "standard-noisy|standard-clean")
      ->excludes(spec_opt);
  synth->add_option("--format", synth_opt.format, "scan format to emit");
  synth->add_option("--seed", synth_opt.seed, "seed override / suite base seed");

  EvalOptions eval_opt;
  auto* eval = app.add_subcommand("eval", "Evaluate predicted masks against truth");
  eval->add_option("--pred", eval_opt.pred_dir, "directory of predicted .mask files")->required();
  eval->add_option("--truth", eval_opt.truth_dir, "directory of truth files")->required();
  eval->add_option("--truth-format", eval_opt.truth_format, "mask|kitti");
  eval->add_option("--class-map", eval_opt.class_map_path,
                   "ground class ids for kitti truth");
  eval->add_option("--clouds", eval_opt.clouds_dir, "scan directory for flatness sigma");
  eval->add_option("--cloud-format", eval_opt.cloud_format, "scan format for --clouds");
  eval->add_flag("--table", eval_opt.table, "print an aligned text table");
  eval->add_flag("--per-scan", eval_opt.per_scan, "include per-scan mIoU in the JSON");

  BenchOptions bench_opt;
  auto* bench = app.add_subcommand("bench", "Measure labeling throughput");
  bench->add_option("inputs", bench_opt.inputs, "scan files")->required();
  bench->add_option("--config", bench_opt.config_path, "config file");
  bench->add_option("--format", bench_opt.format, "scan format");
  bench->add_option("--seed", bench_opt.seed, "base seed");

  AblateOptions ablate_opt;
  auto* ablate = app.add_subcommand("ablate", "Sweep pillar size and recovery margin");
  ablate->add_option("--scenes", ablate_opt.scenes_dir,
                     "directory of cloud + truth mask pairs")->required();
  ablate->add_option("--out", ablate_opt.out_csv, "CSV output path");
  ablate->add_option("--config", ablate_opt.config_path, "config file");
  ablate->add_option("--format", ablate_opt.format, "scan format");
  ablate->add_option("--pillar-grid", ablate_opt.pillar_grid, "v_xy values")
      ->delimiter(',');
  ablate->add_option("--tau-grid", ablate_opt.tau_grid, "tau values")->delimiter(',');
  ablate->add_option("--parallel", ablate_opt.parallel, "worker threads")
      ->check(CLI::PositiveNumber);
  ablate->add_option("--seed", ablate_opt.seed, "base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (label->parsed()) return run_label(label_opt);
    if (ransac->parsed()) return run_ransac(ransac_opt);
    if (synth->parsed()) return run_synth(synth_opt);
    if (eval->parsed()) return run_eval(eval_opt);
    if (bench->parsed()) return run_bench(bench_opt);
    if (ablate->parsed()) return run_ablate(ablate_opt);
  } catch (const ConfigError& e) {
    log_line(LogLevel::Error, std::string("config error: ") + e.what());
    return 2;
  } catch (const std::exception& e) {
    log_line(LogLevel::Error, e.what());
    return 1;
  }
  return 0;
}

#pragma once

#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sdlab/analysis.hpp"
#include "sdlab/checkpoint.hpp"
#include "sdlab/config.hpp"
#include "sdlab/csv.hpp"
#include "sdlab/diffusion.hpp"
#include "sdlab/distill.hpp"
#include "sdlab/divergences.hpp"
#include "sdlab/manifest.hpp"
#include "sdlab/svg.hpp"
#include "sdlab/toy_data.hpp"
#include "sdlab/trajectory_io.hpp"

namespace sdlab {

namespace fs = std::filesystem;

struct CommandResult {
  fs::path out_dir;
  std::vector<std::string> files;  // relative to out_dir, manifest excluded
  fs::path manifest;
};

namespace detail {

inline void prepare_out_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_empty(dir) && !force)
    throw std::runtime_error("output directory " + dir.string() +
                             " is not empty; pass --force to write into it");
  fs::create_directories(dir);
}

// Fan a run list across a worker pool; the first worker exception wins.
inline void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers < 1) workers = 1;
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error) return;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline std::string fnv_hash_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline void scatter_svg(const fs::path& path, const std::string& title,
                        const std::vector<LabeledPoint>& background,
                        const std::vector<Vec2>& samples) {
  SvgPlot plot(-1.6, 1.6, -1.6, 1.6, 560, 560);
  std::vector<Vec2> bg;
  bg.reserve(background.size());
  for (const auto& p : background) bg.push_back(p.position);
  plot.circles(bg, 1.2, "#c0c0c0", 0.5);
  plot.circles(samples, 1.8, "#d62728", 0.75);
  plot.write(path.string(), title);
}

}  // namespace detail

// Trains the score model on the mixture dataset and emits the checkpoint,
// the per-epoch loss curve, and a sample scatter. Deterministic given the
// config seeds.
inline CommandResult cmd_train(const ExperimentConfig& config, const fs::path& out_dir,
                               bool force = false,
                               const std::function<void(int, double)>& on_epoch = {}) {
  config.validate();
  detail::prepare_out_dir(out_dir, force);
  CommandResult result;
  result.out_dir = out_dir;

  const GaussianMixture mixture = make_eight_mode_mixture(config.data_std);
  Rng data_rng(config.data_seed);
  const std::vector<LabeledPoint> dataset = sample(mixture, config.dataset_size, data_rng);
  const NoiseSchedule sched = linear_schedule(config.timesteps, config.beta_start, config.beta_end);
  ScoreModel model = make_score_model(config.model_config(), config.train_seed);

  std::vector<double> losses;
  try {
    losses = train(model, dataset, sched, config.train_config(), on_epoch);
  } catch (const std::runtime_error& e) {
    // Keep the diverged parameters around for inspection.
    const fs::path diag = out_dir / "diagnostic_checkpoint.json";
    save_checkpoint(diag, model, config.train_config(), sched);
    throw std::runtime_error(std::string(e.what()) + " (diagnostic checkpoint written to " +
                             diag.string() + ")");
  }

  save_checkpoint(out_dir / "checkpoint.json", model, config.train_config(), sched);
  result.files.push_back("checkpoint.json");

  {
    CsvWriter csv((out_dir / "loss.csv").string());
    csv.row({"epoch", "mean_loss"});
    for (std::size_t e = 0; e < losses.size(); ++e)
      csv.row({format_int(static_cast<long long>(e)), format_double(losses[e])});
    csv.close();
    result.files.push_back("loss.csv");
  }

  if (config.plots) {
    Rng sample_rng(config.train_seed + 2);
    const std::vector<Vec2> generated =
        ancestral_sample(model, sched, 2000, model.null_label(), sample_rng);
    detail::scatter_svg(out_dir / "samples.svg", "generated (red) vs dataset (gray)", dataset,
                        generated);
    result.files.push_back("samples.svg");
  }

  result.manifest = write_manifest(out_dir, "train", config_hash(config), result.files);
  return result;
}

// Runs the full (method x start x seed) distillation grid against a trained
// checkpoint, one trajectory file pair per run, fanned across a worker pool.
inline CommandResult cmd_distill(const ExperimentConfig& config, const fs::path& checkpoint_path,
                                 const fs::path& out_dir, int workers = 1, bool force = false) {
  config.validate();
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  if (ck.timesteps != config.timesteps || ck.beta_start != config.beta_start ||
      ck.beta_end != config.beta_end) {
    std::ostringstream msg;
    msg << "checkpoint/schedule mismatch: checkpoint was trained with timesteps=" << ck.timesteps
        << " beta=[" << ck.beta_start << ", " << ck.beta_end << "], config asks for timesteps="
        << config.timesteps << " beta=[" << config.beta_start << ", " << config.beta_end << "]";
    throw std::runtime_error(msg.str());
  }
  detail::prepare_out_dir(out_dir, force);
  const fs::path traj_dir = out_dir / "trajectories";
  fs::create_directories(traj_dir);

  const NoiseSchedule sched = linear_schedule(config.timesteps, config.beta_start, config.beta_end);
  const ScoreModel& model = ck.model;

  struct Run {
    DistillMethod method;
    Vec2 start;
    std::uint64_t seed;
  };
  std::vector<Run> runs;
  for (const DistillMethod m : config.methods())
    for (const Vec2& start : config.starts)
      for (const std::uint64_t seed : config.seeds) runs.push_back({m, start, seed});

  std::vector<std::vector<std::string>> files_per_run(runs.size());
  detail::parallel_for(static_cast<int>(runs.size()), workers, [&](int i) {
    const Run& run = runs[i];
    const DistillConfig dc = config.distill_config(run.method, run.start, run.seed);
    const std::string stem = trajectory_file_stem(run.method, run.start, run.seed);
    TrajectoryRecord rec;
    try {
      rec = run_distillation(dc, model, sched, run.start);
    } catch (const DistillAbort& abort) {
      TrajectoryRecord partial = abort.partial_record;
      partial.config.steps = static_cast<int>(partial.steps.size());
      const fs::path dump = traj_dir / ("aborted_" + stem + ".jsonl");
      write_trajectory_jsonl(dump, partial);
      throw std::runtime_error(std::string(abort.what()) + " (run " + stem +
                               "; trajectory dump written to " + dump.string() + ")");
    }
    write_trajectory_jsonl(traj_dir / (stem + ".jsonl"), rec);
    write_trajectory_csv(traj_dir / (stem + ".csv"), rec);
    files_per_run[i] = {"trajectories/" + stem + ".jsonl", "trajectories/" + stem + ".csv"};
  });

  CommandResult result;
  result.out_dir = out_dir;
  for (const auto& fl : files_per_run)
    result.files.insert(result.files.end(), fl.begin(), fl.end());
  result.manifest = write_manifest(out_dir, "distill", config_hash(config), result.files);
  return result;
}

// Divergence comparison table over p = (a, 1-a) vs q = (1-a, a).
inline CommandResult cmd_sweep(int n_points, const fs::path& out_dir, bool force = false,
                               bool plots = true) {
  const std::vector<SweepRow> rows = divergence_sweep(n_points);
  detail::prepare_out_dir(out_dir, force);
  CommandResult result;
  result.out_dir = out_dir;

  {
    CsvWriter csv((out_dir / "divergence_sweep.csv").string());
    csv.row({"a", "kl", "jd", "jsd", "gjsd", "approx_jsd"});
    for (const SweepRow& r : rows)
      csv.row({format_double(r.a), format_double(r.kl_pq), format_double(r.jd),
               format_double(r.jsd_pq), format_double(r.gjsd_pq), format_double(r.approx)});
    csv.close();
    result.files.push_back("divergence_sweep.csv");
  }

  if (plots) {
    // Infinite values are clipped to the frame; the CSV carries the sentinels.
    const double y_max = 3.0;
    SvgPlot plot(0.0, 1.0, 0.0, y_max, 640, 480);
    const std::vector<std::pair<std::string, const double SweepRow::*>> series = {
        {"#1f77b4", &SweepRow::kl_pq},   {"#ff7f0e", &SweepRow::jd},
        {"#2ca02c", &SweepRow::jsd_pq},  {"#d62728", &SweepRow::gjsd_pq},
        {"#9467bd", &SweepRow::approx},
    };
    for (const auto& [color, member] : series) {
      std::vector<Vec2> pts;
      for (const SweepRow& r : rows) {
        const double v = r.*member;
        pts.push_back({r.a, std::isinf(v) ? y_max : v});
      }
      plot.polyline(pts, color, 1.5);
    }
    const std::vector<std::pair<std::string, std::string>> legend = {
        {"KL", "#1f77b4"},   {"JD", "#ff7f0e"},        {"JSD", "#2ca02c"},
        {"GJSD", "#d62728"}, {"approx JSD", "#9467bd"},
    };
    plot.legend(legend);
    plot.write((out_dir / "divergence_sweep.svg").string(), "divergences on p=(a,1-a), q=(1-a,a)");
    result.files.push_back("divergence_sweep.svg");
  }

  result.manifest = write_manifest(out_dir, "sweep",
                                   detail::fnv_hash_hex("sweep n_points=" +
                                                        std::to_string(n_points)),
                                   result.files);
  return result;
}

// Correlation and mode-coverage reports plus plots over a trajectory corpus.
inline CommandResult cmd_analyze(const fs::path& traj_dir, const fs::path& out_dir,
                                 bool force = false, bool plots = true) {
  std::vector<fs::path> paths;
  if (fs::exists(traj_dir))
    for (const auto& entry : fs::directory_iterator(traj_dir))
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl")
        paths.push_back(entry.path());
  if (paths.empty())
    throw std::invalid_argument("analyze: no trajectory files (*.jsonl) found in " +
                                traj_dir.string());
  std::sort(paths.begin(), paths.end());

  std::vector<TrajectoryRecord> records;
  records.reserve(paths.size());
  for (const fs::path& p : paths) records.push_back(read_trajectory_jsonl(p));

  detail::prepare_out_dir(out_dir, force);
  CommandResult result;
  result.out_dir = out_dir;

  const CorrelationReport report = correlation_report(records);
  {
    CsvWriter csv((out_dir / "correlation_runs.csv").string());
    csv.row({"method", "seed", "start_x", "start_y", "r_flat", "r_x", "r_y"});
    for (const RunCorrelation& rc : report.runs)
      csv.row({to_string(rc.method), format_int(static_cast<long long>(rc.seed)),
               format_double(rc.start.x), format_double(rc.start.y), format_double(rc.r_flat),
               format_double(rc.r_x), format_double(rc.r_y)});
    csv.close();
    result.files.push_back("correlation_runs.csv");
  }
  {
    CsvWriter csv((out_dir / "correlation_summary.csv").string());
    csv.row({"method", "runs", "mean_r", "std_r", "mean_r_x", "mean_r_y"});
    for (const auto& [method, agg] : report.by_method)
      csv.row({to_string(method), format_int(agg.runs), format_double(agg.mean_r),
               format_double(agg.std_r), format_double(agg.mean_r_x),
               format_double(agg.mean_r_y)});
    const bool both = report.by_method.count(DistillMethod::kSds) &&
                      report.by_method.count(DistillMethod::kJsd);
    csv.row({"jsd_minus_sds_mean_r", both ? format_double(
                                                report.by_method.at(DistillMethod::kJsd).mean_r -
                                                report.by_method.at(DistillMethod::kSds).mean_r)
                                          : "unavailable",
             "", "", "", ""});
    csv.close();
    result.files.push_back("correlation_summary.csv");
  }

  // Coverage per (method, start).
  const GaussianMixture mixture = make_eight_mode_mixture();
  struct GroupKey {
    std::string method;
    double x, y;
    bool operator<(const GroupKey& o) const {
      return std::tie(method, x, y) < std::tie(o.method, o.x, o.y);
    }
  };
  std::map<GroupKey, std::vector<TrajectoryRecord>> groups;
  for (const TrajectoryRecord& rec : records)
    groups[{to_string(rec.config.method), rec.start.x, rec.start.y}].push_back(rec);
  {
    CsvWriter csv((out_dir / "mode_coverage.csv").string());
    std::vector<std::string> header = {"method", "start_x",        "start_y",
                                       "runs",   "distinct_modes", "normalized_entropy"};
    for (int k = 0; k < mixture.class_count(); ++k) header.push_back("mode_" + std::to_string(k));
    csv.row(header);
    for (const auto& [key, recs] : groups) {
      const ModeCoverage cov = mode_coverage(recs, mixture);
      std::vector<std::string> row = {key.method,
                                      format_double(key.x),
                                      format_double(key.y),
                                      format_int(cov.total),
                                      format_int(cov.distinct_mode_count),
                                      format_double(cov.normalized_entropy)};
      for (long h : cov.histogram) row.push_back(format_int(h));
      csv.row(row);
    }
    csv.close();
    result.files.push_back("mode_coverage.csv");
  }

  if (plots) {
    // Estimated noise vs control variate, pooled per method over components.
    std::map<std::string, std::vector<Vec2>> scatter;
    for (const TrajectoryRecord& rec : records)
      for (const StepRecord& s : rec.steps) {
        auto& pts = scatter[to_string(rec.config.method)];
        pts.push_back({s.eps_main.x, s.control_variate.x});
        pts.push_back({s.eps_main.y, s.control_variate.y});
      }
    for (const auto& [method, pts] : scatter) {
      double lim = 1.0;
      for (const Vec2& p : pts) lim = std::max({lim, std::abs(p.x), std::abs(p.y)});
      lim = std::min(lim, 12.0);
      SvgPlot plot(-lim, lim, -lim, lim, 480, 480);
      plot.circles(pts, 1.6, method == "sds" ? "#1f77b4" : "#d62728", 0.6);
      plot.write((out_dir / ("scatter_" + method + ".svg")).string(),
                 method + ": estimated noise vs control variate");
      result.files.push_back("scatter_" + method + ".svg");
    }
    for (const auto& [key, recs] : groups) {
      SvgPlot plot(-1.6, 1.6, -1.6, 1.6, 560, 560);
      plot.circles(mixture.centers, 4.0, "#555555", 0.9);
      for (const TrajectoryRecord& rec : recs) {
        std::vector<Vec2> path;
        path.push_back(rec.start);
        for (const StepRecord& s : rec.steps) path.push_back(s.theta_after);
        plot.polyline(path, key.method == "sds" ? "#1f77b4" : "#d62728", 1.0, 0.35);
        plot.circle(rec.terminal_theta, 2.4, "#d62728", 0.9);
      }
      plot.circle({key.x, key.y}, 4.0, "#008080", 1.0);
      const std::string name = "trajectories_" + key.method + "_start_" + format_double(key.x) +
                               "_" + format_double(key.y) + ".svg";
      plot.write((out_dir / name).string(),
                 key.method + " from (" + format_double(key.x) + ", " + format_double(key.y) +
                     ")");
      result.files.push_back(name);
    }
  }

  std::string digest = "analyze";
  for (const fs::path& p : paths) digest += ":" + p.filename().string();
  result.manifest = write_manifest(out_dir, "analyze", detail::fnv_hash_hex(digest), result.files);
  return result;
}

// Draws points either from a trained checkpoint (ancestral chain) or straight
// from the mixture, and writes them as CSV plus a scatter. For model samples
// the label column is the nearest-mode assignment.
inline CommandResult cmd_sample(const ExperimentConfig& config, const fs::path& checkpoint_path,
                                int n, int label, std::uint64_t seed, const fs::path& out_dir,
                                bool force = false) {
  if (n < 0) throw std::invalid_argument("sample: n must be >= 0");
  detail::prepare_out_dir(out_dir, force);
  CommandResult result;
  result.out_dir = out_dir;

  const GaussianMixture mixture = make_eight_mode_mixture(config.data_std);
  std::vector<LabeledPoint> points;
  std::string title;
  if (checkpoint_path.empty()) {
    Rng rng(seed);
    points = sample(mixture, n, rng);
    title = "mixture dataset";
  } else {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const NoiseSchedule sched = linear_schedule(ck.timesteps, ck.beta_start, ck.beta_end);
    if (label >= ck.model.config.class_count)
      throw std::invalid_argument("sample: label outside [0, " +
                                  std::to_string(ck.model.config.class_count) + ")");
    const int cond = label < 0 ? ck.model.null_label() : label;
    Rng rng(seed);
    const std::vector<Vec2> xs =
        ancestral_sample(ck.model, sched, n, cond, rng, config.guidance_scale);
    for (const Vec2& x : xs) points.push_back({x, nearest_mode(mixture, x).first});
    title = label < 0 ? "unconditional model samples"
                      : "model samples for class " + std::to_string(label);
  }

  {
    CsvWriter csv((out_dir / "samples.csv").string());
    csv.row({"x", "y", "label"});
    for (const LabeledPoint& p : points)
      csv.row({format_double(p.position.x), format_double(p.position.y), format_int(p.label)});
    csv.close();
    result.files.push_back("samples.csv");
  }
  if (config.plots) {
    std::vector<Vec2> xs;
    xs.reserve(points.size());
    for (const LabeledPoint& p : points) xs.push_back(p.position);
    detail::scatter_svg(out_dir / "samples.svg", title, {}, xs);
    result.files.push_back("samples.svg");
  }
  result.manifest = write_manifest(
      out_dir, "sample",
      detail::fnv_hash_hex("sample n=" + std::to_string(n) + " label=" + std::to_string(label) +
                           " seed=" + std::to_string(seed)),
      result.files);
  return result;
}

}  // namespace sdlab

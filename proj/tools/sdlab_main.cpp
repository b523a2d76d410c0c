#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "sdlab/commands.hpp"
#include "sdlab/config.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_root;
  bool force = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config file (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args.out_root, "output root directory")
      ->envname("SDLAB_OUT");
  cmd->add_flag("--force", args.force, "write into a non-empty output directory");
}

sdlab::ExperimentConfig load_or_default(const CommonArgs& args) {
  if (args.config_path.empty()) return sdlab::ExperimentConfig{};
  return sdlab::load_config(args.config_path);
}

fs::path resolve_out(const CommonArgs& args, const sdlab::ExperimentConfig& config,
                     const char* sub) {
  const fs::path root = args.out_root.empty() ? fs::path(config.out_dir) : fs::path(args.out_root);
  return root / sub;
}

sdlab::Vec2 parse_start(const std::string& s) {
  double x = 0.0, y = 0.0;
  if (std::sscanf(s.c_str(), "%lf,%lf", &x, &y) != 2)
    throw CLI::ValidationError("--start", "expected \"x,y\"");
  return {x, y};
}

void print_files(const sdlab::CommandResult& result) {
  std::printf("wrote %zu files under %s\n", result.files.size(), result.out_dir.c_str());
  std::printf("manifest: %s\n", result.manifest.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"score distillation lab: toy diffusion training, SDS/JSD particle "
               "distillation, divergence tables, and trajectory analysis"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the score model and write a checkpoint");
  CommonArgs train_args;
  add_common(train_cmd, train_args);
  int train_epochs = -1;
  train_cmd->add_option("--epochs", train_epochs, "override training.epochs");

  // distill
  auto* distill_cmd =
      app.add_subcommand("distill", "run the distillation grid against a checkpoint");
  CommonArgs distill_args;
  add_common(distill_cmd, distill_args);
  std::string distill_checkpoint;
  distill_cmd->add_option("--checkpoint", distill_checkpoint, "trained model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  int distill_seeds = -1;
  std::string distill_method;
  std::string distill_start;
  double distill_scale = -1.0;
  int distill_label = -2;
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  distill_cmd->add_option("--seeds", distill_seeds, "number of seeds (0..N-1)");
  distill_cmd->add_option("--method", distill_method, "sds | jsd | both")
      ->check(CLI::IsMember({"sds", "jsd", "both"}));
  distill_cmd->add_option("--start", distill_start, "single start point \"x,y\"");
  distill_cmd->add_option("--scale", distill_scale, "guidance scale");
  distill_cmd->add_option("--label", distill_label,
                          "conditioning class (-1: nearest mode to the start)");
  distill_cmd->add_option("--workers", workers, "worker threads for the seed grid");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "divergence comparison table and plot");
  CommonArgs sweep_args;
  add_common(sweep_cmd, sweep_args);
  int sweep_points = 100;
  sweep_cmd->add_option("--points", sweep_points, "number of sweep points");

  // analyze
  auto* analyze_cmd =
      app.add_subcommand("analyze", "correlation and mode-coverage reports over trajectories");
  CommonArgs analyze_args;
  add_common(analyze_cmd, analyze_args);
  std::string traj_dir;
  analyze_cmd->add_option("trajectories", traj_dir, "directory containing *.jsonl trajectories")
      ->required()
      ->check(CLI::ExistingDirectory);

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw samples from a checkpoint or the mixture");
  CommonArgs sample_args;
  add_common(sample_cmd, sample_args);
  std::string sample_checkpoint;
  int sample_n = 2000;
  int sample_label = -1;
  std::uint64_t sample_seed = 0;
  bool sample_data = false;
  sample_cmd->add_option("--checkpoint", sample_checkpoint, "trained model checkpoint")
      ->check(CLI::ExistingFile);
  sample_cmd->add_option("--n", sample_n, "number of samples");
  sample_cmd->add_option("--label", sample_label, "class label (-1: unconditional)");
  sample_cmd->add_option("--seed", sample_seed, "sampling seed");
  sample_cmd->add_flag("--data", sample_data, "sample the mixture dataset instead of the model");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      sdlab::ExperimentConfig config = load_or_default(train_args);
      if (train_epochs > 0) config.epochs = train_epochs;
      const auto result = sdlab::cmd_train(
          config, resolve_out(train_args, config, "train"), train_args.force,
          [&](int epoch, double loss) {
            const int every = std::max(1, config.epochs / 10);
            if (epoch % every == 0 || epoch + 1 == config.epochs)
              std::printf("epoch %d/%d  mean_loss=%.6f\n", epoch + 1, config.epochs, loss);
          });
      print_files(result);
    } else if (distill_cmd->parsed()) {
      sdlab::ExperimentConfig config = load_or_default(distill_args);
      if (distill_seeds > 0) config.seeds = sdlab::ExperimentConfig::default_seeds(distill_seeds);
      if (!distill_method.empty()) config.method = distill_method;
      if (!distill_start.empty()) config.starts = {parse_start(distill_start)};
      if (distill_scale >= 0.0) config.guidance_scale = distill_scale;
      if (distill_label >= -1) config.target_class = distill_label;
      const auto result = sdlab::cmd_distill(config, distill_checkpoint,
                                             resolve_out(distill_args, config, "distill"),
                                             workers, distill_args.force);
      print_files(result);
    } else if (sweep_cmd->parsed()) {
      sdlab::ExperimentConfig config = load_or_default(sweep_args);
      const auto result = sdlab::cmd_sweep(sweep_points, resolve_out(sweep_args, config, "sweep"),
                                           sweep_args.force, config.plots);
      print_files(result);
    } else if (analyze_cmd->parsed()) {
      sdlab::ExperimentConfig config = load_or_default(analyze_args);
      const auto result = sdlab::cmd_analyze(traj_dir, resolve_out(analyze_args, config, "analyze"),
                                             analyze_args.force, config.plots);
      print_files(result);
    } else if (sample_cmd->parsed()) {
      sdlab::ExperimentConfig config = load_or_default(sample_args);
      if (sample_data && !sample_checkpoint.empty())
        throw CLI::ValidationError("--data", "cannot combine --data with --checkpoint");
      if (!sample_data && sample_checkpoint.empty())
        throw CLI::ValidationError("sample", "need --checkpoint or --data");
      const auto result = sdlab::cmd_sample(config, sample_checkpoint, sample_n, sample_label,
                                            sample_seed, resolve_out(sample_args, config, "sample"),
                                            sample_args.force);
      print_files(result);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

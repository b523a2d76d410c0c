#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <set>
#include <sstream>

#include "sdlab/commands.hpp"
#include "support/fixtures.hpp"

using namespace sdlab;
namespace fs = std::filesystem;

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_ext(const fs::path& dir, const std::string& ext) {
  int n = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  return n;
}

ExperimentConfig quick_train_config() {
  ExperimentConfig c = test::tiny_experiment_config();
  c.dataset_size = 400;
  c.epochs = 1;
  c.hidden_width = 16;
  c.time_embed_dim = 8;
  c.class_embed_dim = 4;
  c.plots = false;
  return c;
}

}  // namespace

TEST_CASE("cmd_train: one-epoch smoke run emits all artifacts") {
  const fs::path dir = test::scratch_dir("cmd_train_smoke");
  ExperimentConfig c = quick_train_config();
  c.plots = true;
  const CommandResult result = cmd_train(c, dir);
  REQUIRE(fs::exists(dir / "checkpoint.json"));
  REQUIRE(fs::exists(dir / "loss.csv"));
  REQUIRE(fs::exists(dir / "samples.svg"));
  REQUIRE(fs::exists(dir / "manifest.json"));

  // loss.csv: header + exactly one epoch row
  std::ifstream in(dir / "loss.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 2);

  // the manifest lists exactly the emitted files
  const auto files = read_manifest_files(result.manifest);
  REQUIRE(std::set<std::string>(files.begin(), files.end()) ==
          std::set<std::string>({"checkpoint.json", "loss.csv", "samples.svg"}));
}

TEST_CASE("cmd_train: reruns are byte-identical") {
  const ExperimentConfig c = quick_train_config();
  const fs::path a = test::scratch_dir("cmd_train_a");
  const fs::path b = test::scratch_dir("cmd_train_b");
  cmd_train(c, a);
  cmd_train(c, b);
  REQUIRE(read_bytes(a / "loss.csv") == read_bytes(b / "loss.csv"));
  REQUIRE(read_bytes(a / "checkpoint.json") == read_bytes(b / "checkpoint.json"));
}

TEST_CASE("cmd_train refuses a non-empty output directory without force") {
  const fs::path dir = test::scratch_dir("cmd_train_refuse");
  std::ofstream(dir / "existing.txt") << "x";
  const ExperimentConfig c = quick_train_config();
  REQUIRE_THROWS_WITH(cmd_train(c, dir), Catch::Matchers::ContainsSubstring("--force"));
  REQUIRE_NOTHROW(cmd_train(c, dir, /*force=*/true));
}

TEST_CASE("cmd_distill: file counting contract and determinism") {
  const auto& f = test::trained_fixture();
  ExperimentConfig c = f.config;
  c.method = "both";
  c.starts = {{1.0, 1.0}};
  c.seeds = ExperimentConfig::default_seeds(10);

  const fs::path dir = test::scratch_dir("cmd_distill_count");
  const CommandResult result = cmd_distill(c, f.checkpoint_path, dir, /*workers=*/2);
  REQUIRE(count_ext(dir / "trajectories", ".jsonl") == 20);
  REQUIRE(count_ext(dir / "trajectories", ".csv") == 20);
  REQUIRE(result.files.size() == 40);

  // rerun into a fresh directory: byte-identical trajectory outputs
  const fs::path dir2 = test::scratch_dir("cmd_distill_count2");
  cmd_distill(c, f.checkpoint_path, dir2, /*workers=*/3);
  for (const auto& e : fs::directory_iterator(dir / "trajectories")) {
    const fs::path other = dir2 / "trajectories" / e.path().filename();
    REQUIRE(read_bytes(e.path()) == read_bytes(other));
  }
}

TEST_CASE("cmd_distill rejects a checkpoint/schedule mismatch before any run") {
  const auto& f = test::trained_fixture();
  ExperimentConfig c = f.config;
  c.timesteps = 500;
  c.t_max = 480;
  const fs::path dir = test::scratch_dir("cmd_distill_mismatch");
  REQUIRE_THROWS_WITH(cmd_distill(c, f.checkpoint_path, dir),
                      Catch::Matchers::ContainsSubstring("checkpoint/schedule mismatch"));
  REQUIRE(!fs::exists(dir / "trajectories"));
}

TEST_CASE("cmd_sweep: csv shape and sentinel endpoints") {
  const fs::path dir = test::scratch_dir("cmd_sweep");
  const CommandResult result = cmd_sweep(100, dir);
  REQUIRE(fs::exists(dir / "divergence_sweep.csv"));
  REQUIRE(fs::exists(dir / "divergence_sweep.svg"));

  std::ifstream in(dir / "divergence_sweep.csv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  REQUIRE(lines.size() == 101);  // header + 100 rows
  REQUIRE(lines[0] == "a,kl,jd,jsd,gjsd,approx_jsd");
  REQUIRE(lines[1].find("inf") != std::string::npos);     // a = 0
  REQUIRE(lines.back().find("inf") != std::string::npos); // a = 1
  for (const std::string& l : lines)
    REQUIRE(std::count(l.begin(), l.end(), ',') == 5);
  const auto files = read_manifest_files(result.manifest);
  REQUIRE(files.size() == 2);
}

TEST_CASE("cmd_analyze: artifact families, determinism, error paths") {
  const auto& f = test::trained_fixture();
  ExperimentConfig c = f.config;
  c.method = "both";
  c.starts = {{1.0, 1.0}};
  c.seeds = ExperimentConfig::default_seeds(6);
  const fs::path corpus = test::scratch_dir("cmd_analyze_corpus");
  cmd_distill(c, f.checkpoint_path, corpus, 2);

  const fs::path out = test::scratch_dir("cmd_analyze_out");
  const CommandResult result = cmd_analyze(corpus / "trajectories", out);
  REQUIRE(fs::exists(out / "correlation_runs.csv"));
  REQUIRE(fs::exists(out / "correlation_summary.csv"));
  REQUIRE(fs::exists(out / "mode_coverage.csv"));
  REQUIRE(count_ext(out, ".svg") >= 3);  // scatter per method + trajectory overlays

  // summary carries a cross-method comparison row
  const std::string summary = read_bytes(out / "correlation_summary.csv");
  REQUIRE(summary.find("jsd_minus_sds_mean_r") != std::string::npos);
  REQUIRE(summary.find("unavailable") == std::string::npos);

  // rerun: identical CSV bytes
  const fs::path out2 = test::scratch_dir("cmd_analyze_out2");
  cmd_analyze(corpus / "trajectories", out2);
  for (const char* name : {"correlation_runs.csv", "correlation_summary.csv",
                           "mode_coverage.csv"})
    REQUIRE(read_bytes(out / name) == read_bytes(out2 / name));

  // single-method corpus: comparison marked unavailable
  ExperimentConfig single = c;
  single.method = "sds";
  single.seeds = ExperimentConfig::default_seeds(3);
  const fs::path corpus2 = test::scratch_dir("cmd_analyze_single");
  cmd_distill(single, f.checkpoint_path, corpus2, 1);
  const fs::path out3 = test::scratch_dir("cmd_analyze_out3");
  cmd_analyze(corpus2 / "trajectories", out3);
  REQUIRE(read_bytes(out3 / "correlation_summary.csv").find("unavailable") != std::string::npos);

  // empty corpus: explicit error
  const fs::path empty = test::scratch_dir("cmd_analyze_empty");
  REQUIRE_THROWS_WITH(cmd_analyze(empty, test::scratch_dir("cmd_analyze_out4")),
                      Catch::Matchers::ContainsSubstring("no trajectory files"));
}

TEST_CASE("cmd_sample: dataset mode and model mode") {
  const auto& f = test::trained_fixture();

  const fs::path data_dir = test::scratch_dir("cmd_sample_data");
  ExperimentConfig c = f.config;
  cmd_sample(c, /*checkpoint=*/{}, 50, -1, 3, data_dir);
  std::ifstream in(data_dir / "samples.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 51);  // header + 50

  const fs::path model_dir = test::scratch_dir("cmd_sample_model");
  cmd_sample(c, f.checkpoint_path, 5, 2, 3, model_dir);
  REQUIRE(fs::exists(model_dir / "samples.csv"));
  REQUIRE(fs::exists(model_dir / "samples.svg"));
}

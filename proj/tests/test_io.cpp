#include <catch2/catch_amalgamated.hpp>

#include <charconv>
#include <fstream>

#include "sdlab/checkpoint.hpp"
#include "sdlab/config.hpp"
#include "sdlab/csv.hpp"
#include "sdlab/manifest.hpp"
#include "sdlab/trajectory_io.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace sdlab;
namespace fs = std::filesystem;

TEST_CASE("format_double round-trips and carries inf sentinels") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double v = std::exp(20.0 * (rng.uniform() - 0.5)) * (rng.uniform() < 0.5 ? -1 : 1);
    const std::string s = format_double(v);
    double back = 0.0;
    std::from_chars(s.data(), s.data() + s.size(), back);
    REQUIRE(back == v);
  }
  REQUIRE(format_double(std::numeric_limits<double>::infinity()) == "inf");
  REQUIRE(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  REQUIRE(format_double(0.5) == "0.5");
}

TEST_CASE("checkpoint round-trip preserves parameters bit-for-bit") {
  const fs::path dir = test::scratch_dir("checkpoint_roundtrip");
  ScoreModelConfig mc;
  mc.hidden_width = 24;
  mc.time_embed_dim = 12;
  mc.class_embed_dim = 6;
  const ScoreModel model = make_score_model(mc, 77);
  TrainConfig tc;
  tc.epochs = 5;
  const NoiseSchedule sched = linear_schedule(1000, 1e-4, 0.02);
  const fs::path path = dir / "ck.json";
  save_checkpoint(path, model, tc, sched);

  const Checkpoint ck = load_checkpoint(path);
  std::vector<double> a, b;
  flatten_params(model, a);
  flatten_params(ck.model, b);
  REQUIRE(a == b);
  REQUIRE(ck.model.init_seed == 77);
  REQUIRE(ck.train.epochs == 5);
  REQUIRE(ck.timesteps == 1000);

  // loaded model predicts identically
  const Vec2 x{0.25, -0.75};
  const Vec2 pa = model.predict(x, 400, 3);
  const Vec2 pb = ck.model.predict(x, 400, 3);
  REQUIRE(pa.x == pb.x);
  REQUIRE(pa.y == pb.y);
}

TEST_CASE("corrupted checkpoints are rejected with the path named") {
  const fs::path dir = test::scratch_dir("checkpoint_corrupt");

  SECTION("missing file") {
    REQUIRE_THROWS_WITH(load_checkpoint(dir / "absent.json"),
                        Catch::Matchers::ContainsSubstring("absent.json"));
  }
  SECTION("not json") {
    const fs::path p = dir / "garbage.json";
    std::ofstream(p) << "not json at all{{{";
    REQUIRE_THROWS_WITH(load_checkpoint(p), Catch::Matchers::ContainsSubstring("not valid JSON"));
  }
  SECTION("wrong format tag") {
    const fs::path p = dir / "tag.json";
    std::ofstream(p) << R"({"format":"something.else","version":1})";
    REQUIRE_THROWS_WITH(load_checkpoint(p), Catch::Matchers::ContainsSubstring("format tag"));
  }
  SECTION("shape mismatch") {
    ScoreModelConfig mc;
    mc.hidden_width = 16;
    mc.time_embed_dim = 8;
    mc.class_embed_dim = 4;
    const ScoreModel model = make_score_model(mc, 1);
    const NoiseSchedule sched = linear_schedule(1000, 1e-4, 0.02);
    const fs::path p = dir / "shape.json";
    save_checkpoint(p, model, TrainConfig{}, sched);
    // tamper: claim a different hidden width
    std::ifstream in(p);
    nlohmann::json j;
    in >> j;
    in.close();
    j["model"]["time_embed_dim"] = 16;
    std::ofstream(p) << j.dump();
    REQUIRE_THROWS_WITH(load_checkpoint(p),
                        Catch::Matchers::ContainsSubstring("do not match the model config"));
  }
}

TEST_CASE("trajectory jsonl round-trip is exact") {
  const fs::path dir = test::scratch_dir("trajectory_io");
  const NoiseSchedule sched = linear_schedule(1000, 1e-4, 0.02);
  const test::MixtureScoreOracle oracle(make_eight_mode_mixture(), sched);
  DistillConfig config;
  config.method = DistillMethod::kJsd;
  config.seed = 31;
  config.target_class = 4;
  const TrajectoryRecord rec = run_distillation(config, oracle, sched, {1.0, 1.0});

  const fs::path path = dir / (trajectory_file_stem(config.method, {1.0, 1.0}, 31) + ".jsonl");
  write_trajectory_jsonl(path, rec);
  const TrajectoryRecord back = read_trajectory_jsonl(path);

  REQUIRE(back.config.method == rec.config.method);
  REQUIRE(back.config.seed == rec.config.seed);
  REQUIRE(back.config.target_class == rec.config.target_class);
  REQUIRE(back.terminal_mode == rec.terminal_mode);
  REQUIRE(back.terminal_theta.x == rec.terminal_theta.x);
  REQUIRE(back.steps.size() == rec.steps.size());
  for (std::size_t i = 0; i < rec.steps.size(); ++i) {
    REQUIRE(back.steps[i].t == rec.steps[i].t);
    REQUIRE(back.steps[i].eps_main.x == rec.steps[i].eps_main.x);
    REQUIRE(back.steps[i].control_variate.y == rec.steps[i].control_variate.y);
    REQUIRE(back.steps[i].gradient.x == rec.steps[i].gradient.x);
    REQUIRE(back.steps[i].theta_after.y == rec.steps[i].theta_after.y);
  }
  // gradients recompute exactly from the round-tripped inputs
  for (const StepRecord& s : back.steps) {
    const Vec2 expected = expected_gradient(s, back.config, sched);
    REQUIRE(s.gradient.x == expected.x);
    REQUIRE(s.gradient.y == expected.y);
  }
}

TEST_CASE("trajectory file stem encodes method, start, seed") {
  REQUIRE(trajectory_file_stem(DistillMethod::kSds, {1.0, -1.0}, 7) == "sds_start_1_-1_seed0007");
  REQUIRE(trajectory_file_stem(DistillMethod::kJsd, {-1.0, 1.0}, 123) ==
          "jsd_start_-1_1_seed0123");
}

TEST_CASE("config defaults validate and round-trip through json") {
  ExperimentConfig c;
  REQUIRE_NOTHROW(c.validate());
  const nlohmann::json j = to_json(c);
  const ExperimentConfig back = config_from_json(j);
  REQUIRE(back.epochs == c.epochs);
  REQUIRE(back.beta_end == c.beta_end);
  REQUIRE(back.starts.size() == 4);
  REQUIRE(back.seeds.size() == 100);
  REQUIRE(config_hash(back) == config_hash(c));
}

TEST_CASE("config validation names the offending field") {
  ExperimentConfig c;
  c.beta_start = 0.0;
  REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("schedule.beta_start"));
  c = ExperimentConfig{};
  c.null_dropout = 1.0;
  REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("null_dropout"));
  c = ExperimentConfig{};
  c.t_min = 990;
  REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("t_min"));
  c = ExperimentConfig{};
  c.dataset_size = 0;
  REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("data.dataset_size"));
  c = ExperimentConfig{};
  c.method = "vsd";
  REQUIRE_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("vsd"));
}

TEST_CASE("config accepts a seed count or an explicit seed list") {
  const ExperimentConfig a =
      config_from_json(nlohmann::json::parse(R"({"distillation":{"seeds":5}})"));
  REQUIRE(a.seeds == std::vector<std::uint64_t>{0, 1, 2, 3, 4});
  const ExperimentConfig b =
      config_from_json(nlohmann::json::parse(R"({"distillation":{"seeds":[9,4,2]}})"));
  REQUIRE(b.seeds == std::vector<std::uint64_t>{9, 4, 2});
}

TEST_CASE("config hash is sensitive to field changes") {
  ExperimentConfig a, b;
  b.distill_lr = 0.031;
  REQUIRE(config_hash(a) != config_hash(b));
}

TEST_CASE("target_class -1 resolves to the mode nearest the start") {
  ExperimentConfig c;
  const DistillConfig dc = c.distill_config(DistillMethod::kSds, {1.0, 1.0}, 0);
  REQUIRE(dc.target_class == 4);  // (1/sqrt2, 1/sqrt2)
  const DistillConfig dc2 = c.distill_config(DistillMethod::kSds, {-1.0, -0.9}, 0);
  REQUIRE(dc2.target_class == 7);  // (-1/sqrt2, -1/sqrt2) is closest
  c.target_class = 2;
  REQUIRE(c.distill_config(DistillMethod::kJsd, {1.0, 1.0}, 0).target_class == 2);
}

TEST_CASE("manifest enumerates exactly the declared files") {
  const fs::path dir = test::scratch_dir("manifest");
  const fs::path path = write_manifest(dir, "train", "abc123", {"b.csv", "a.csv"});
  const auto files = read_manifest_files(path);
  REQUIRE(files == std::vector<std::string>{"a.csv", "b.csv"});
}

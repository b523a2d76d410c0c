#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "sdlab/checkpoint.hpp"
#include "sdlab/config.hpp"
#include "sdlab/diffusion.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/toy_data.hpp"

namespace sdlab::test {

namespace fs = std::filesystem;

inline fs::path test_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("sdlab_tests_" + std::to_string(static_cast<long>(::getpid())));
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// Fresh (emptied) scratch directory under the per-process test root.
inline fs::path scratch_dir(const std::string& name) {
  const fs::path dir = test_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Reduced-size experiment used by trained-model tests: same schedule family
// as the defaults, smaller net and dataset so the whole suite trains it once
// in a few seconds.
inline ExperimentConfig tiny_experiment_config() {
  ExperimentConfig c;
  c.dataset_size = 2000;
  c.data_seed = 7;
  c.hidden_width = 64;
  c.hidden_layers = 2;
  c.time_embed_dim = 32;
  c.class_embed_dim = 8;
  c.epochs = 80;
  c.batch_size = 128;
  c.train_seed = 11;
  c.seeds = ExperimentConfig::default_seeds(4);
  return c;
}

struct TrainedFixture {
  ExperimentConfig config;
  GaussianMixture mixture;
  NoiseSchedule sched;
  std::vector<LabeledPoint> dataset;
  ScoreModel model;
  std::vector<double> losses;
  fs::path checkpoint_path;
};

// Trains the tiny model on first use and shares it across test files.
inline const TrainedFixture& trained_fixture() {
  static const TrainedFixture fixture = [] {
    TrainedFixture f;
    f.config = tiny_experiment_config();
    f.mixture = make_eight_mode_mixture(f.config.data_std);
    f.sched = linear_schedule(f.config.timesteps, f.config.beta_start, f.config.beta_end);
    Rng data_rng(f.config.data_seed);
    f.dataset = sample(f.mixture, f.config.dataset_size, data_rng);
    f.model = make_score_model(f.config.model_config(), f.config.train_seed);
    f.losses = train(f.model, f.dataset, f.sched, f.config.train_config());
    f.checkpoint_path = test_root() / "fixture_checkpoint.json";
    save_checkpoint(f.checkpoint_path, f.model, f.config.train_config(), f.sched);
    return f;
  }();
  return fixture;
}

}  // namespace sdlab::test

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdlab/diffusion.hpp"
#include "sdlab/distill.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/toy_data.hpp"

namespace sdlab {

inline constexpr const char* kSoftwareVersion = "0.1.0";

// Whole-experiment configuration. The defaults reproduce the reference
// setup: eight-mode mixture with std 0.1, 1000-step linear beta schedule
// from 1e-4 to 0.02, a 128-wide LayerNorm/ReLU trunk trained for 1000 epochs
// at batch 128 with Adam 1e-3 under cosine annealing, and 10-step
// distillation at lr 0.03.
struct ExperimentConfig {
  // data
  double data_std = 0.1;
  int dataset_size = 8000;
  std::uint64_t data_seed = 7;

  // schedule
  int timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  WeightMode weighting = WeightMode::kUnit;

  // model
  int hidden_width = 128;
  int hidden_layers = 2;
  int time_embed_dim = 64;
  int class_embed_dim = 16;
  double null_dropout = 0.1;

  // training
  int epochs = 1000;
  int batch_size = 128;
  double train_lr = 1e-3;
  std::uint64_t train_seed = 1;

  // distillation
  std::string method = "both";  // sds | jsd | both
  std::string optimizer = "gd";  // gd | adam
  int distill_steps = 10;
  double distill_lr = 0.03;
  double guidance_scale = 1.5;
  int t_min = 20;
  int t_max = 300;
  bool jsd_ratio_weight = true;
  bool guided_inversion = true;
  int inversion_steps = 10;
  std::vector<Vec2> starts = {{1.0, 1.0}, {-1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}};
  std::vector<std::uint64_t> seeds = default_seeds(100);
  int target_class = -1;  // -1: destination cluster a quarter turn from the start

  // output
  std::string out_dir = "out";
  bool plots = true;

  static std::vector<std::uint64_t> default_seeds(int n) {
    std::vector<std::uint64_t> s(n);
    for (int i = 0; i < n; ++i) s[i] = static_cast<std::uint64_t>(i);
    return s;
  }

  std::vector<DistillMethod> methods() const {
    if (method == "both") return {DistillMethod::kSds, DistillMethod::kJsd};
    return {parse_distill_method(method)};
  }

  ScoreModelConfig model_config() const {
    ScoreModelConfig mc;
    mc.hidden_width = hidden_width;
    mc.hidden_layers = hidden_layers;
    mc.time_embed_dim = time_embed_dim;
    mc.class_embed_dim = class_embed_dim;
    mc.class_count = 8;
    mc.timesteps = timesteps;
    return mc;
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch_size;
    tc.base_lr = train_lr;
    tc.null_dropout = null_dropout;
    tc.seed = train_seed;
    return tc;
  }

  // Default conditioning label: the cluster a quarter turn around the circle
  // from the start direction. A destination distinct from the start's own
  // basin keeps the particle in transit, which is the regime where the two
  // methods' control variates behave differently.
  static int default_target_class(const Vec2& start) {
    const double a = std::atan2(start.y, start.x) + std::numbers::pi / 2.0;
    return nearest_mode(make_eight_mode_mixture(), {std::cos(a), std::sin(a)}).first;
  }

  // Per-run distillation config; target_class -1 resolves per the rule above.
  DistillConfig distill_config(DistillMethod m, const Vec2& start, std::uint64_t seed) const {
    DistillConfig dc;
    dc.method = m;
    dc.optimizer = parse_particle_optimizer(optimizer);
    dc.steps = distill_steps;
    dc.lr = distill_lr;
    dc.guidance_scale = guidance_scale;
    dc.t_min = t_min;
    dc.t_max = t_max;
    dc.weighting = weighting;
    dc.jsd_ratio_weight = jsd_ratio_weight;
    dc.guided_inversion = guided_inversion;
    dc.inversion_steps = inversion_steps;
    dc.target_class = target_class >= 0 ? target_class : default_target_class(start);
    dc.seed = seed;
    return dc;
  }

  // Fail-fast validation; errors name the offending field.
  void validate() const {
    if (data_std <= 0.0) throw std::invalid_argument("data.std: must be positive");
    if (dataset_size < 1) throw std::invalid_argument("data.dataset_size: must be >= 1");
    if (timesteps < 2) throw std::invalid_argument("schedule.timesteps: must be >= 2");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
      throw std::invalid_argument(
          "schedule.beta_start/beta_end: need 0 < beta_start <= beta_end < 1");
    model_config().validate();
    if (!(null_dropout >= 0.0 && null_dropout < 1.0))
      throw std::invalid_argument("model.null_dropout: must be within [0, 1)");
    train_config().validate();
    if (method != "both") parse_distill_method(method);  // throws with the bad value
    parse_particle_optimizer(optimizer);
    if (starts.empty()) throw std::invalid_argument("distillation.starts: must be nonempty");
    if (seeds.empty()) throw std::invalid_argument("distillation.seeds: must be nonempty");
    if (target_class < -1 || target_class >= 8)
      throw std::invalid_argument("distillation.target_class: outside [-1, 8)");
    // Per-run configs carry the remaining distillation preconditions.
    distill_config(DistillMethod::kSds, starts.front(), seeds.front()).validate(timesteps, 8);
    if (out_dir.empty()) throw std::invalid_argument("output.directory: must be nonempty");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json starts = nlohmann::json::array();
  for (const Vec2& s : c.starts) starts.push_back({s.x, s.y});
  return {
      {"data", {{"std", c.data_std}, {"dataset_size", c.dataset_size}, {"seed", c.data_seed}}},
      {"schedule",
       {{"timesteps", c.timesteps},
        {"beta_start", c.beta_start},
        {"beta_end", c.beta_end},
        {"weighting", to_string(c.weighting)}}},
      {"model",
       {{"hidden_width", c.hidden_width},
        {"hidden_layers", c.hidden_layers},
        {"time_embed_dim", c.time_embed_dim},
        {"class_embed_dim", c.class_embed_dim},
        {"null_dropout", c.null_dropout}}},
      {"training",
       {{"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.train_lr},
        {"seed", c.train_seed}}},
      {"distillation",
       {{"method", c.method},
        {"optimizer", c.optimizer},
        {"steps", c.distill_steps},
        {"learning_rate", c.distill_lr},
        {"guidance_scale", c.guidance_scale},
        {"t_min", c.t_min},
        {"t_max", c.t_max},
        {"jsd_ratio_weight", c.jsd_ratio_weight},
        {"guided_inversion", c.guided_inversion},
        {"inversion_steps", c.inversion_steps},
        {"starts", starts},
        {"seeds", c.seeds},
        {"target_class", c.target_class}}},
      {"output", {{"directory", c.out_dir}, {"plots", c.plots}}},
  };
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("data")) {
      const auto& s = j.at("data");
      c.data_std = s.value("std", c.data_std);
      c.dataset_size = s.value("dataset_size", c.dataset_size);
      c.data_seed = s.value("seed", c.data_seed);
    }
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      c.timesteps = s.value("timesteps", c.timesteps);
      c.beta_start = s.value("beta_start", c.beta_start);
      c.beta_end = s.value("beta_end", c.beta_end);
      if (s.contains("weighting")) c.weighting = parse_weight_mode(s.at("weighting"));
    }
    if (j.contains("model")) {
      const auto& s = j.at("model");
      c.hidden_width = s.value("hidden_width", c.hidden_width);
      c.hidden_layers = s.value("hidden_layers", c.hidden_layers);
      c.time_embed_dim = s.value("time_embed_dim", c.time_embed_dim);
      c.class_embed_dim = s.value("class_embed_dim", c.class_embed_dim);
      c.null_dropout = s.value("null_dropout", c.null_dropout);
    }
    if (j.contains("training")) {
      const auto& s = j.at("training");
      c.epochs = s.value("epochs", c.epochs);
      c.batch_size = s.value("batch_size", c.batch_size);
      c.train_lr = s.value("learning_rate", c.train_lr);
      c.train_seed = s.value("seed", c.train_seed);
    }
    if (j.contains("distillation")) {
      const auto& s = j.at("distillation");
      c.method = s.value("method", c.method);
      c.optimizer = s.value("optimizer", c.optimizer);
      c.distill_steps = s.value("steps", c.distill_steps);
      c.distill_lr = s.value("learning_rate", c.distill_lr);
      c.guidance_scale = s.value("guidance_scale", c.guidance_scale);
      c.t_min = s.value("t_min", c.t_min);
      c.t_max = s.value("t_max", c.t_max);
      c.jsd_ratio_weight = s.value("jsd_ratio_weight", c.jsd_ratio_weight);
      c.guided_inversion = s.value("guided_inversion", c.guided_inversion);
      c.inversion_steps = s.value("inversion_steps", c.inversion_steps);
      c.target_class = s.value("target_class", c.target_class);
      if (s.contains("starts")) {
        c.starts.clear();
        for (const auto& p : s.at("starts")) {
          if (!p.is_array() || p.size() != 2)
            throw std::invalid_argument("distillation.starts: entries must be [x, y] pairs");
          c.starts.push_back({p[0].get<double>(), p[1].get<double>()});
        }
      }
      if (s.contains("seeds")) {
        // Either an integer count (seeds 0..n-1) or an explicit list.
        const auto& seeds = s.at("seeds");
        if (seeds.is_number_integer()) {
          const int n = seeds.get<int>();
          if (n < 1) throw std::invalid_argument("distillation.seeds: count must be >= 1");
          c.seeds = ExperimentConfig::default_seeds(n);
        } else {
          c.seeds = seeds.get<std::vector<std::uint64_t>>();
        }
      }
    }
    if (j.contains("output")) {
      const auto& s = j.at("output");
      c.out_dir = s.value("directory", c.out_dir);
      c.plots = s.value("plots", c.plots);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: malformed field (") + e.what() + ")");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config " + path.string() + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": not valid JSON (" + e.what() + ")");
  }
  return config_from_json(j);
}

// FNV-1a over the canonical (sorted-key) JSON dump.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string dump = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace sdlab

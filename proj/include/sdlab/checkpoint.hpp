#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdlab/diffusion.hpp"
#include "sdlab/nn.hpp"
#include "sdlab/schedule.hpp"

namespace sdlab {

// Checkpoint layout (JSON, documented in docs/formats.md):
//   format/version tags, the init seed, the model config and parameter
//   arrays in row-major flat order, the training config, and the schedule
//   parameters the model was trained against.
inline constexpr const char* kCheckpointFormat = "sdlab.checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ScoreModel model;
  TrainConfig train;
  int timesteps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
  const auto& data = j.at("data");
  if (data.size() != m.data.size())
    throw std::runtime_error(where + ": parameter array has " + std::to_string(data.size()) +
                             " entries, expected " + std::to_string(m.data.size()));
  m.data = data.get<std::vector<double>>();
  for (double v : m.data)
    if (!std::isfinite(v)) throw std::runtime_error(where + ": non-finite parameter entry");
  return m;
}

inline nlohmann::json network_to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers)
    layers.push_back({{"weights", matrix_to_json(l.weights)}, {"bias", l.bias}});
  nlohmann::json norms = nlohmann::json::array();
  for (const auto& n : net.norms)
    norms.push_back({{"gain", n.gain}, {"shift", n.shift}, {"epsilon", n.epsilon}});
  return {{"layers", layers}, {"norms", norms}};
}

inline Network network_from_json(const nlohmann::json& j, const std::string& where) {
  Network net;
  for (const auto& lj : j.at("layers")) {
    DenseLayer l;
    l.weights = matrix_from_json(lj.at("weights"), where);
    l.bias = lj.at("bias").get<std::vector<double>>();
    if (static_cast<int>(l.bias.size()) != l.weights.rows)
      throw std::runtime_error(where + ": bias length does not match weight rows");
    net.layers.push_back(std::move(l));
  }
  if (net.layers.empty()) throw std::runtime_error(where + ": network has no layers");
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k)
    if (net.layers[k].out_dim() != net.layers[k + 1].in_dim())
      throw std::runtime_error(where + ": consecutive layer dimensions do not compose");
  for (const auto& nj : j.at("norms")) {
    LayerNormParams n;
    n.gain = nj.at("gain").get<std::vector<double>>();
    n.shift = nj.at("shift").get<std::vector<double>>();
    n.epsilon = nj.at("epsilon").get<double>();
    if (n.epsilon <= 0.0) throw std::runtime_error(where + ": LayerNorm epsilon must be positive");
    if (n.gain.size() != n.shift.size())
      throw std::runtime_error(where + ": LayerNorm gain/shift length mismatch");
    net.norms.push_back(std::move(n));
  }
  if (!net.norms.empty() && net.norms.size() != net.layers.size() - 1)
    throw std::runtime_error(where + ": LayerNorm block count does not match hidden layers");
  return net;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ScoreModel& model,
                            const TrainConfig& train, const NoiseSchedule& sched) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["init_seed"] = model.init_seed;
  j["model"] = {{"hidden_width", model.config.hidden_width},
                {"hidden_layers", model.config.hidden_layers},
                {"time_embed_dim", model.config.time_embed_dim},
                {"class_embed_dim", model.config.class_embed_dim},
                {"class_count", model.config.class_count},
                {"timesteps", model.config.timesteps},
                {"ln_epsilon", model.config.ln_epsilon},
                {"time_embed", detail::network_to_json(model.time_embed)},
                {"trunk", detail::network_to_json(model.trunk)},
                {"class_embed", detail::matrix_to_json(model.class_embed)}};
  j["training"] = {{"epochs", train.epochs},
                   {"batch_size", train.batch_size},
                   {"learning_rate", train.base_lr},
                   {"null_dropout", train.null_dropout},
                   {"seed", train.seed}};
  j["schedule"] = {{"timesteps", sched.timesteps},
                   {"beta_start", sched.beta_start},
                   {"beta_end", sched.beta_end}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Parses and fully validates before returning; a malformed file never yields
// a partially loaded model.
inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint " + path.string() + ": cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("checkpoint " + path.string() + ": not valid JSON (" + e.what() +
                             ")");
  }
  const std::string where = "checkpoint " + path.string();
  try {
    if (j.value("format", "") != kCheckpointFormat)
      throw std::runtime_error(where + ": format tag mismatch");
    if (j.value("version", -1) != kCheckpointVersion)
      throw std::runtime_error(where + ": unsupported version");
    Checkpoint ck;
    const auto& mj = j.at("model");
    ck.model.config.hidden_width = mj.at("hidden_width").get<int>();
    ck.model.config.hidden_layers = mj.at("hidden_layers").get<int>();
    ck.model.config.time_embed_dim = mj.at("time_embed_dim").get<int>();
    ck.model.config.class_embed_dim = mj.at("class_embed_dim").get<int>();
    ck.model.config.class_count = mj.at("class_count").get<int>();
    ck.model.config.timesteps = mj.at("timesteps").get<int>();
    ck.model.config.ln_epsilon = mj.at("ln_epsilon").get<double>();
    ck.model.config.validate();
    ck.model.init_seed = j.at("init_seed").get<std::uint64_t>();
    ck.model.time_embed = detail::network_from_json(mj.at("time_embed"), where + " (time_embed)");
    ck.model.trunk = detail::network_from_json(mj.at("trunk"), where + " (trunk)");
    ck.model.class_embed = detail::matrix_from_json(mj.at("class_embed"), where + " (class_embed)");

    const auto& cfg = ck.model.config;
    if (ck.model.time_embed.input_dim() != 1 ||
        ck.model.time_embed.output_dim() != cfg.time_embed_dim)
      throw std::runtime_error(where + ": time_embed dimensions do not match the model config");
    if (ck.model.trunk.input_dim() != 2 + cfg.time_embed_dim + cfg.class_embed_dim ||
        ck.model.trunk.output_dim() != 2)
      throw std::runtime_error(where + ": trunk dimensions do not match the model config");
    if (ck.model.class_embed.rows != cfg.class_count + 1 ||
        ck.model.class_embed.cols != cfg.class_embed_dim)
      throw std::runtime_error(where + ": class_embed shape does not match the model config");

    const auto& tj = j.at("training");
    ck.train.epochs = tj.at("epochs").get<int>();
    ck.train.batch_size = tj.at("batch_size").get<int>();
    ck.train.base_lr = tj.at("learning_rate").get<double>();
    ck.train.null_dropout = tj.at("null_dropout").get<double>();
    ck.train.seed = tj.at("seed").get<std::uint64_t>();

    const auto& sj = j.at("schedule");
    ck.timesteps = sj.at("timesteps").get<int>();
    ck.beta_start = sj.at("beta_start").get<double>();
    ck.beta_end = sj.at("beta_end").get<double>();
    if (ck.timesteps != cfg.timesteps)
      throw std::runtime_error(where + ": schedule timesteps do not match the model");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(where + ": missing or malformed field (" + std::string(e.what()) +
                             ")");
  }
}

}  // namespace sdlab

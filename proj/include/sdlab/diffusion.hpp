#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdlab/nn.hpp"
#include "sdlab/rng.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/toy_data.hpp"
#include "sdlab/vec2.hpp"

namespace sdlab {

// Anything that predicts the noise content of a 2D sample at a timestep,
// conditioned on a class label (or the null label for unconditional).
// Trained models and analytic test oracles both implement this.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Vec2 predict(const Vec2& x, int t, int label) const = 0;
  virtual int null_label() const = 0;
};

struct ScoreModelConfig {
  int hidden_width = 128;
  int hidden_layers = 2;
  int time_embed_dim = 64;
  int class_embed_dim = 16;
  int class_count = 8;
  int timesteps = 1000;
  double ln_epsilon = 1e-5;

  void validate() const {
    if (hidden_width < 1) throw std::invalid_argument("model.hidden_width: must be >= 1");
    if (hidden_layers < 1) throw std::invalid_argument("model.hidden_layers: must be >= 1");
    if (time_embed_dim < 1) throw std::invalid_argument("model.time_embed_dim: must be >= 1");
    if (class_embed_dim < 1) throw std::invalid_argument("model.class_embed_dim: must be >= 1");
    if (class_count < 1) throw std::invalid_argument("model.class_count: must be >= 1");
    if (timesteps < 2) throw std::invalid_argument("model.timesteps: must be >= 2");
  }
};

// Conditional epsilon-predictor: a two-layer ReLU net embeds the timestep,
// a learned table embeds the class (row class_count is the null class), and
// a LayerNorm/ReLU trunk maps [point, time embedding, class embedding] to the
// predicted 2D noise.
struct ScoreModel : public NoisePredictor {
  ScoreModelConfig config;
  Network time_embed;
  Network trunk;
  Matrix class_embed;  // (class_count + 1) x class_embed_dim
  std::uint64_t init_seed = 0;

  int null_label() const override { return config.class_count; }

  void check_inputs(int t, int label) const {
    if (t < 0 || t >= config.timesteps)
      throw std::invalid_argument("predict: timestep " + std::to_string(t) + " outside [0, " +
                                  std::to_string(config.timesteps) + ")");
    if (label < 0 || label > config.class_count)
      throw std::invalid_argument("predict: label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(config.class_count) + "]");
  }

  std::vector<double> trunk_input(const Vec2& x, int t, int label) const {
    const double t_scalar = static_cast<double>(t) / static_cast<double>(config.timesteps);
    const std::vector<double> temb = forward(time_embed, std::span<const double>(&t_scalar, 1));
    std::vector<double> in;
    in.reserve(2 + temb.size() + config.class_embed_dim);
    in.push_back(x.x);
    in.push_back(x.y);
    in.insert(in.end(), temb.begin(), temb.end());
    const double* row = class_embed.row(label);
    in.insert(in.end(), row, row + config.class_embed_dim);
    return in;
  }

  Vec2 predict(const Vec2& x, int t, int label) const override {
    check_inputs(t, label);
    const std::vector<double> out = forward(trunk, trunk_input(x, t, label));
    return {out[0], out[1]};
  }
};

inline ScoreModel make_score_model(const ScoreModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ScoreModel m;
  m.config = cfg;
  m.init_seed = seed;
  Rng rng(seed);
  const std::vector<int> temb_dims = {1, cfg.time_embed_dim, cfg.time_embed_dim};
  m.time_embed = make_network(temb_dims, /*layer_norm=*/false, rng, cfg.ln_epsilon);
  std::vector<int> trunk_dims;
  trunk_dims.push_back(2 + cfg.time_embed_dim + cfg.class_embed_dim);
  for (int i = 0; i < cfg.hidden_layers; ++i) trunk_dims.push_back(cfg.hidden_width);
  trunk_dims.push_back(2);
  m.trunk = make_network(trunk_dims, /*layer_norm=*/true, rng, cfg.ln_epsilon);
  m.class_embed = Matrix(cfg.class_count + 1, cfg.class_embed_dim);
  const double bound = std::sqrt(1.0 / cfg.class_embed_dim);
  for (double& w : m.class_embed.data) w = (2.0 * rng.uniform() - 1.0) * bound;
  return m;
}

// Flat parameter order: time_embed, trunk, class_embed (row-major).
inline std::size_t param_count(const ScoreModel& m) {
  return param_count(m.time_embed) + param_count(m.trunk) + m.class_embed.data.size();
}

inline void flatten_params(const ScoreModel& m, std::vector<double>& out) {
  flatten_params(m.time_embed, out);
  flatten_params(m.trunk, out);
  out.insert(out.end(), m.class_embed.data.begin(), m.class_embed.data.end());
}

inline void set_params(ScoreModel& m, std::span<const double> flat) {
  std::size_t pos = set_params(m.time_embed, flat, 0);
  pos = set_params(m.trunk, flat, pos);
  for (double& w : m.class_embed.data) w = flat[pos++];
}

// --- classifier-free guidance ---

struct GuidedPrediction {
  Vec2 eps_hat;
  Vec2 eps_cond;
  Vec2 eps_uncond;
  double scale = 1.0;
};

// eps_hat = eps_uncond + scale * (eps_cond - eps_uncond). The scale 1 and 0
// endpoints return the raw predictions themselves so the collapse identities
// hold exactly in floating point.
inline GuidedPrediction cfg_predict(const NoisePredictor& model, const Vec2& x, int t, int label,
                                    double scale) {
  if (label == model.null_label())
    throw std::invalid_argument("cfg_predict: guidance needs a conditioning label");
  if (scale < 0.0) throw std::invalid_argument("cfg_predict: scale must be >= 0");
  GuidedPrediction g;
  g.scale = scale;
  g.eps_cond = model.predict(x, t, label);
  g.eps_uncond = model.predict(x, t, model.null_label());
  if (scale == 1.0) {
    g.eps_hat = g.eps_cond;
  } else if (scale == 0.0) {
    g.eps_hat = g.eps_uncond;
  } else {
    g.eps_hat = g.eps_uncond + scale * (g.eps_cond - g.eps_uncond);
  }
  return g;
}

// Composed prediction only; skips the unconditional pass when scale == 1,
// which is exact by the collapse identity.
inline Vec2 guided_noise(const NoisePredictor& model, const Vec2& x, int t, int label,
                         double scale) {
  if (scale == 1.0) return model.predict(x, t, label);
  return cfg_predict(model, x, t, label, scale).eps_hat;
}

// --- training ---

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 128;
  double base_lr = 1e-3;
  double null_dropout = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("training.epochs: must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("training.batch_size: must be >= 1");
    if (base_lr <= 0.0) throw std::invalid_argument("training.learning_rate: must be positive");
    if (!(null_dropout >= 0.0 && null_dropout < 1.0))
      throw std::invalid_argument("training.null_dropout: must be within [0, 1)");
  }
};

// Denoising-MSE training: per sample draw t and eps, diffuse, drop the label
// to null with probability null_dropout, and regress the predicted noise onto
// eps. Adam with cosine-annealed lr over the total step count. Returns the
// per-epoch mean loss (squared error summed over the 2 output dims, averaged
// over samples). The training noise stream is seeded with config.seed + 1 so
// it is independent of the init stream.
inline std::vector<double> train(ScoreModel& model, const std::vector<LabeledPoint>& dataset,
                                 const NoiseSchedule& sched, const TrainConfig& config,
                                 const std::function<void(int, double)>& on_epoch = {}) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
  if (sched.timesteps != model.config.timesteps)
    throw std::invalid_argument("train: schedule timesteps do not match the model");

  Rng rng(config.seed + 1);
  const int n = static_cast<int>(dataset.size());
  const int batches_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const long long total_steps = static_cast<long long>(config.epochs) * batches_per_epoch;

  const std::size_t n_params = param_count(model);
  AdamState adam = make_adam_state(n_params);
  std::vector<double> flat_params;
  flat_params.reserve(n_params);
  std::vector<double> flat_grads;
  flat_grads.reserve(n_params);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  const double t_norm = 1.0 / static_cast<double>(model.config.timesteps);
  const int temb_dim = model.config.time_embed_dim;
  const int cemb_dim = model.config.class_embed_dim;

  std::vector<double> losses;
  losses.reserve(config.epochs);
  long long global_step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates shuffle.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[i], order[j]);
    }
    double epoch_loss = 0.0;
    for (int b = 0; b < batches_per_epoch; ++b) {
      const int lo = b * config.batch_size;
      const int hi = std::min(n, lo + config.batch_size);
      const int batch_n = hi - lo;

      GradientBundle trunk_grads = zero_gradients(model.trunk);
      GradientBundle temb_grads = zero_gradients(model.time_embed);
      Matrix cemb_grads(model.class_embed.rows, model.class_embed.cols);

      for (int i = lo; i < hi; ++i) {
        const LabeledPoint& pt = dataset[order[i]];
        const int t = rng.uniform_range(0, sched.timesteps - 1);
        const Vec2 eps = rng.normal2();
        int label = pt.label;
        if (config.null_dropout > 0.0 && rng.uniform() < config.null_dropout)
          label = model.null_label();
        const Vec2 x_t = diffuse(pt.position, t, eps, sched);

        const double t_scalar = static_cast<double>(t) * t_norm;
        ForwardCache temb_cache;
        const std::vector<double> temb =
            forward(model.time_embed, std::span<const double>(&t_scalar, 1), &temb_cache);
        std::vector<double> in;
        in.reserve(2 + temb.size() + cemb_dim);
        in.push_back(x_t.x);
        in.push_back(x_t.y);
        in.insert(in.end(), temb.begin(), temb.end());
        const double* crow = model.class_embed.row(label);
        in.insert(in.end(), crow, crow + cemb_dim);

        ForwardCache trunk_cache;
        const std::vector<double> pred = forward(model.trunk, in, &trunk_cache);
        const double rx = pred[0] - eps.x;
        const double ry = pred[1] - eps.y;
        epoch_loss += rx * rx + ry * ry;

        const double gscale = 2.0 / static_cast<double>(batch_n);
        const std::vector<double> gout = {gscale * rx, gscale * ry};
        std::vector<double> gin;
        GradientBundle gb = backward(model.trunk, trunk_cache, gout, &gin);
        accumulate(trunk_grads, gb);
        const std::span<const double> g_temb(gin.data() + 2, static_cast<std::size_t>(temb_dim));
        GradientBundle tb = backward(model.time_embed, temb_cache, g_temb);
        accumulate(temb_grads, tb);
        double* cg = cemb_grads.row(label);
        for (int c = 0; c < cemb_dim; ++c) cg[c] += gin[2 + temb_dim + c];
      }

      flat_params.clear();
      flatten_params(model, flat_params);
      flat_grads.clear();
      flatten_grads(temb_grads, flat_grads);
      flatten_grads(trunk_grads, flat_grads);
      flat_grads.insert(flat_grads.end(), cemb_grads.data.begin(), cemb_grads.data.end());

      const double lr = cosine_lr(global_step, total_steps, config.base_lr);
      adam_step(flat_params, flat_grads, adam, lr);
      set_params(model, flat_params);
      ++global_step;
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
    losses.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return losses;
}

// --- sampling and inversion ---

// Standard DDPM reverse chain from pure noise; fresh noise injected at every
// step except t = 0 (variance beta_t). Unconditional when label is the null
// label; otherwise guided at guidance_scale.
inline std::vector<Vec2> ancestral_sample(const NoisePredictor& model, const NoiseSchedule& sched,
                                          int n, int label, Rng& rng,
                                          double guidance_scale = 1.0) {
  if (n < 0) throw std::invalid_argument("ancestral_sample: n must be >= 0");
  std::vector<Vec2> out;
  out.reserve(n);
  const bool unconditional = (label == model.null_label());
  for (int i = 0; i < n; ++i) {
    Vec2 x = rng.normal2();
    for (int t = sched.timesteps - 1; t >= 0; --t) {
      const Vec2 eps_hat = unconditional ? model.predict(x, t, label)
                                         : guided_noise(model, x, t, label, guidance_scale);
      const double beta = sched.betas[t];
      x = (x - (beta / sched.sigma[t]) * eps_hat) / std::sqrt(1.0 - beta);
      if (t > 0) x += std::sqrt(beta) * rng.normal2();
    }
    out.push_back(x);
  }
  return out;
}

// x_bar0 = (x_t - sigma_t * eps_hat) / alpha_t.
inline Vec2 reverse_denoise(const NoisePredictor& model, const NoiseSchedule& sched,
                            const Vec2& x_t, int t, int label, double guidance_scale = 1.0) {
  sched.check_t(t);
  const Vec2 eps_hat = (label == model.null_label())
                           ? model.predict(x_t, t, label)
                           : guided_noise(model, x_t, t, label, guidance_scale);
  return (x_t - sched.sigma[t] * eps_hat) / sched.alpha[t];
}

// Sub-timestep grid for DDIM inversion: floor(j * t_target / n_steps) for
// j = 0..n_steps, adjacent duplicates removed.
inline std::vector<int> inversion_grid(int t_target, int n_steps) {
  std::vector<int> grid;
  grid.reserve(n_steps + 1);
  for (int j = 0; j <= n_steps; ++j) {
    const int tau = static_cast<int>((static_cast<long long>(j) * t_target) / n_steps);
    if (grid.empty() || grid.back() != tau) grid.push_back(tau);
  }
  return grid;
}

// Deterministic DDIM recurrence run in the increasing-t direction. Stepping
// from level s to level u with the prediction eps = eps_hat(x_s, s):
//   x_u = alpha_u * (x_s - sigma_s * eps) / alpha_s + sigma_u * eps.
// The input point is treated as the sample at level 0.
inline Vec2 ddim_invert(const NoisePredictor& model, const NoiseSchedule& sched, const Vec2& x0,
                        int t_target, int label, int n_steps, double guidance_scale = 1.0) {
  if (n_steps < 1) throw std::invalid_argument("ddim_invert: n_steps must be >= 1");
  if (t_target < 0 || t_target >= sched.timesteps)
    throw std::invalid_argument("ddim_invert: t_target outside [0, timesteps)");
  if (t_target == 0) return x0;
  const std::vector<int> grid = inversion_grid(t_target, n_steps);
  Vec2 x = x0;
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    const int s = grid[j];
    const int u = grid[j + 1];
    const Vec2 eps = guided_noise(model, x, s, label, guidance_scale);
    x = sched.alpha[u] * ((x - sched.sigma[s] * eps) / sched.alpha[s]) + sched.sigma[u] * eps;
  }
  return x;
}

}  // namespace sdlab

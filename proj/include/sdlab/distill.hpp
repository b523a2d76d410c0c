#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdlab/diffusion.hpp"
#include "sdlab/nn.hpp"
#include "sdlab/rng.hpp"
#include "sdlab/schedule.hpp"
#include "sdlab/toy_data.hpp"
#include "sdlab/vec2.hpp"

namespace sdlab {

enum class DistillMethod { kSds, kJsd };

inline DistillMethod parse_distill_method(const std::string& s) {
  if (s == "sds") return DistillMethod::kSds;
  if (s == "jsd") return DistillMethod::kJsd;
  throw std::invalid_argument("distillation method must be \"sds\" or \"jsd\", got \"" + s + "\"");
}

inline const char* to_string(DistillMethod m) {
  return m == DistillMethod::kSds ? "sds" : "jsd";
}

// Particle update rule. Plain gradient descent is the default: its step size
// scales with the gradient, which is what lets 10 steps at lr 0.03 actually
// cross between mixture basins. Adam's normalized steps cap the total travel
// near lr * steps, pinning every run inside the start's own basin.
enum class ParticleOptimizer { kGradientDescent, kAdam };

inline ParticleOptimizer parse_particle_optimizer(const std::string& s) {
  if (s == "gd") return ParticleOptimizer::kGradientDescent;
  if (s == "adam") return ParticleOptimizer::kAdam;
  throw std::invalid_argument("particle optimizer must be \"gd\" or \"adam\", got \"" + s + "\"");
}

inline const char* to_string(ParticleOptimizer o) {
  return o == ParticleOptimizer::kGradientDescent ? "gd" : "adam";
}

struct DistillConfig {
  DistillMethod method = DistillMethod::kSds;
  ParticleOptimizer optimizer = ParticleOptimizer::kGradientDescent;
  int steps = 10;
  double lr = 0.03;
  double guidance_scale = 1.5;
  int t_min = 20;
  int t_max = 300;
  WeightMode weighting = WeightMode::kUnit;
  bool jsd_ratio_weight = true;   // apply the alpha_t / sigma_t factor to the JSD gradient
  bool guided_inversion = true;   // run the minority-sampling pipeline at guidance_scale
  int inversion_steps = 10;
  int target_class = 0;           // conditioning label y
  std::uint64_t seed = 0;

  void validate(int timesteps, int class_count) const {
    if (steps < 1) throw std::invalid_argument("distillation.steps: must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("distillation.learning_rate: must be positive");
    if (guidance_scale < 0.0)
      throw std::invalid_argument("distillation.guidance_scale: must be >= 0");
    if (!(0 <= t_min && t_min < t_max && t_max < timesteps))
      throw std::invalid_argument("distillation.t_min/t_max: need 0 <= t_min < t_max < " +
                                  std::to_string(timesteps));
    if (inversion_steps < 1)
      throw std::invalid_argument("distillation.inversion_steps: must be >= 1");
    if (target_class < 0 || target_class >= class_count)
      throw std::invalid_argument("distillation.target_class: outside [0, " +
                                  std::to_string(class_count) + ")");
  }
};

// The optimizable 2D point standing in for the rendered representation;
// the render function is the identity at this scale.
struct Particle {
  Vec2 theta;
  AdamState adam;
};

inline Particle make_particle(const Vec2& start) { return {start, make_adam_state(2)}; }

struct StepRecord {
  int step = 0;
  Vec2 theta_before;
  Vec2 theta_after;
  int t = 0;
  Vec2 eps_main;         // guided prediction at x_hat_t
  Vec2 control_variate;  // injected noise (SDS) or guided prediction at x_bar_t (JSD)
  Vec2 gradient;
};

struct TrajectoryRecord {
  DistillConfig config;
  Vec2 start;
  std::vector<StepRecord> steps;
  Vec2 terminal_theta;
  int terminal_mode = -1;
  double terminal_distance = 0.0;
};

namespace detail {

inline void apply_particle_gradient(Particle& particle, const Vec2& grad, double lr,
                                    ParticleOptimizer optimizer, const char* who) {
  if (!is_finite(grad)) throw std::runtime_error(std::string(who) + ": non-finite gradient");
  if (optimizer == ParticleOptimizer::kGradientDescent) {
    particle.theta -= lr * grad;
  } else {
    double p[2] = {particle.theta.x, particle.theta.y};
    const double g[2] = {grad.x, grad.y};
    adam_step(std::span<double>(p, 2), std::span<const double>(g, 2), particle.adam, lr);
    particle.theta = {p[0], p[1]};
  }
  if (!is_finite(particle.theta))
    throw std::runtime_error(std::string(who) + ": non-finite particle position");
}

}  // namespace detail

// One SDS update: diffuse theta with fresh noise, take the guided prediction,
// and step along w(t) * (eps_hat - eps). The injected noise is the control
// variate.
inline StepRecord sds_step(Particle& particle, const NoisePredictor& model,
                           const NoiseSchedule& sched, const DistillConfig& config, Rng& rng) {
  StepRecord rec;
  rec.theta_before = particle.theta;
  rec.t = rng.uniform_range(config.t_min, config.t_max);
  const Vec2 eps = rng.normal2();
  const Vec2 x_hat_t = diffuse(particle.theta, rec.t, eps, sched);
  rec.eps_main = guided_noise(model, x_hat_t, rec.t, config.target_class, config.guidance_scale);
  rec.control_variate = eps;
  const double w = weight(rec.t, config.weighting, sched);
  rec.gradient = w * (rec.eps_main - rec.control_variate);
  detail::apply_particle_gradient(particle, rec.gradient, config.lr, config.optimizer, "sds_step");
  rec.theta_after = particle.theta;
  return rec;
}

struct MinoritySample {
  Vec2 x_hat_t;  // DDIM-inverted latent of theta
  Vec2 x_bar0;   // reverse-denoised point
  Vec2 x_bar_t;  // freshly re-diffused companion sample
};

// Three-step minority sampling: DDIM-invert theta up to t, reverse-denoise
// back to a clean estimate, then re-diffuse it with the given fresh noise.
inline MinoritySample minority_sample(const NoisePredictor& model, const NoiseSchedule& sched,
                                      const Vec2& theta, int t, int label,
                                      const DistillConfig& config, const Vec2& fresh_eps) {
  sched.check_t(t);
  const double pipeline_scale = config.guided_inversion ? config.guidance_scale : 1.0;
  MinoritySample ms;
  ms.x_hat_t = ddim_invert(model, sched, theta, t, label, config.inversion_steps, pipeline_scale);
  ms.x_bar0 = reverse_denoise(model, sched, ms.x_hat_t, t, label, pipeline_scale);
  ms.x_bar_t = diffuse(ms.x_bar0, t, fresh_eps, sched);
  return ms;
}

inline MinoritySample minority_sample(const NoisePredictor& model, const NoiseSchedule& sched,
                                      const Vec2& theta, int t, int label,
                                      const DistillConfig& config, Rng& rng) {
  return minority_sample(model, sched, theta, t, label, config, rng.normal2());
}

// One approximated-JSD update: the gradient is the difference between the
// guided predictions at the inverted latent and at the minority sample,
// optionally scaled by alpha_t / sigma_t.
inline StepRecord jsd_step(Particle& particle, const NoisePredictor& model,
                           const NoiseSchedule& sched, const DistillConfig& config, Rng& rng) {
  StepRecord rec;
  rec.theta_before = particle.theta;
  rec.t = rng.uniform_range(config.t_min, config.t_max);
  const MinoritySample ms =
      minority_sample(model, sched, particle.theta, rec.t, config.target_class, config, rng);
  rec.eps_main =
      guided_noise(model, ms.x_hat_t, rec.t, config.target_class, config.guidance_scale);
  rec.control_variate =
      guided_noise(model, ms.x_bar_t, rec.t, config.target_class, config.guidance_scale);
  const double w = weight(rec.t, config.weighting, sched);
  const double ratio = config.jsd_ratio_weight ? sched.alpha[rec.t] / sched.sigma[rec.t] : 1.0;
  rec.gradient = (w * ratio) * (rec.eps_main - rec.control_variate);
  detail::apply_particle_gradient(particle, rec.gradient, config.lr, config.optimizer, "jsd_step");
  rec.theta_after = particle.theta;
  return rec;
}

// Recomputes what the recorded gradient must be from the recorded inputs.
inline Vec2 expected_gradient(const StepRecord& rec, const DistillConfig& config,
                              const NoiseSchedule& sched) {
  const double w = weight(rec.t, config.weighting, sched);
  const double ratio = (config.method == DistillMethod::kJsd && config.jsd_ratio_weight)
                           ? sched.alpha[rec.t] / sched.sigma[rec.t]
                           : 1.0;
  return (w * ratio) * (rec.eps_main - rec.control_variate);
}

// Raised when a step aborts mid-run; carries the steps recorded so far so the
// caller can dump them for diagnosis.
class DistillAbort : public std::runtime_error {
 public:
  DistillAbort(const std::string& msg, TrajectoryRecord partial)
      : std::runtime_error(msg), partial_record(std::move(partial)) {}

  TrajectoryRecord partial_record;
};

// Full distillation run from a fixed start: fresh particle and Adam state,
// `steps` updates of the configured method, everything recorded, terminal
// point assigned to its nearest mixture mode.
inline TrajectoryRecord run_distillation(const DistillConfig& config, const NoisePredictor& model,
                                         const NoiseSchedule& sched, const Vec2& start) {
  config.validate(sched.timesteps, model.null_label());
  TrajectoryRecord record;
  record.config = config;
  record.start = start;
  Particle particle = make_particle(start);
  Rng rng(config.seed);
  for (int i = 0; i < config.steps; ++i) {
    StepRecord rec;
    try {
      rec = (config.method == DistillMethod::kSds)
                ? sds_step(particle, model, sched, config, rng)
                : jsd_step(particle, model, sched, config, rng);
    } catch (const std::runtime_error& e) {
      record.terminal_theta = particle.theta;
      throw DistillAbort(std::string(e.what()) + " at step " + std::to_string(i),
                         std::move(record));
    }
    rec.step = i;
    record.steps.push_back(rec);
  }
  record.terminal_theta = particle.theta;
  const GaussianMixture mixture = make_eight_mode_mixture();
  const auto [mode, dist] = nearest_mode(mixture, particle.theta);
  record.terminal_mode = mode;
  record.terminal_distance = dist;
  return record;
}

}  // namespace sdlab

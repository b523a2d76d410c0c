#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdlab/vec2.hpp"

namespace sdlab {

enum class WeightMode { kUnit, kSnr };

inline WeightMode parse_weight_mode(const std::string& s) {
  if (s == "unit") return WeightMode::kUnit;
  if (s == "snr") return WeightMode::kSnr;
  throw std::invalid_argument("weighting mode must be \"unit\" or \"snr\", got \"" + s + "\"");
}

inline const char* to_string(WeightMode m) {
  return m == WeightMode::kUnit ? "unit" : "snr";
}

// DDPM coefficient tables. Convention used throughout: beta_t is the per-step
// variance increment, alpha_bar_t the cumulative product of (1 - beta),
// alpha_t = sqrt(alpha_bar_t) and sigma_t = sqrt(1 - alpha_bar_t), so the
// forward kernel is x_t = alpha_t * x0 + sigma_t * eps.
struct NoiseSchedule {
  int timesteps = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  std::vector<double> betas;
  std::vector<double> alpha_bars;
  std::vector<double> alpha;  // sqrt(alpha_bar)
  std::vector<double> sigma;  // sqrt(1 - alpha_bar)

  void check_t(int t) const {
    if (t < 0 || t >= timesteps)
      throw std::invalid_argument("timestep " + std::to_string(t) + " outside [0, " +
                                  std::to_string(timesteps) + ")");
  }
};

inline NoiseSchedule linear_schedule(int timesteps, double beta_start, double beta_end) {
  if (timesteps < 2) throw std::invalid_argument("linear_schedule: timesteps must be >= 2");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("linear_schedule: need 0 < beta_start <= beta_end < 1");
  NoiseSchedule s;
  s.timesteps = timesteps;
  s.beta_start = beta_start;
  s.beta_end = beta_end;
  s.betas.resize(timesteps);
  s.alpha_bars.resize(timesteps);
  s.alpha.resize(timesteps);
  s.sigma.resize(timesteps);
  const double step = (beta_end - beta_start) / static_cast<double>(timesteps - 1);
  double prod = 1.0;
  for (int t = 0; t < timesteps; ++t) {
    s.betas[t] = beta_start + step * static_cast<double>(t);
    prod *= 1.0 - s.betas[t];
    s.alpha_bars[t] = prod;
    s.alpha[t] = std::sqrt(prod);
    s.sigma[t] = std::sqrt(1.0 - prod);
  }
  return s;
}

// Forward kernel: alpha_t * x0 + sigma_t * eps.
inline Vec2 diffuse(const Vec2& x0, int t, const Vec2& eps, const NoiseSchedule& sched) {
  sched.check_t(t);
  return sched.alpha[t] * x0 + sched.sigma[t] * eps;
}

// Per-timestep loss/gradient weight w(t).
inline double weight(int t, WeightMode mode, const NoiseSchedule& sched) {
  sched.check_t(t);
  switch (mode) {
    case WeightMode::kUnit:
      return 1.0;
    case WeightMode::kSnr:
      return sched.sigma[t] * sched.sigma[t];
  }
  throw std::logic_error("weight: unknown mode");
}

}  // namespace sdlab

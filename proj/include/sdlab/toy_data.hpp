#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sdlab/rng.hpp"
#include "sdlab/vec2.hpp"

namespace sdlab {

struct LabeledPoint {
  Vec2 position;
  int label = 0;
};

// Eight isotropic Gaussians centered on the unit circle, one class per mode.
struct GaussianMixture {
  std::vector<Vec2> centers;
  double std_dev = 0.1;

  int class_count() const { return static_cast<int>(centers.size()); }
};

inline GaussianMixture make_eight_mode_mixture(double std_dev = 0.1) {
  if (std_dev <= 0.0) throw std::invalid_argument("make_eight_mode_mixture: std_dev must be positive");
  const double r = 1.0 / std::sqrt(2.0);
  GaussianMixture m;
  m.std_dev = std_dev;
  m.centers = {{1.0, 0.0}, {-1.0, 0.0}, {0.0, 1.0},  {0.0, -1.0},
               {r, r},     {-r, r},     {r, -r},     {-r, -r}};
  // Sanity on the geometry: all centers on the unit circle, minimum pairwise
  // gap 2*sin(pi/8).
  const double expected_gap = 2.0 * std::sin(std::numbers::pi / 8.0);
  double min_gap = 1e300;
  for (std::size_t i = 0; i < m.centers.size(); ++i) {
    if (std::abs(norm(m.centers[i]) - 1.0) > 1e-12)
      throw std::logic_error("make_eight_mode_mixture: center off the unit circle");
    for (std::size_t j = i + 1; j < m.centers.size(); ++j)
      min_gap = std::min(min_gap, distance(m.centers[i], m.centers[j]));
  }
  if (std::abs(min_gap - expected_gap) > 1e-12)
    throw std::logic_error("make_eight_mode_mixture: unexpected center spacing");
  return m;
}

// Uniform class choice, then an isotropic Gaussian around that center.
inline std::vector<LabeledPoint> sample(const GaussianMixture& m, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  std::vector<LabeledPoint> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int k = static_cast<int>(rng.uniform_int(m.centers.size()));
    const Vec2 noise = rng.normal2();
    out.push_back({m.centers[k] + m.std_dev * noise, k});
  }
  return out;
}

// Closest center by Euclidean distance; ties go to the lowest index.
// Distances within 1e-12 count as tied, so points that are equidistant in
// exact arithmetic (like the origin) resolve to the lowest index even though
// the diagonal centers round to one ulp off the unit circle.
inline std::pair<int, double> nearest_mode(const GaussianMixture& m, const Vec2& p) {
  constexpr double kTie = 1e-12;
  int best = 0;
  double best_d = distance(m.centers[0], p);
  for (int k = 1; k < m.class_count(); ++k) {
    const double d = distance(m.centers[k], p);
    if (d < best_d - kTie) {
      best_d = d;
      best = k;
    }
  }
  return {best, best_d};
}

}  // namespace sdlab

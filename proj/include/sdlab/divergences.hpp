#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace sdlab {

// Finite probability vector. Entries nonnegative, summing to 1 within 1e-12.
struct DiscreteDist {
  std::vector<double> probs;

  DiscreteDist() = default;
  explicit DiscreteDist(std::vector<double> p) : probs(std::move(p)) { validate(); }

  std::size_t size() const { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }

  void validate() const {
    double sum = 0.0;
    for (double x : probs) {
      if (!(x >= 0.0)) throw std::invalid_argument("DiscreteDist: negative or NaN entry");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("DiscreteDist: entries sum to " + std::to_string(sum) +
                                  ", expected 1");
  }
};

// Pointwise discriminator values, clamped into (0, 1).
struct DiscriminatorFn {
  std::vector<double> values;
  static constexpr double kClamp = 1e-12;

  double operator[](std::size_t i) const { return values[i]; }
};

inline double clamp_unit(double d) {
  if (d < DiscriminatorFn::kClamp) return DiscriminatorFn::kClamp;
  if (d > 1.0 - DiscriminatorFn::kClamp) return 1.0 - DiscriminatorFn::kClamp;
  return d;
}

namespace detail {
inline void check_same_support(const DiscreteDist& p, const DiscreteDist& q, const char* who) {
  if (p.size() != q.size())
    throw std::invalid_argument(std::string(who) + ": support sizes differ");
}
}  // namespace detail

// Natural-log KL. Terms with p(x)=0 contribute 0; +infinity when q(x)=0 < p(x).
inline double kl(const DiscreteDist& p, const DiscreteDist& q) {
  detail::check_same_support(p, q, "kl");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    acc += p[i] * std::log(p[i] / q[i]);
  }
  return acc;
}

// Symmetrized KL: forward plus reverse.
inline double jeffreys(const DiscreteDist& p, const DiscreteDist& q) {
  return kl(p, q) + kl(q, p);
}

// 0.5*KL(p||m) + 0.5*KL(q||m) with the arithmetic mixture m = (p+q)/2.
// Bounded in [0, ln 2].
inline double jsd(const DiscreteDist& p, const DiscreteDist& q) {
  detail::check_same_support(p, q, "jsd");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
  }
  return acc;
}

// JSD variant over the renormalized geometric-mean mixture. Unbounded above;
// upper-bounds the arithmetic-mixture JSD.
inline double gjsd(const DiscreteDist& p, const DiscreteDist& q) {
  detail::check_same_support(p, q, "gjsd");
  std::vector<double> g(p.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    g[i] = std::sqrt(p[i] * q[i]);
    z += g[i];
  }
  if (z == 0.0) throw std::domain_error("gjsd: fully disjoint supports (zero geometric-mean mass)");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = g[i] / z;
    if (p[i] > 0.0) {
      if (m == 0.0) return std::numeric_limits<double>::infinity();
      acc += 0.5 * p[i] * std::log(p[i] / m);
    }
    if (q[i] > 0.0) {
      if (m == 0.0) return std::numeric_limits<double>::infinity();
      acc += 0.5 * q[i] * std::log(q[i] / m);
    }
  }
  return acc;
}

// Two-player criterion V = E_p[ln D] + E_q[ln(1 - D)].
inline double gan_value(const DiscreteDist& p, const DiscreteDist& q, const DiscriminatorFn& d) {
  detail::check_same_support(p, q, "gan_value");
  if (d.values.size() != p.size())
    throw std::invalid_argument("gan_value: discriminator support size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double di = clamp_unit(d[i]);
    if (p[i] > 0.0) acc += p[i] * std::log(di);
    if (q[i] > 0.0) acc += q[i] * std::log(1.0 - di);
  }
  return acc;
}

// D*(x) = p(x) / (p(x) + q(x)); points with no mass on either side get 1/2.
inline DiscriminatorFn optimal_discriminator(const DiscreteDist& p, const DiscreteDist& q) {
  detail::check_same_support(p, q, "optimal_discriminator");
  DiscriminatorFn d;
  d.values.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double mass = p[i] + q[i];
    d.values[i] = mass > 0.0 ? clamp_unit(p[i] / mass) : 0.5;
  }
  return d;
}

// Non-saturating generator objective at the optimal discriminator:
// E_q[-ln D*(x)].
inline double approx_jsd_objective(const DiscreteDist& p, const DiscreteDist& q) {
  const DiscriminatorFn d = optimal_discriminator(p, q);
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] == 0.0) continue;
    acc += q[i] * (-std::log(clamp_unit(d[i])));
  }
  return acc;
}

// One row of the two-point divergence sweep: p = (a, 1-a) vs q = (1-a, a).
struct SweepRow {
  double a = 0.0;
  double kl_pq = 0.0;
  double jd = 0.0;
  double jsd_pq = 0.0;
  double gjsd_pq = 0.0;
  double approx = 0.0;
};

inline SweepRow sweep_row(double a) {
  if (!(a >= 0.0 && a <= 1.0)) throw std::invalid_argument("sweep_row: a must be within [0, 1]");
  const DiscreteDist p({a, 1.0 - a});
  const DiscreteDist q({1.0 - a, a});
  SweepRow row;
  row.a = a;
  row.kl_pq = kl(p, q);
  row.jd = (std::isinf(row.kl_pq)) ? std::numeric_limits<double>::infinity() : jeffreys(p, q);
  row.jsd_pq = jsd(p, q);
  row.gjsd_pq = (a == 0.0 || a == 1.0) ? std::numeric_limits<double>::infinity() : gjsd(p, q);
  row.approx = approx_jsd_objective(p, q);
  return row;
}

// n_points rows with a linearly spaced over [0, 1] inclusive.
inline std::vector<SweepRow> divergence_sweep(int n_points = 100) {
  if (n_points < 2) throw std::invalid_argument("divergence_sweep: n_points must be >= 2");
  std::vector<SweepRow> rows;
  rows.reserve(n_points);
  for (int i = 0; i < n_points; ++i)
    rows.push_back(sweep_row(static_cast<double>(i) / static_cast<double>(n_points - 1)));
  return rows;
}

}  // namespace sdlab

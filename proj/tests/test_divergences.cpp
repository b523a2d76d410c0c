#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sdlab/divergences.hpp"
#include "sdlab/rng.hpp"

using namespace sdlab;

namespace {

DiscreteDist random_dist(Rng& rng, std::size_t n, double floor = 1e-3) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (double& x : p) {
    x = floor + rng.uniform();
    sum += x;
  }
  for (double& x : p) x /= sum;
  // renormalize exactly enough for the 1e-12 sum invariant
  double s2 = 0.0;
  for (double x : p) s2 += x;
  p.back() += 1.0 - s2;
  return DiscreteDist(p);
}

}  // namespace

TEST_CASE("DiscreteDist validates mass") {
  REQUIRE_THROWS_AS(DiscreteDist({0.5, 0.6}), std::invalid_argument);
  REQUIRE_THROWS_AS(DiscreteDist({-0.1, 1.1}), std::invalid_argument);
  REQUIRE_NOTHROW(DiscreteDist({0.25, 0.75}));
}

TEST_CASE("kl: identity, hand-summed value, single surviving term") {
  const DiscreteDist p({0.5, 0.5});
  const DiscreteDist q({0.25, 0.75});
  REQUIRE(kl(p, p) == 0.0);
  const double expected = 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0);
  REQUIRE(kl(p, q) == Catch::Approx(expected).margin(1e-15));
  REQUIRE(kl(DiscreteDist({1.0, 0.0}), DiscreteDist({0.5, 0.5})) ==
          Catch::Approx(std::log(2.0)).margin(1e-15));
}

TEST_CASE("kl: zero q mass under positive p mass diverges") {
  REQUIRE(std::isinf(kl(DiscreteDist({0.5, 0.5}), DiscreteDist({1.0, 0.0}))));
  REQUIRE_THROWS_AS(kl(DiscreteDist({1.0}), DiscreteDist({0.5, 0.5})), std::invalid_argument);
}

TEST_CASE("jeffreys: identity, symmetry, hand-summed value") {
  const DiscreteDist p({0.5, 0.5});
  const DiscreteDist q({0.25, 0.75});
  REQUIRE(jeffreys(p, p) == 0.0);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const DiscreteDist a = random_dist(rng, 2 + rng.uniform_int(6));
    const DiscreteDist b = random_dist(rng, a.size());
    REQUIRE(jeffreys(a, b) == Catch::Approx(jeffreys(b, a)).margin(1e-13));
  }
  const double fwd = 0.5 * std::log(0.5 / 0.25) + 0.5 * std::log(0.5 / 0.75);
  const double rev = 0.25 * std::log(0.25 / 0.5) + 0.75 * std::log(0.75 / 0.5);
  REQUIRE(jeffreys(p, q) == Catch::Approx(fwd + rev).margin(1e-15));
  REQUIRE(jeffreys(p, q) == Catch::Approx(0.27465).margin(1e-5));
}

TEST_CASE("jsd: identity, disjoint bound, brute-force mixture oracle") {
  const DiscreteDist p({0.5, 0.5});
  const DiscreteDist q({0.25, 0.75});
  REQUIRE(jsd(p, p) == 0.0);
  REQUIRE(jsd(DiscreteDist({1.0, 0.0}), DiscreteDist({0.0, 1.0})) ==
          Catch::Approx(std::log(2.0)).margin(1e-15));
  // independent summation straight from the definition
  double expected = 0.0;
  for (int i = 0; i < 2; ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    expected += 0.5 * p[i] * std::log(p[i] / m) + 0.5 * q[i] * std::log(q[i] / m);
  }
  REQUIRE(std::abs(jsd(p, q) - expected) <= 1e-12);
}

TEST_CASE("gjsd: identity, symmetry, upper-bounds jsd on random pairs") {
  Rng rng(5);
  const DiscreteDist p = random_dist(rng, 5);
  REQUIRE(gjsd(p, p) == Catch::Approx(0.0).margin(1e-14));
  for (int i = 0; i < 1000; ++i) {
    const DiscreteDist a = random_dist(rng, 2 + rng.uniform_int(8));
    const DiscreteDist b = random_dist(rng, a.size());
    const double g = gjsd(a, b);
    REQUIRE(g == Catch::Approx(gjsd(b, a)).margin(1e-12));
    REQUIRE(g >= jsd(a, b) - 1e-12);
  }
}

TEST_CASE("gjsd rejects fully disjoint supports") {
  REQUIRE_THROWS_AS(gjsd(DiscreteDist({1.0, 0.0}), DiscreteDist({0.0, 1.0})), std::domain_error);
}

TEST_CASE("gan_value: constant half discriminator scores -ln 4") {
  Rng rng(6);
  const DiscreteDist p = random_dist(rng, 4);
  const DiscreteDist q = random_dist(rng, 4);
  DiscriminatorFn half;
  half.values.assign(4, 0.5);
  REQUIRE(gan_value(p, q, half) == Catch::Approx(-std::log(4.0)).margin(1e-12));
}

TEST_CASE("gan_value at the optimal discriminator with p = q") {
  const DiscreteDist p({0.3, 0.25, 0.45});
  const DiscriminatorFn d = optimal_discriminator(p, p);
  for (double v : d.values) REQUIRE(v == 0.5);
  REQUIRE(gan_value(p, p, d) == Catch::Approx(-std::log(4.0)).margin(1e-12));
  REQUIRE(jsd(p, p) == 0.0);
}

TEST_CASE("gan/jsd identity: V(D*) = KL(p||m) + KL(q||m) - ln 4") {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_int(9);
    const DiscreteDist p = random_dist(rng, n);
    const DiscreteDist q = random_dist(rng, n);
    std::vector<double> mix(n);
    for (std::size_t j = 0; j < n; ++j) mix[j] = 0.5 * (p[j] + q[j]);
    const DiscreteDist m(mix);
    const double lhs = gan_value(p, q, optimal_discriminator(p, q));
    const double rhs = kl(p, m) + kl(q, m) - std::log(4.0);
    REQUIRE(std::abs(lhs - rhs) <= 1e-9);
  }
}

TEST_CASE("optimal discriminator: clamped extremes and maximality") {
  const DiscriminatorFn d =
      optimal_discriminator(DiscreteDist({1.0, 0.0}), DiscreteDist({0.0, 1.0}));
  REQUIRE(d.values[0] == 1.0 - DiscriminatorFn::kClamp);
  REQUIRE(d.values[1] == DiscriminatorFn::kClamp);

  Rng rng(8);
  const DiscreteDist p = random_dist(rng, 6);
  const DiscreteDist q = random_dist(rng, 6);
  const DiscriminatorFn best = optimal_discriminator(p, q);
  const double v_best = gan_value(p, q, best);
  for (int i = 0; i < 200; ++i) {
    DiscriminatorFn perturbed = best;
    for (double& v : perturbed.values) v = clamp_unit(v + 0.2 * rng.normal());
    REQUIRE(gan_value(p, q, perturbed) <= v_best + 1e-12);
  }
}

TEST_CASE("approximated jsd objective: p = q gives ln 2") {
  Rng rng(9);
  const DiscreteDist p = random_dist(rng, 5);
  REQUIRE(approx_jsd_objective(p, p) == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("approximated jsd objective is minimized at a = 1/2 on the sweep family") {
  double best_a = -1.0;
  double best_v = 1e300;
  for (int i = 0; i <= 1000; ++i) {
    const double a = i / 1000.0;
    const double v = sweep_row(a).approx;
    if (v < best_v) {
      best_v = v;
      best_a = a;
    }
  }
  REQUIRE(best_a == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(std::abs(sweep_row(0.5).approx - std::log(2.0)) <= 1e-12);
}

TEST_CASE("sweep row at a = 1/2: every divergence vanishes, approx = ln 2") {
  const SweepRow r = sweep_row(0.5);
  REQUIRE(r.kl_pq == 0.0);
  REQUIRE(r.jd == 0.0);
  REQUIRE(r.jsd_pq == 0.0);
  REQUIRE(r.gjsd_pq == 0.0);
  REQUIRE(std::abs(r.approx - std::log(2.0)) <= 1e-12);
}

TEST_CASE("divergence sweep: bounds and sentinels over the default grid") {
  const auto rows = divergence_sweep(100);
  REQUIRE(rows.size() == 100);
  REQUIRE(std::isinf(rows.front().kl_pq));
  REQUIRE(std::isinf(rows.front().jd));
  REQUIRE(std::isinf(rows.back().kl_pq));
  for (const SweepRow& r : rows) {
    REQUIRE(r.jsd_pq <= std::log(2.0) + 1e-12);
    if (std::isfinite(r.kl_pq)) {
      REQUIRE(r.jsd_pq <= r.kl_pq + 1e-12);
      REQUIRE(r.jsd_pq <= r.jd + 1e-12);
    }
    if (std::isfinite(r.gjsd_pq)) REQUIRE(r.gjsd_pq >= r.jsd_pq - 1e-12);
  }
}

TEST_CASE("nonnegativity and the jsd bound chain on random pairs") {
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_int(6);
    const DiscreteDist p = random_dist(rng, n);
    const DiscreteDist q = random_dist(rng, n);
    const double j = jsd(p, q);
    REQUIRE(kl(p, q) >= -1e-15);
    REQUIRE(jeffreys(p, q) >= -1e-15);
    REQUIRE(j >= -1e-15);
    REQUIRE(gjsd(p, q) >= -1e-12);
    REQUIRE(j == Catch::Approx(jsd(q, p)).margin(1e-14));
    REQUIRE(j <= 0.25 * jeffreys(p, q) + 1e-12);
    REQUIRE(j <= std::log(2.0) + 1e-12);
  }
}

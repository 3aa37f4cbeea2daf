#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "latentdyad/latent_space.hpp"
#include "support/oracles.hpp"

using namespace latentdyad;
using std::numbers::pi;

TEST_CASE("sample_angles: ranges and means") {
  Rng rng(1);
  CHECK_THROWS_AS(sample_angles(1, rng), std::invalid_argument);
  const int n = 100000;
  double m1 = 0.0, m2 = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto a2 = sample_angles(2, rng);
    REQUIRE(a2.size() == 1);
    REQUIRE(a2[0] >= 0.0);
    REQUIRE(a2[0] < 2 * pi);
    m1 += a2[0];
    const auto a3 = sample_angles(3, rng);
    REQUIRE(a3.size() == 2);
    REQUIRE(a3[1] > 0.0);
    REQUIRE(a3[1] < pi);
    m2 += a3[1];
  }
  CHECK(std::fabs(m1 / n - pi) < 0.02);
  CHECK(std::fabs(m2 / n - pi / 2) < 0.02);
}

TEST_CASE("D=4 directions match normalized Gaussians") {
  Rng rng(2);
  const int n = 100000;
  std::normal_distribution<double> z(0.0, 1.0);
  double mean[4] = {}, sq[4] = {}, omean[4] = {}, osq[4] = {};
  for (int t = 0; t < n; ++t) {
    const auto u = spherical_to_cartesian({1.0, sample_angles(4, rng)});
    double g[4], norm = 0.0;
    for (double& x : g) {
      x = z(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < 4; ++c) {
      mean[c] += u[c];
      sq[c] += u[c] * u[c];
      omean[c] += g[c] / norm;
      osq[c] += g[c] * g[c] / (norm * norm);
    }
  }
  for (int c = 0; c < 4; ++c) {
    CHECK(std::fabs(mean[c] / n) < 0.01);
    CHECK(std::fabs(sq[c] / n - 0.25) < 0.01);
    CHECK(std::fabs(mean[c] / n - omean[c] / n) < 0.01);
    CHECK(std::fabs(sq[c] / n - osq[c] / n) < 0.01);
  }
}

TEST_CASE("sample_radius has mean one") {
  Rng rng(3);
  CHECK_THROWS_AS(sample_radius(0.0, rng), std::invalid_argument);
  for (double kappa : {1.0, 2.0, 5.0}) {
    double s = 0.0;
    const int n = 100000;
    for (int t = 0; t < n; ++t) s += sample_radius(kappa, rng);
    CHECK(std::fabs(s / n - 1.0) < 0.01);
  }
}

TEST_CASE("radius_density closed form") {
  CHECK(radius_density(0.0, 1.0) == doctest::Approx(1.0));
  CHECK(radius_density(2.0, 1.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(radius_density(2.0, 1.0) == doctest::Approx(0.13534).epsilon(1e-4));
  CHECK_THROWS_AS(radius_density(-1.0, 1.0), std::invalid_argument);
  // kappa = 2 is the half-normal with mean 1: sigma = sqrt(pi/2).
  const double sigma = std::sqrt(pi / 2);
  for (double rho : {0.0, 0.3, 1.0, 2.5}) {
    const double half_normal = std::sqrt(2.0 / pi) / sigma * std::exp(-rho * rho / (2 * sigma * sigma));
    CHECK(radius_density(rho, 2.0) == doctest::Approx(half_normal).epsilon(1e-12));
    CHECK(log_radius_density(rho, 2.0) == doctest::Approx(std::log(half_normal)).epsilon(1e-12));
  }
  for (double kappa : {0.7, 1.0, 2.0, 5.0}) {
    // Simpson on [0, 40].
    const int steps = 200000;
    const double h = 40.0 / steps;
    double s = radius_density(0.0, kappa) + radius_density(40.0, kappa);
    for (int t = 1; t < steps; ++t) s += (t % 2 ? 4.0 : 2.0) * radius_density(t * h, kappa);
    CHECK(std::fabs(s * h / 3.0 - 1.0) < 1e-6);
  }
}

TEST_CASE("sample_radius passes KS against its density") {
  Rng rng(4);
  for (double kappa : {1.0, 2.0, 5.0}) {
    std::vector<double> draws(20000);
    for (auto& x : draws) x = sample_radius(kappa, rng);
    const oracle::NumericCdf cdf([kappa](double r) { return radius_density(r, kappa); }, 30.0);
    const double d = oracle::ks_statistic(draws, [&](double x) { return cdf(x); });
    CHECK(oracle::ks_pvalue(d, draws.size()) > 0.01);
  }
}

TEST_CASE("spherical_to_cartesian") {
  auto c = spherical_to_cartesian({1.0, {0.0}});
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(0.0));
  c = spherical_to_cartesian({2.0, {pi / 2}});
  CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c[1] == doctest::Approx(2.0));
  c = spherical_to_cartesian({1.0, {pi / 2, pi / 2}});
  REQUIRE(c.dim() == 3);
  CHECK(std::fabs(c[0]) < 1e-12);
  CHECK(std::fabs(c[1]) < 1e-12);
  CHECK(c[2] == doctest::Approx(1.0));

  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t dim = 2 + t % 5;
    SphericalCoordinate s{5.0 * u(rng), {}};
    s.angles.push_back(2 * pi * u(rng));
    for (std::size_t j = 1; j + 1 < dim; ++j) s.angles.push_back(pi * u(rng));
    const auto z = spherical_to_cartesian(s);
    CHECK(z.dim() == dim);
    CHECK(std::fabs(z.norm() - s.rho) <= 1e-12 * std::max(1.0, s.rho));
  }
}

TEST_CASE("sample_h0: mean norm one, centred, half-normal radius at kappa 2") {
  Rng rng(6);
  const int n = 100000;
  double norm = 0.0, x = 0.0, y = 0.0;
  std::vector<double> radii;
  for (int t = 0; t < n; ++t) {
    const auto z = sample_h0(2.0, 2, rng);
    norm += z.norm();
    x += z[0];
    y += z[1];
    if (t < 20000) radii.push_back(z.norm());
  }
  CHECK(std::fabs(norm / n - 1.0) < 0.01);
  CHECK(std::fabs(x / n) < 0.01);
  CHECK(std::fabs(y / n) < 0.01);
  // Oracle: bivariate standard normal projected to radius |N(0,1)| * sqrt(pi/2)
  // has the same radial law; compare by KS against the half-normal CDF.
  const double sigma = std::sqrt(pi / 2);
  const double d = oracle::ks_statistic(radii, [&](double r) { return std::erf(r / (sigma * std::sqrt(2.0))); });
  CHECK(oracle::ks_pvalue(d, radii.size()) > 0.01);
}

TEST_CASE("latent_distance") {
  CHECK(latent_distance({1.0, 2.0}, {1.0, 2.0}) == 0.0);
  CHECK(latent_distance({0.0, 0.0}, {3.0, 4.0}) == doctest::Approx(5.0));
  CHECK_THROWS_AS(latent_distance({0.0, 0.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto a = sample_h0(2.0, 3, rng), b = sample_h0(2.0, 3, rng);
    CHECK(latent_distance(a, b) == latent_distance(b, a));
  }
}

TEST_CASE("crp_simulate") {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) CHECK(crp_simulate(3.0, 1, rng) == 1);
  int ones = 0;
  for (int t = 0; t < 100; ++t) ones += crp_simulate(1e-9, 100, rng) == 1;
  CHECK(ones == 100);
  double s = 0.0;
  for (int t = 0; t < 500; ++t) s += static_cast<double>(crp_simulate(20.0, 4781, rng));
  CHECK(std::fabs(s / 500 - 109.6) / 109.6 < 0.05);
}

TEST_CASE("expected_mass_points") {
  CHECK(expected_mass_points(0.5, 4781) == doctest::Approx(4.583).epsilon(1e-3));
  CHECK(expected_mass_points(20.0, 4781) == doctest::Approx(109.62).epsilon(1e-4));
  CHECK(expected_mass_points(300.0, 4781) == doctest::Approx(848.9).epsilon(1e-4));
  for (double alpha : {0.5, 20.0, 300.0}) {
    for (std::size_t n : {1u, 100u, 4781u}) {
      CHECK(expected_mass_points_exact(alpha, n) == doctest::Approx(oracle::crp_expected_k(alpha, n)).epsilon(1e-10));
    }
  }
}

TEST_CASE("ClusterTable remove and assign") {
  ClusterTable t = ClusterTable::singletons({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}});
  CHECK(t.k() == 3);
  CHECK(t.remove(0));
  CHECK(t.k() == 2);
  t.assign(0, t.site_of(1));
  CHECK(t.k() == 2);
  CHECK(t.occupancy(t.site_of(1)) == 2);
  CHECK_FALSE(t.remove(0));
  CHECK(t.k() == 2);
  CHECK(t.occupancy(t.site_of(1)) == 1);
  const auto k_before = t.k();
  t.assign_new(0, {5.0, 5.0});
  CHECK(t.k() == k_before + 1);
  CHECK(t.occupancy(t.site_of(0)) == 1);
  t.remove(0);
  CHECK_THROWS_AS(t.assign(0, 17), std::out_of_range);
  t.check_invariants();
}

TEST_CASE("ClusterTable occupancy is conserved under random operations") {
  Rng rng(10);
  const std::size_t n = 30;
  std::vector<LatentCoordinate> start;
  for (std::size_t i = 0; i < n; ++i) start.push_back(sample_h0(2.0, 2, rng));
  ClusterTable t = ClusterTable::singletons(start);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::bernoulli_distribution fresh(0.2);
  for (int step = 0; step < 5000; ++step) {
    const auto i = pick(rng);
    t.remove(i);
    if (fresh(rng) || t.k() == 0) {
      t.assign_new(i, sample_h0(2.0, 2, rng));
    } else {
      t.assign(i, std::uniform_int_distribution<std::size_t>(0, t.k() - 1)(rng));
    }
    std::size_t total = 0;
    for (std::size_t s = 0; s < t.k(); ++s) {
      REQUIRE(t.occupancy(s) >= 1);
      total += t.occupancy(s);
    }
    REQUIRE(total == n);
  }
  t.check_invariants();
}

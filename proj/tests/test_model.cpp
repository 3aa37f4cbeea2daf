#include <doctest.h>

#include <cmath>
#include <random>

#include "latentdyad/model.hpp"
#include "support/oracles.hpp"

using namespace latentdyad;

namespace {

PopulationParams params_of(ModelVariant variant, LinkCoefficients c, double v) {
  PopulationParams p;
  p.variant = variant;
  p.coefficients = c;
  p.v = v;
  return p;
}

ClusterTable random_clusters(std::size_t n, std::size_t k, Rng& rng) {
  ClusterTable t(n, 2);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<std::size_t> label(n);
  std::vector<std::size_t> site_of_label(k, ClusterTable::kUnassigned);
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = pick(rng);
    if (site_of_label[l] == ClusterTable::kUnassigned) {
      site_of_label[l] = t.assign_new(i, sample_h0(2.0, 2, rng));
    } else {
      t.assign(i, site_of_label[l]);
    }
  }
  return t;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (auto v : {ModelVariant::Baseline, ModelVariant::Hmcr, ModelVariant::Full}) {
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("fancy"), std::invalid_argument);
}

TEST_CASE("link_p") {
  LinkCoefficients c{0, 1, 1, 0, 1, 2};
  CHECK(link_p(0.0, c) == doctest::Approx(0.5));
  CHECK(link_p(2.0, c) == doctest::Approx(0.11920).epsilon(1e-4));
  CHECK(link_p(2.0, c) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-14));
  LinkCoefficients flat{0.7, 0, 1, 0, 0, 1};
  CHECK(link_p(0.0, flat) == link_p(3.0, flat));
  CHECK_THROWS_AS(link_p(-0.1, c), std::invalid_argument);
}

TEST_CASE("link_mu") {
  LinkCoefficients c{0, 1, 1, 0, 1, 2};
  CHECK(link_mu(0.0, c) == doctest::Approx(1.0));
  CHECK(link_mu(1.0, c) == doctest::Approx(0.36788).epsilon(1e-4));
  CHECK(link_mu(2.0, c) == doctest::Approx(0.018316).epsilon(1e-4));
  CHECK_THROWS_AS(link_mu(-1.0, c), std::invalid_argument);
}

TEST_CASE("links are nonincreasing in distance") {
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 3.0), b1(-3.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    LinkCoefficients c{b1(rng), u(rng), u(rng), b1(rng), u(rng), u(rng)};
    double prev_p = 2.0, prev_mu = 1e300;
    for (double d = 0.0; d <= 5.0; d += 0.05) {
      const double p = link_p(d, c), mu = link_mu(d, c);
      CHECK(p <= prev_p);
      CHECK(mu <= prev_mu);
      prev_p = p;
      prev_mu = mu;
    }
  }
}

TEST_CASE("dyad_params by variant") {
  LinkCoefficients c{0, 1, 1, 0, 1, 2};
  const auto full = params_of(ModelVariant::Full, c, 1.0);
  const auto d0 = dyad_params(0.0, full), d2 = dyad_params(2.0, full);
  CHECK(d0.p == doctest::Approx(0.5));
  CHECK(d2.p == doctest::Approx(0.11920).epsilon(1e-4));
  CHECK(d0.mu == doctest::Approx(1.0));
  CHECK(d2.mu == doctest::Approx(0.018316).epsilon(1e-4));
  CHECK(d2.r == doctest::Approx(d2.mu * d2.mu));
  CHECK(d2.a == doctest::Approx(d2.mu));

  const auto base = params_of(ModelVariant::Baseline, c, 1.0);
  CHECK(dyad_params(0.0, base).p == dyad_params(4.0, base).p);
  CHECK(dyad_params(0.0, base).mu == dyad_params(4.0, base).mu);

  const auto hmcr = params_of(ModelVariant::Hmcr, c, 1.0);
  CHECK(dyad_params(0.0, hmcr).p > dyad_params(4.0, hmcr).p);
  CHECK(dyad_params(0.0, hmcr).mu == dyad_params(4.0, hmcr).mu);
}

TEST_CASE("marginal_loglik hand values") {
  CHECK(marginal_loglik(0, 26.0, 0.0, 1.0, 1.0) == 0.0);
  CHECK(std::exp(marginal_loglik(0, 26.0, 0.5, 1.0, 1.0)) == doctest::Approx(0.518519).epsilon(1e-6));
  CHECK(std::exp(marginal_loglik(2, 26.0, 0.5, 1.0, 1.0)) == doctest::Approx(5.0805e-5).epsilon(1e-4));
  CHECK(marginal_loglik(3, 26.0, 0.0, 1.0, 1.0) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(marginal_loglik(0, 0.0, 0.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(marginal_loglik(0, 26.0, 1.5, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(marginal_loglik(0, 26.0, 0.5, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("marginal_loglik matches the direct formula") {
  Rng rng(2);
  std::uniform_real_distribution<double> p(0.01, 0.99), mu(0.05, 5.0), v(0.1, 10.0), T(1.0, 52.0);
  std::uniform_int_distribution<std::uint32_t> y(0, 200);
  for (int t = 0; t < 2000; ++t) {
    const double pp = p(rng), mm = mu(rng), vv = v(rng), tt = T(rng);
    const auto yy = y(rng);
    CHECK(marginal_loglik(yy, tt, pp, mm, vv) ==
          doctest::Approx(oracle::loglik(yy, tt, pp, mm, vv)).epsilon(1e-11));
  }
}

TEST_CASE("marginal_loglik limits") {
  // p = 1 leaves the negative-binomial form.
  const double r = 4.0, a = 2.0;
  const double mu = r / a, v = mu / a;
  const double nb = std::lgamma(r + 3) - std::lgamma(r) + r * std::log(a / (a + 10.0)) - 3 * std::log(a + 10.0);
  CHECK(marginal_loglik(3, 10.0, 1.0, mu, v) == doctest::Approx(nb).epsilon(1e-12));
  // v -> 0 approaches the Poisson(mu T) kernel mu^y exp(-mu T).
  for (std::uint32_t y : {0u, 1u, 5u}) {
    const double lim = y * std::log(1.3) - 1.3 * 2.0;
    CHECK(std::fabs(marginal_loglik(y, 2.0, 1.0, 1.3, 1e-6) - lim) < 1e-4);
  }
}

TEST_CASE("aggregated_loglik: single site, no contacts") {
  ClusterTable c(3, 2);
  const auto s = c.assign_new(0, {0.1, 0.2});
  c.assign(1, s);
  c.assign(2, s);
  const DyadTable t(3, {0, 26});
  const auto params = params_of(ModelVariant::Full, {0.3, 1, 1, -0.5, 1, 1}, 2.0);
  const auto total = aggregated_loglik(t, c, params);
  CHECK(total.evaluations() == 1);
  CHECK(total.empty_evaluations == 1);
  CHECK(total.loglik == doctest::Approx(3.0 * marginal_loglik(0, 26.0, dyad_params(0.0, params))));
}

TEST_CASE("aggregated_loglik equals the brute-force sum") {
  Rng rng(3);
  std::uniform_real_distribution<double> b1(-2.0, 2.0), b(0.2, 2.0), v(0.2, 5.0);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t n = 50;
    const auto clusters = random_clusters(n, 1 + rep % 8, rng);
    DyadTable table(n, {0, 26});
    std::bernoulli_distribution edge(0.1);
    std::uniform_int_distribution<std::uint32_t> y(1, 30);
    for (IndividualId i = 0; i < n; ++i) {
      for (IndividualId j = i + 1; j < n; ++j) {
        if (edge(rng)) table.add_contacts({i, j}, y(rng));
      }
    }
    for (auto variant : {ModelVariant::Baseline, ModelVariant::Hmcr, ModelVariant::Full}) {
      const auto params = params_of(variant, {b1(rng), b(rng), b(rng), b1(rng), b(rng), b(rng)}, v(rng));
      const auto total = aggregated_loglik(table, clusters, params);
      const double brute = oracle::brute_force_loglik(table, clusters, params);
      CHECK(std::fabs(total.loglik - brute) <= 1e-9 * std::fabs(brute));
      CHECK(total.evaluations() <= evaluation_bound(clusters.k(), table.n_nonempty()));
      CHECK(total.nonempty_evaluations == table.n_nonempty());
    }
  }
}

TEST_CASE("aggregated_loglik rejects inconsistent inputs") {
  ClusterTable c(3, 2);
  c.assign_new(0, {0.0, 0.0});
  const DyadTable t(3, {0, 26});
  CHECK_THROWS_AS(aggregated_loglik(t, c, PopulationParams{}), std::invalid_argument);
  const DyadTable t4(4, {0, 26});
  CHECK_THROWS_AS(aggregated_loglik(t4, c, PopulationParams{}), std::invalid_argument);
}

TEST_CASE("evaluation_bound") {
  CHECK(evaluation_bound(530, 12617) == 152803);
  CHECK(evaluation_bound(530, 0) == 140186);
  CHECK(evaluation_bound(10, 40) == 86);
}

TEST_CASE("prob_nonempty_future") {
  const auto dp = DyadParams::from_values(0.5, 1.0, 1.0);
  CHECK(prob_nonempty_future(26.0, 26.0, dp) == doctest::Approx(0.017520).epsilon(1e-4));
  CHECK(prob_nonempty_future(26.0, 26.0, dp) == doctest::Approx((0.5 / 27 / (0.5 + 0.5 / 27)) * (1.0 - 27.0 / 53.0)));
  CHECK(prob_nonempty_future(26.0, 26.0, DyadParams::from_values(0.0, 1.0, 1.0)) == 0.0);
  CHECK(prob_nonempty_future(26.0, 0.0, dp) == 0.0);
  CHECK_THROWS_AS(prob_nonempty_future(26.0, -1.0, dp), std::invalid_argument);
  Rng rng(4);
  std::uniform_real_distribution<double> p(0.0, 1.0), mu(0.01, 5.0), v(0.1, 5.0);
  for (int t = 0; t < 200; ++t) {
    const auto d = DyadParams::from_values(p(rng), mu(rng), v(rng));
    double prev = 0.0;
    for (double h = 0.0; h <= 100.0; h += 5.0) {
      const double x = prob_nonempty_future(26.0, h, d);
      CHECK(x >= prev);
      CHECK(x <= 1.0);
      prev = x;
    }
  }
}

TEST_CASE("simulate_network: degenerate cases") {
  Rng rng(5);
  ClusterTable c = ClusterTable::singletons({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {2.0, 2.0}});
  auto closed = params_of(ModelVariant::Baseline, {-1e4, 0, 1, 0, 0, 1}, 1.0);
  CHECK(simulate_network(c, closed, 26, rng).n_nonempty() == 0);
  auto busy = params_of(ModelVariant::Baseline, {1e4, 0, 1, std::log(50.0), 0, 1}, 0.01);
  CHECK(simulate_network(c, busy, 26, rng).n_nonempty() == 6);
  CHECK_THROWS_AS(simulate_network(c, busy, 0, rng), std::invalid_argument);
}

TEST_CASE("simulate_network: expected nonempty count") {
  Rng rng(6);
  const auto clusters = random_clusters(40, 4, rng);
  const auto params = params_of(ModelVariant::Full, {0.5, 1.0, 1.0, -1.0, 0.5, 1.0}, 1.5);
  const int T = 10;
  double expected = 0.0, var = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = i + 1; j < 40; ++j) {
      const auto d = oracle::dyad(oracle::euclid(clusters.coordinate_of(i), clusters.coordinate_of(j)), params);
      const double r = d.mu * d.mu / params.v, a = d.mu / params.v;
      const double q = d.p * (1.0 - std::pow(a / (a + T), r));
      expected += q;
      var += q * (1 - q);
    }
  }
  std::vector<double> counts;
  for (int rep = 0; rep < 200; ++rep) counts.push_back(static_cast<double>(simulate_network(clusters, params, T, rng).n_nonempty()));
  const double se = std::sqrt(var / 200.0);
  CHECK(std::fabs(oracle::mean(counts) - expected) < 3.0 * se);
}

TEST_CASE("generating parameters fit simulated data better than perturbed ones") {
  Rng rng(7);
  const auto clusters = random_clusters(60, 5, rng);
  const auto truth = params_of(ModelVariant::Full, {0.5, 1.0, 1.0, 0.0, 0.8, 1.0}, 1.0);
  auto off = truth;
  off.coefficients.beta1p += 1.0;
  off.coefficients.beta2mu *= 2.0;
  double better = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto table = simulate_network(clusters, truth, 26, rng);
    better += aggregated_loglik(table, clusters, truth).loglik - aggregated_loglik(table, clusters, off).loglik;
  }
  CHECK(better > 0.0);
}

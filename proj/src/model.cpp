#include "latentdyad/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace latentdyad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double log_add(double x, double y) {
  if (x == kNegInf) return y;
  if (y == kNegInf) return x;
  const double hi = std::max(x, y), lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

// coefficient * d^exponent, with a zero coefficient never producing NaN.
double distance_term(double d, double coefficient, double exponent) {
  if (d < 0.0 || std::isnan(d)) throw std::invalid_argument("latent distance must be nonnegative");
  if (coefficient == 0.0) return 0.0;
  return coefficient * std::pow(d, exponent);
}

// r * log(a / (a + T)): the log probability that an open dyad stays empty.
double log_open_empty(double r, double a, double duration) {
  if (r == 0.0) return 0.0;
  if (a == 0.0) return kNegInf;
  return -r * std::log1p(duration / a);
}

// log Gamma(r + y) - log Gamma(r)
double log_rising_factorial(double r, std::uint32_t y) {
  if (y <= 64) {
    double s = 0.0;
    for (std::uint32_t k = 0; k < y; ++k) s += std::log(r + k);
    return s;
  }
  return std::lgamma(r + y) - std::lgamma(r);
}

struct ClassKey {
  std::uint32_t a, b;  // a < b; same-site pairs use the shared zero class instead
  auto operator<=>(const ClassKey&) const = default;
};

}  // namespace

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::Baseline: return "baseline";
    case ModelVariant::Hmcr: return "hmcr";
    case ModelVariant::Full: return "full";
  }
  return "unknown";
}

ModelVariant parse_variant(std::string_view name) {
  if (name == "baseline") return ModelVariant::Baseline;
  if (name == "hmcr") return ModelVariant::Hmcr;
  if (name == "full") return ModelVariant::Full;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

DyadParams DyadParams::from_logit(double logit_p, double log_mu, double v) {
  if (!(v > 0.0)) throw std::invalid_argument("gamma variance must be positive");
  DyadParams dp;
  dp.log_p = -softplus(-logit_p);
  dp.log_q = -softplus(logit_p);
  dp.p = std::exp(dp.log_p);
  dp.mu = std::exp(log_mu);
  const double log_v = std::log(v);
  dp.r = std::exp(2.0 * log_mu - log_v);
  dp.a = std::exp(log_mu - log_v);
  return dp;
}

DyadParams DyadParams::from_values(double p, double mu, double v) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("open probability outside [0, 1]");
  if (!(mu > 0.0)) throw std::invalid_argument("mean contact rate must be positive");
  if (!(v > 0.0)) throw std::invalid_argument("gamma variance must be positive");
  DyadParams dp;
  dp.p = p;
  dp.log_p = p == 0.0 ? kNegInf : std::log(p);
  dp.log_q = p == 1.0 ? kNegInf : std::log1p(-p);
  dp.mu = mu;
  dp.r = mu * mu / v;
  dp.a = mu / v;
  return dp;
}

double link_p(double d, const LinkCoefficients& c) {
  const double x = c.beta1p - distance_term(d, c.beta2p, c.beta3p);
  return std::exp(-softplus(-x));
}

double link_mu(double d, const LinkCoefficients& c) {
  return std::exp(c.beta1mu - distance_term(d, c.beta2mu, c.beta3mu));
}

DyadParams dyad_params(double d, const PopulationParams& params) {
  const auto& c = params.coefficients;
  double logit = c.beta1p;
  double log_mu = c.beta1mu;
  if (params.variant != ModelVariant::Baseline) logit -= distance_term(d, c.beta2p, c.beta3p);
  if (params.variant == ModelVariant::Full) log_mu -= distance_term(d, c.beta2mu, c.beta3mu);
  return DyadParams::from_logit(logit, log_mu, params.v);
}

double marginal_loglik(std::uint32_t y_star, double duration, const DyadParams& dp) {
  if (!(duration > 0.0)) throw std::invalid_argument("observation duration must be positive");
  if (!(dp.r >= 0.0) || !(dp.a >= 0.0) || std::isnan(dp.log_p) || std::isnan(dp.log_q)) {
    throw std::invalid_argument("invalid dyad parameters");
  }
  const double stay_empty = log_open_empty(dp.r, dp.a, duration);
  if (y_star == 0) return log_add(dp.log_q, dp.log_p + stay_empty);
  if (dp.log_p == kNegInf || dp.r == 0.0) return kNegInf;
  return dp.log_p + log_rising_factorial(dp.r, y_star) + stay_empty -
         static_cast<double>(y_star) * std::log(dp.a + duration);
}

double marginal_loglik(std::uint32_t y_star, double duration, double p, double mu, double v) {
  return marginal_loglik(y_star, duration, DyadParams::from_values(p, mu, v));
}

LikelihoodTotal aggregated_loglik(const DyadTable& table, const ClusterTable& clusters,
                                  const PopulationParams& params) {
  if (clusters.n_individuals() != table.n_individuals()) {
    throw std::invalid_argument("cluster table and dyad table disagree on N");
  }
  if (clusters.n_assigned() != clusters.n_individuals()) {
    throw std::invalid_argument("cluster table has unassigned individuals");
  }
  const double duration = table.duration();
  LikelihoodTotal total;

  // Nonempty dyads: one evaluation each, tallied into their distance class.
  std::uint64_t nonempty_same_site = 0;
  std::vector<ClassKey> nonempty_classes;
  nonempty_classes.reserve(table.n_nonempty());
  for (const auto& [key, y] : table.nonempty()) {
    const auto sa = static_cast<std::uint32_t>(clusters.site_of(key.i));
    const auto sb = static_cast<std::uint32_t>(clusters.site_of(key.j));
    const double d = sa == sb ? 0.0 : latent_distance(clusters.site(sa), clusters.site(sb));
    total.loglik += marginal_loglik(y, duration, dyad_params(d, params));
    ++total.nonempty_evaluations;
    if (sa == sb) {
      ++nonempty_same_site;
    } else {
      nonempty_classes.push_back({std::min(sa, sb), std::max(sa, sb)});
    }
  }
  std::sort(nonempty_classes.begin(), nonempty_classes.end());

  // Same-site class.
  std::uint64_t same_site = 0;
  for (std::size_t s = 0; s < clusters.k(); ++s) same_site += dyad_count(clusters.occupancy(s));
  if (same_site > nonempty_same_site) {
    const double l0 = marginal_loglik(0, duration, dyad_params(0.0, params));
    total.loglik += static_cast<double>(same_site - nonempty_same_site) * l0;
    ++total.empty_evaluations;
  }

  // Cross-site classes in (a, b) order, merged against the sorted nonempty tally.
  std::size_t cursor = 0;
  const auto k = static_cast<std::uint32_t>(clusters.k());
  for (std::uint32_t a = 0; a < k; ++a) {
    for (std::uint32_t b = a + 1; b < k; ++b) {
      std::uint64_t observed = 0;
      const ClassKey key{a, b};
      while (cursor < nonempty_classes.size() && nonempty_classes[cursor] == key) {
        ++observed;
        ++cursor;
      }
      const std::uint64_t all = static_cast<std::uint64_t>(clusters.occupancy(a)) * clusters.occupancy(b);
      if (all == observed) continue;
      const double d = latent_distance(clusters.site(a), clusters.site(b));
      const double l0 = marginal_loglik(0, duration, dyad_params(d, params));
      total.loglik += static_cast<double>(all - observed) * l0;
      ++total.empty_evaluations;
    }
  }
  return total;
}

std::uint64_t evaluation_bound(std::size_t k, std::size_t n_nonempty) {
  return dyad_count(k) + 1 + n_nonempty;
}

DyadTable simulate_network(const ClusterTable& clusters, const PopulationParams& params, int duration, Rng& rng) {
  if (duration <= 0) throw std::invalid_argument("simulation duration must be positive");
  const std::size_t n = clusters.n_individuals();
  DyadTable out(n, ObservationWindow{0, duration});
  const std::size_t k = clusters.k();

  // Parameters per unordered site pair, packed upper-triangular with diagonal.
  std::vector<DyadParams> by_class(k * (k + 1) / 2);
  auto index = [k](std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    return a * k - a * (a + 1) / 2 + b;
  };
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      const double d = a == b ? 0.0 : latent_distance(clusters.site(a), clusters.site(b));
      by_class[index(a, b)] = dyad_params(d, params);
    }
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto si = clusters.site_of(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const DyadParams& dp = by_class[index(si, clusters.site_of(j))];
      if (!(unit(rng) < dp.p)) continue;
      if (dp.r == 0.0 || dp.a == 0.0) continue;
      std::gamma_distribution<double> rate(dp.r, 1.0 / dp.a);
      const double mean = rate(rng) * duration;
      if (!(mean > 0.0)) continue;
      std::poisson_distribution<std::uint32_t> contacts(mean);
      const auto y = contacts(rng);
      if (y > 0) out.add_contacts(DyadKey{static_cast<IndividualId>(i), static_cast<IndividualId>(j)}, y);
    }
  }
  return out;
}

double prob_nonempty_future(double duration, double horizon, const DyadParams& dp) {
  if (!(duration > 0.0)) throw std::invalid_argument("calibration duration must be positive");
  if (horizon < 0.0 || std::isnan(horizon)) throw std::invalid_argument("horizon must be nonnegative");
  if (horizon == 0.0 || dp.log_p == kNegInf) return 0.0;
  const double stay_empty = log_open_empty(dp.r, dp.a, duration);
  const double log_open_given_empty = dp.log_p + stay_empty - log_add(dp.log_q, dp.log_p + stay_empty);
  // Rate posterior after zero contacts: gamma(r, a + T).
  const double p_contact = dp.r == 0.0 ? 0.0 : -std::expm1(-dp.r * std::log1p(horizon / (dp.a + duration)));
  return std::exp(log_open_given_empty) * p_contact;
}

}  // namespace latentdyad

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "latentdyad/dyadic_data.hpp"
#include "latentdyad/latent_space.hpp"

namespace latentdyad {

// Baseline ignores latent distance; HMCR makes only the open probability
// distance-dependent; Full makes both open probability and mean rate depend on it.
enum class ModelVariant { Baseline, Hmcr, Full };

std::string_view to_string(ModelVariant v);
ModelVariant parse_variant(std::string_view name);

struct LinkCoefficients {
  double beta1p = 0.0;
  double beta2p = 1.0;
  double beta3p = 1.0;
  double beta1mu = 0.0;
  double beta2mu = 1.0;
  double beta3mu = 1.0;
};

struct PopulationParams {
  LinkCoefficients coefficients;
  double v = 1.0;  // gamma variance of the contact rate
  ModelVariant variant = ModelVariant::Full;
};

// Everything the marginal likelihood needs for one dyad. Log forms of the
// open probability are kept so that p near 0 or 1 loses no precision.
struct DyadParams {
  double p = 0.0;
  double log_p = 0.0;
  double log_q = 0.0;  // log(1 - p)
  double mu = 0.0;
  double r = 0.0;  // gamma shape mu^2 / v
  double a = 0.0;  // gamma rate mu / v

  static DyadParams from_logit(double logit_p, double log_mu, double v);
  static DyadParams from_values(double p, double mu, double v);
};

// p = logistic(beta1p - beta2p * d^beta3p)
double link_p(double d, const LinkCoefficients& c);
// mu = exp(beta1mu - beta2mu * d^beta3mu)
double link_mu(double d, const LinkCoefficients& c);

DyadParams dyad_params(double d, const PopulationParams& params);

// Log of the gamma-mixed never-triers likelihood for y_star contacts in duration T.
double marginal_loglik(std::uint32_t y_star, double duration, const DyadParams& dp);
double marginal_loglik(std::uint32_t y_star, double duration, double p, double mu, double v);

struct LikelihoodTotal {
  double loglik = 0.0;
  std::size_t empty_evaluations = 0;
  std::size_t nonempty_evaluations = 0;
  std::size_t evaluations() const { return empty_evaluations + nonempty_evaluations; }
};

// Total log-likelihood of a table. Empty dyads are grouped into distance
// classes: one class for every unordered pair of distinct sites, plus a single
// class for all same-site pairs (distance 0). Each class with at least one
// empty dyad costs one evaluation; nonempty dyads are evaluated individually.
LikelihoodTotal aggregated_loglik(const DyadTable& table, const ClusterTable& clusters,
                                  const PopulationParams& params);

// Upper bound on evaluations per full-table likelihood: C(k,2) + 1 + nonempty.
std::uint64_t evaluation_bound(std::size_t k, std::size_t n_nonempty);

// Independent dyad simulation: open ~ Bernoulli(p); if open, rate ~ gamma(r, a)
// and count ~ Poisson(rate * T). The result spans weeks [0, duration).
DyadTable simulate_network(const ClusterTable& clusters, const PopulationParams& params, int duration, Rng& rng);

// Probability that a dyad empty over `duration` has at least one contact in the
// next `horizon`, via conjugate updating of the open state and the gamma rate.
double prob_nonempty_future(double duration, double horizon, const DyadParams& dp);

}  // namespace latentdyad

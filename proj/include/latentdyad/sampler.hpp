#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latentdyad/dyadic_data.hpp"
#include "latentdyad/latent_space.hpp"
#include "latentdyad/model.hpp"

namespace latentdyad {

// Which gamma shape the Escobar-West mixture uses for its second component:
// Canonical is r_alpha + k, AsPrinted is r_alpha + 1.
enum class EscobarWestForm { Canonical, AsPrinted };

// How a singleton's own coordinate enters the auxiliary proposals.
// RetainAsAuxiliary: it is one of the m auxiliaries (m - 1 fresh draws).
// PrintedExtraCandidate: it is kept alongside m fresh draws (m + 1 candidates).
enum class SingletonPolicy { RetainAsAuxiliary, PrintedExtraCandidate };

struct HyperpriorConfig {
  // gamma(mean 4, variance 80)
  double alpha_shape = 0.2;
  double alpha_rate = 0.05;
  // gamma(mean 3, variance 5)
  double kappa_shape = 1.8;
  double kappa_rate = 0.6;
  // N(xi_mean * 1, xi_variance * I) on the transformed parameter vector
  double xi_mean = 0.0;
  double xi_variance = 10.0;
  std::optional<double> fixed_alpha;
  EscobarWestForm escobar_west = EscobarWestForm::Canonical;

  void validate() const;
};

struct SamplerConfig {
  ModelVariant variant = ModelVariant::Full;
  std::size_t dim = 2;
  std::size_t m = 3;
  std::size_t sweeps = 2000;
  std::size_t burn_in = 1000;
  std::size_t thin = 1;
  double step_scale = 0.1;
  bool adapt_step = true;
  double target_acceptance = 0.23;
  std::size_t xi_steps = 1;
  std::size_t sir_pool = 1000;
  double initial_kappa = 2.0;
  std::uint64_t seed = 1;
  SingletonPolicy singleton = SingletonPolicy::RetainAsAuxiliary;
  // Replaces the data likelihood by a constant; used for prior-recovery checks.
  bool flat_likelihood = false;

  void validate() const;
};

// Transformed parameter vector: unconstrained betas as-is, the nonnegative
// distance coefficients and the gamma variance on the log scale.
std::vector<std::string> xi_names(ModelVariant variant);
std::vector<double> xi_vector(const PopulationParams& params);
PopulationParams params_from_xi(std::span<const double> xi, ModelVariant variant);
double log_xi_prior(std::span<const double> xi, const HyperpriorConfig& hyper);

// Per-dyad likelihood bookkeeping for one table, shared by the update steps.
class DyadLikelihood {
 public:
  explicit DyadLikelihood(const DyadTable& table, bool flat = false);

  // Everything about individual i's dyads that does not depend on where i sits.
  struct PersonView {
    std::vector<std::uint32_t> nonempty_per_site;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> partners;  // (site, y)
  };

  const DyadTable& table() const { return *table_; }
  bool flat() const { return flat_; }
  std::size_t degree(std::size_t individual) const { return neighbors_[individual].size(); }

  LikelihoodTotal total(const ClusterTable& clusters, const PopulationParams& params) const;

  // `individual` must currently be detached from `clusters`.
  PersonView prepare(std::size_t individual, const ClusterTable& clusters) const;

  // Log-likelihood of every dyad involving the individual if placed at
  // `candidate`; adds the number of distinct evaluations to `evaluations`.
  double person_loglik(const PersonView& view, const LatentCoordinate& candidate, const ClusterTable& clusters,
                       const PopulationParams& params, std::size_t& evaluations) const;

 private:
  const DyadTable* table_;
  bool flat_;
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> neighbors_;  // (partner, y)
};

struct ChainState {
  ClusterTable clusters;
  PopulationParams params;
  double alpha = 4.0;
  double kappa = 2.0;
  Rng rng;
  std::size_t sweep = 0;
  double step_scale = 0.1;
};

// Escobar-West auxiliary-variable update.
double escobar_west_weight(std::size_t k, std::size_t n, double eta, const HyperpriorConfig& hyper);
double draw_alpha_given_eta(std::size_t k, std::size_t n, double eta, const HyperpriorConfig& hyper, Rng& rng);
double update_alpha(double alpha, std::size_t k, std::size_t n, const HyperpriorConfig& hyper, Rng& rng);

struct XiStep {
  bool accepted = false;
  double log_posterior = 0.0;
};

// One random-walk Metropolis step on the transformed parameter vector.
XiStep update_xi(ChainState& state, const DyadLikelihood& likelihood, const HyperpriorConfig& hyper,
                 double step_scale);

// Sampling-importance resampling from the gamma prior, weighted by the radius likelihood.
double update_kappa(std::span<const double> radii, const HyperpriorConfig& hyper, std::size_t pool_size, Rng& rng);

// One pass over all individuals, reassigning each by the auxiliary-proposal
// scheme. Returns the number of likelihood evaluations.
std::size_t update_z(ChainState& state, const DyadLikelihood& likelihood, std::size_t m, SingletonPolicy policy);

struct PosteriorDraw {
  std::size_t sweep = 0;
  double alpha = 0.0;
  double kappa = 0.0;
  PopulationParams params;
  double loglik = 0.0;
  std::size_t eval_count = 0;
  std::vector<LatentCoordinate> sites;
  std::vector<std::size_t> occupancy;
  std::vector<std::uint32_t> assignment;  // individual -> index into sites

  std::size_t k() const { return sites.size(); }
  ClusterTable to_clusters() const;
  static PosteriorDraw capture(const ChainState& state, const LikelihoodTotal& total);
};

struct ChainOutput {
  ModelVariant variant = ModelVariant::Full;
  std::size_t dim = 2;
  std::size_t n_individuals = 0;
  std::vector<PosteriorDraw> draws;
  std::vector<std::size_t> k_trace;  // k after every sweep, burn-in included
  std::size_t xi_proposed = 0;       // post burn-in only
  std::size_t xi_accepted = 0;
  double final_step_scale = 0.0;
  double wall_seconds = 0.0;

  double acceptance_rate() const {
    return xi_proposed == 0 ? 0.0 : static_cast<double>(xi_accepted) / static_cast<double>(xi_proposed);
  }
  double mean_k() const;
  double mean_eval_count() const;
};

ChainOutput run_chain(const DyadTable& table, const SamplerConfig& config, const HyperpriorConfig& hyper);

struct ScalingRow {
  std::size_t n = 0;
  double alpha = 0.0;
  double mean_k = 0.0;
  double expected_k = 0.0;
  double mean_evaluations = 0.0;
  std::size_t n_nonempty = 0;
  std::uint64_t n_dyads = 0;
  double reduction() const { return 1.0 - mean_evaluations / static_cast<double>(n_dyads); }
};

// Short fixed-alpha chains on random subsets of individuals.
std::vector<ScalingRow> scaling_experiment(const DyadTable& table, std::span<const double> alphas,
                                           std::span<const std::size_t> subsample_sizes, const SamplerConfig& config,
                                           const HyperpriorConfig& hyper);

}  // namespace latentdyad

#include "latentdyad/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "latentdyad/error.hpp"

namespace latentdyad {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kAdaptBatch = 50;

double draw_gamma(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

double draw_beta(double a, double b, Rng& rng) {
  const double x = draw_gamma(a, 1.0, rng);
  const double y = draw_gamma(b, 1.0, rng);
  return x / (x + y);
}

// Index drawn proportionally to exp(log_weights).
std::size_t sample_log_weights(const std::vector<double>& log_weights, Rng& rng) {
  const double top = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(top)) throw NumericalError("all candidate weights are zero or invalid");
  double sum = 0.0;
  std::vector<double> w(log_weights.size());
  for (std::size_t c = 0; c < w.size(); ++c) {
    w[c] = std::isnan(log_weights[c]) ? 0.0 : std::exp(log_weights[c] - top);
    sum += w[c];
  }
  std::uniform_real_distribution<double> unit(0.0, sum);
  double u = unit(rng);
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (u < w[c]) return c;
    u -= w[c];
  }
  // Rounding left u at the upper edge; take the last positive weight.
  for (std::size_t c = w.size(); c-- > 0;) {
    if (w[c] > 0.0) return c;
  }
  return w.size() - 1;
}

std::size_t xi_size(ModelVariant v) {
  switch (v) {
    case ModelVariant::Baseline: return 3;
    case ModelVariant::Hmcr: return 5;
    case ModelVariant::Full: return 7;
  }
  return 0;
}

}  // namespace

void HyperpriorConfig::validate() const {
  if (!(alpha_shape > 0 && alpha_rate > 0 && kappa_shape > 0 && kappa_rate > 0)) {
    throw ConfigError("hyperprior shapes and rates must be positive");
  }
  if (!(xi_variance > 0)) throw ConfigError("xi prior variance must be positive");
  if (fixed_alpha && !(*fixed_alpha >= 0.0)) throw ConfigError("fixed alpha must be nonnegative");
}

void SamplerConfig::validate() const {
  if (dim < 2) throw ConfigError("latent dimension must be at least 2");
  if (m < 1) throw ConfigError("auxiliary proposal count m must be at least 1");
  if (sweeps < burn_in) throw ConfigError("sweeps must be at least burn_in");
  if (thin < 1) throw ConfigError("thinning must be at least 1");
  if (!(step_scale >= 0.0)) throw ConfigError("step scale must be nonnegative");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) throw ConfigError("target acceptance must be in (0,1)");
  if (sir_pool < 1) throw ConfigError("SIR pool must hold at least one candidate");
  if (!(initial_kappa > 0.0)) throw ConfigError("initial kappa must be positive");
}

std::vector<std::string> xi_names(ModelVariant variant) {
  switch (variant) {
    case ModelVariant::Baseline: return {"beta1p", "beta1mu", "log_v"};
    case ModelVariant::Hmcr: return {"beta1p", "log_beta2p", "log_beta3p", "beta1mu", "log_v"};
    case ModelVariant::Full:
      return {"beta1p", "log_beta2p", "log_beta3p", "beta1mu", "log_beta2mu", "log_beta3mu", "log_v"};
  }
  return {};
}

std::vector<double> xi_vector(const PopulationParams& params) {
  const auto& c = params.coefficients;
  const double log_v = std::log(params.v);
  switch (params.variant) {
    case ModelVariant::Baseline: return {c.beta1p, c.beta1mu, log_v};
    case ModelVariant::Hmcr: return {c.beta1p, std::log(c.beta2p), std::log(c.beta3p), c.beta1mu, log_v};
    case ModelVariant::Full:
      return {c.beta1p,  std::log(c.beta2p),  std::log(c.beta3p), c.beta1mu,
              std::log(c.beta2mu), std::log(c.beta3mu), log_v};
  }
  return {};
}

PopulationParams params_from_xi(std::span<const double> xi, ModelVariant variant) {
  if (xi.size() != xi_size(variant)) throw std::invalid_argument("xi vector has wrong length for variant");
  PopulationParams p;
  p.variant = variant;
  auto& c = p.coefficients;
  switch (variant) {
    case ModelVariant::Baseline:
      c.beta1p = xi[0];
      c.beta1mu = xi[1];
      p.v = std::exp(xi[2]);
      c.beta2p = c.beta2mu = 0.0;
      break;
    case ModelVariant::Hmcr:
      c.beta1p = xi[0];
      c.beta2p = std::exp(xi[1]);
      c.beta3p = std::exp(xi[2]);
      c.beta1mu = xi[3];
      c.beta2mu = 0.0;
      p.v = std::exp(xi[4]);
      break;
    case ModelVariant::Full:
      c.beta1p = xi[0];
      c.beta2p = std::exp(xi[1]);
      c.beta3p = std::exp(xi[2]);
      c.beta1mu = xi[3];
      c.beta2mu = std::exp(xi[4]);
      c.beta3mu = std::exp(xi[5]);
      p.v = std::exp(xi[6]);
      break;
  }
  return p;
}

double log_xi_prior(std::span<const double> xi, const HyperpriorConfig& hyper) {
  double s = 0.0;
  for (double x : xi) s += (x - hyper.xi_mean) * (x - hyper.xi_mean);
  return -0.5 * s / hyper.xi_variance;
}

DyadLikelihood::DyadLikelihood(const DyadTable& table, bool flat)
    : table_(&table), flat_(flat), neighbors_(table.n_individuals()) {
  for (const auto& [key, y] : table.nonempty()) {
    neighbors_[key.i].emplace_back(key.j, y);
    neighbors_[key.j].emplace_back(key.i, y);
  }
}

LikelihoodTotal DyadLikelihood::total(const ClusterTable& clusters, const PopulationParams& params) const {
  if (flat_) return {};
  return aggregated_loglik(*table_, clusters, params);
}

DyadLikelihood::PersonView DyadLikelihood::prepare(std::size_t individual, const ClusterTable& clusters) const {
  PersonView view;
  view.nonempty_per_site.assign(clusters.k(), 0);
  view.partners.reserve(neighbors_[individual].size());
  for (const auto& [partner, y] : neighbors_[individual]) {
    const auto s = static_cast<std::uint32_t>(clusters.site_of(partner));
    ++view.nonempty_per_site[s];
    view.partners.emplace_back(s, y);
  }
  return view;
}

double DyadLikelihood::person_loglik(const PersonView& view, const LatentCoordinate& candidate,
                                     const ClusterTable& clusters, const PopulationParams& params,
                                     std::size_t& evaluations) const {
  if (flat_) return 0.0;
  const double duration = table_->duration();
  const std::size_t k = clusters.k();
  std::vector<DyadParams> by_site(k);
  double total = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    by_site[s] = dyad_params(latent_distance(candidate, clusters.site(s)), params);
    const std::size_t empty = clusters.occupancy(s) - view.nonempty_per_site[s];
    if (empty > 0) {
      total += static_cast<double>(empty) * marginal_loglik(0, duration, by_site[s]);
      ++evaluations;
    }
  }
  for (const auto& [s, y] : view.partners) {
    total += marginal_loglik(y, duration, by_site[s]);
    ++evaluations;
  }
  return total;
}

double escobar_west_weight(std::size_t k, std::size_t n, double eta, const HyperpriorConfig& hyper) {
  const double shape = hyper.alpha_shape + static_cast<double>(k) - 1.0;
  return shape / (static_cast<double>(n) * (hyper.alpha_rate - std::log(eta)) + shape);
}

double draw_alpha_given_eta(std::size_t k, std::size_t n, double eta, const HyperpriorConfig& hyper, Rng& rng) {
  const double w = escobar_west_weight(k, n, eta, hyper);
  std::bernoulli_distribution tau(w);
  const double rate = hyper.alpha_rate - std::log(eta);
  const double base = hyper.alpha_shape + static_cast<double>(k) - 1.0;
  if (!tau(rng)) return draw_gamma(base, rate, rng);
  const double shape = hyper.escobar_west == EscobarWestForm::Canonical ? base + 1.0 : hyper.alpha_shape + 1.0;
  return draw_gamma(shape, rate, rng);
}

double update_alpha(double alpha, std::size_t k, std::size_t n, const HyperpriorConfig& hyper, Rng& rng) {
  if (k < 1) throw std::invalid_argument("alpha update needs at least one site");
  const double eta = draw_beta(alpha + 1.0, static_cast<double>(n), rng);
  return draw_alpha_given_eta(k, n, eta, hyper, rng);
}

XiStep update_xi(ChainState& state, const DyadLikelihood& likelihood, const HyperpriorConfig& hyper,
                 double step_scale) {
  const auto variant = state.params.variant;
  const std::vector<double> current = xi_vector(state.params);
  const double current_lp = likelihood.total(state.clusters, state.params).loglik + log_xi_prior(current, hyper);

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> proposal(current.size());
  for (std::size_t d = 0; d < current.size(); ++d) proposal[d] = current[d] + step_scale * normal(state.rng);
  const PopulationParams candidate = params_from_xi(proposal, variant);
  double proposal_lp = likelihood.total(state.clusters, candidate).loglik + log_xi_prior(proposal, hyper);
  if (std::isnan(proposal_lp)) proposal_lp = kNegInf;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_ratio = proposal_lp - current_lp;
  if (log_ratio >= 0.0 || std::log(unit(state.rng)) < log_ratio) {
    state.params = candidate;
    return {true, proposal_lp};
  }
  return {false, current_lp};
}

double update_kappa(std::span<const double> radii, const HyperpriorConfig& hyper, std::size_t pool_size, Rng& rng) {
  if (pool_size < 1) throw std::invalid_argument("SIR pool must hold at least one candidate");
  std::vector<double> pool(pool_size), log_w(pool_size, 0.0);
  for (std::size_t c = 0; c < pool_size; ++c) {
    pool[c] = draw_gamma(hyper.kappa_shape, hyper.kappa_rate, rng);
    if (!(pool[c] > 0.0)) {
      log_w[c] = kNegInf;
      continue;
    }
    for (double rho : radii) log_w[c] += log_radius_density(rho, pool[c]);
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(top)) {
    throw NumericalError("kappa SIR: every candidate has zero weight (" + std::to_string(radii.size()) +
                         " radii, pool " + std::to_string(pool_size) + ")");
  }
  return pool[sample_log_weights(log_w, rng)];
}

std::size_t update_z(ChainState& state, const DyadLikelihood& likelihood, std::size_t m, SingletonPolicy policy) {
  auto& clusters = state.clusters;
  const std::size_t n = clusters.n_individuals();
  const double alpha = state.alpha;
  const double log_new_weight = alpha > 0.0 ? std::log(alpha / static_cast<double>(m)) : kNegInf;
  std::size_t evaluations = 0;

  std::vector<LatentCoordinate> auxiliaries;
  std::vector<double> log_w;
  for (std::size_t i = 0; i < n; ++i) {
    auxiliaries.clear();
    if (clusters.is_singleton(i)) {
      auxiliaries.push_back(clusters.coordinate_of(i));
    }
    const std::size_t fresh = policy == SingletonPolicy::RetainAsAuxiliary ? m - auxiliaries.size() : m;
    clusters.remove(i);
    for (std::size_t c = 0; c < fresh; ++c) auxiliaries.push_back(sample_h0(state.kappa, clusters.dim(), state.rng));

    const auto view = likelihood.prepare(i, clusters);
    const std::size_t k = clusters.k();
    log_w.assign(k + auxiliaries.size(), 0.0);
    for (std::size_t s = 0; s < k; ++s) {
      log_w[s] = std::log(static_cast<double>(clusters.occupancy(s))) +
                 likelihood.person_loglik(view, clusters.site(s), clusters, state.params, evaluations);
    }
    for (std::size_t c = 0; c < auxiliaries.size(); ++c) {
      log_w[k + c] = log_new_weight == kNegInf
                         ? kNegInf
                         : log_new_weight + likelihood.person_loglik(view, auxiliaries[c], clusters, state.params,
                                                                     evaluations);
    }
    const std::size_t pick = sample_log_weights(log_w, state.rng);
    if (pick < k) {
      clusters.assign(i, pick);
    } else {
      clusters.assign_new(i, std::move(auxiliaries[pick - k]));
    }
  }
  return evaluations;
}

ClusterTable PosteriorDraw::to_clusters() const {
  const std::size_t dim = sites.empty() ? 0 : sites.front().dim();
  ClusterTable table(assignment.size(), dim);
  std::vector<std::size_t> opened(sites.size(), ClusterTable::kUnassigned);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto s = assignment[i];
    if (s >= sites.size()) throw DataError("draw assignment references missing site");
    if (opened[s] == ClusterTable::kUnassigned) {
      opened[s] = table.assign_new(i, sites[s]);
    } else {
      table.assign(i, opened[s]);
    }
  }
  return table;
}

PosteriorDraw PosteriorDraw::capture(const ChainState& state, const LikelihoodTotal& total) {
  PosteriorDraw d;
  d.sweep = state.sweep;
  d.alpha = state.alpha;
  d.kappa = state.kappa;
  d.params = state.params;
  d.loglik = total.loglik;
  d.eval_count = total.evaluations();
  d.sites = state.clusters.sites();
  d.occupancy.resize(d.sites.size());
  for (std::size_t s = 0; s < d.sites.size(); ++s) d.occupancy[s] = state.clusters.occupancy(s);
  d.assignment.resize(state.clusters.n_individuals());
  for (std::size_t i = 0; i < d.assignment.size(); ++i) {
    d.assignment[i] = static_cast<std::uint32_t>(state.clusters.site_of(i));
  }
  return d;
}

double ChainOutput::mean_k() const {
  if (draws.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : draws) s += static_cast<double>(d.k());
  return s / static_cast<double>(draws.size());
}

double ChainOutput::mean_eval_count() const {
  if (draws.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : draws) s += static_cast<double>(d.eval_count);
  return s / static_cast<double>(draws.size());
}

ChainOutput run_chain(const DyadTable& table, const SamplerConfig& config, const HyperpriorConfig& hyper) {
  config.validate();
  hyper.validate();
  const std::size_t n = table.n_individuals();
  if (n < 2) throw ConfigError("need at least two individuals to fit");
  const auto started = std::chrono::steady_clock::now();

  ChainState state;
  state.rng.seed(config.seed);
  state.kappa = config.initial_kappa;
  state.alpha = hyper.fixed_alpha.value_or(hyper.alpha_shape / hyper.alpha_rate);
  state.step_scale = config.step_scale;
  state.params = params_from_xi(std::vector<double>(xi_names(config.variant).size(), hyper.xi_mean), config.variant);
  {
    std::vector<LatentCoordinate> start(n);
    for (auto& z : start) z = sample_h0(state.kappa, config.dim, state.rng);
    state.clusters = ClusterTable::singletons(std::move(start));
  }

  const DyadLikelihood likelihood(table, config.flat_likelihood);
  ChainOutput out;
  out.variant = config.variant;
  out.dim = config.dim;
  out.n_individuals = n;
  out.k_trace.reserve(config.sweeps);

  std::size_t batch_accepted = 0, batch_proposed = 0, batch_index = 0;
  std::vector<double> radii;
  for (std::size_t t = 1; t <= config.sweeps; ++t) {
    state.sweep = t;
    update_z(state, likelihood, config.m, config.singleton);
    if (!hyper.fixed_alpha) state.alpha = update_alpha(state.alpha, state.clusters.k(), n, hyper, state.rng);

    radii.clear();
    for (const auto& site : state.clusters.sites()) radii.push_back(site.norm());
    state.kappa = update_kappa(radii, hyper, config.sir_pool, state.rng);

    const bool burning = t <= config.burn_in;
    for (std::size_t s = 0; s < config.xi_steps; ++s) {
      const auto step = update_xi(state, likelihood, hyper, state.step_scale);
      if (burning) {
        ++batch_proposed;
        batch_accepted += step.accepted;
      } else {
        ++out.xi_proposed;
        out.xi_accepted += step.accepted;
      }
    }
    if (burning && config.adapt_step && batch_proposed >= kAdaptBatch) {
      const double rate = static_cast<double>(batch_accepted) / static_cast<double>(batch_proposed);
      ++batch_index;
      const double gain = 3.0 / std::sqrt(static_cast<double>(batch_index));
      state.step_scale = std::clamp(state.step_scale * std::exp(gain * (rate - config.target_acceptance)), 1e-4, 10.0);
      batch_accepted = batch_proposed = 0;
    }

    out.k_trace.push_back(state.clusters.k());
    if (!burning && (t - config.burn_in) % config.thin == 0) {
      out.draws.push_back(PosteriorDraw::capture(state, likelihood.total(state.clusters, state.params)));
    }
  }
  out.final_step_scale = state.step_scale;
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<ScalingRow> scaling_experiment(const DyadTable& table, std::span<const double> alphas,
                                           std::span<const std::size_t> subsample_sizes, const SamplerConfig& config,
                                           const HyperpriorConfig& hyper) {
  Rng rng(config.seed);
  std::vector<IndividualId> ids(table.n_individuals());
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<ScalingRow> rows;
  for (const auto size : subsample_sizes) {
    if (size > table.n_individuals()) throw ConfigError("subsample larger than the network");
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<IndividualId> keep(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(size));
    std::sort(keep.begin(), keep.end());
    const DyadTable sub = induced_subtable(table, keep);
    for (const double alpha : alphas) {
      HyperpriorConfig h = hyper;
      h.fixed_alpha = alpha;
      SamplerConfig c = config;
      c.seed = rng();
      const ChainOutput chain = run_chain(sub, c, h);
      ScalingRow row;
      row.n = size;
      row.alpha = alpha;
      row.mean_k = chain.mean_k();
      row.expected_k = expected_mass_points(alpha, size);
      row.mean_evaluations = chain.mean_eval_count();
      row.n_nonempty = sub.n_nonempty();
      row.n_dyads = sub.n_dyads();
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace latentdyad

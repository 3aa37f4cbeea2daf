#include "latentdyad/latent_space.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace latentdyad {

namespace {

// log(Gamma(2/kappa) / Gamma(1/kappa)); the radius scale constant.
double log_scale_constant(double kappa) {
  return std::lgamma(2.0 / kappa) - std::lgamma(1.0 / kappa);
}

void require_kappa(double kappa) {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::invalid_argument("kappa must be positive, got " + std::to_string(kappa));
  }
}

}  // namespace

double LatentCoordinate::norm() const {
  double s = 0.0;
  for (double x : values_) s += x * x;
  return std::sqrt(s);
}

std::vector<double> sample_angles(std::size_t dim, Rng& rng) {
  if (dim < 2) throw std::invalid_argument("latent dimension must be at least 2");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> angles(dim - 1);
  angles[0] = 2.0 * std::numbers::pi * unit(rng);
  // Angle j (1-based j >= 2) has density proportional to sin^{j-1} on (0, pi).
  for (std::size_t j = 1; j < angles.size(); ++j) {
    const double power = static_cast<double>(j);
    while (true) {
      const double theta = std::numbers::pi * unit(rng);
      if (unit(rng) < std::pow(std::sin(theta), power)) {
        angles[j] = theta;
        break;
      }
    }
  }
  return angles;
}

double sample_radius(double kappa, Rng& rng) {
  require_kappa(kappa);
  // rho^kappa ~ gamma(shape 1/kappa, rate c^kappa), c = Gamma(2/kappa)/Gamma(1/kappa).
  const double rate = std::exp(kappa * log_scale_constant(kappa));
  std::gamma_distribution<double> power_gamma(1.0 / kappa, 1.0 / rate);
  return std::pow(power_gamma(rng), 1.0 / kappa);
}

double log_radius_density(double rho, double kappa) {
  require_kappa(kappa);
  if (rho < 0.0) throw std::invalid_argument("radius must be nonnegative");
  const double log_c = log_scale_constant(kappa);
  const double log_norm = std::log(kappa) + std::lgamma(2.0 / kappa) - 2.0 * std::lgamma(1.0 / kappa);
  if (rho == 0.0) return log_norm;
  return log_norm - std::exp(kappa * (std::log(rho) + log_c));
}

double radius_density(double rho, double kappa) { return std::exp(log_radius_density(rho, kappa)); }

LatentCoordinate spherical_to_cartesian(const SphericalCoordinate& s) {
  const std::size_t dim = s.angles.size() + 1;
  if (dim < 2) throw std::invalid_argument("spherical coordinate needs at least one angle");
  // The sin^{j-1} angle must sit j-1 levels deep for a uniform direction, so
  // the product runs from the last angle to the first.
  std::vector<double> z(dim);
  double sin_product = 1.0;
  for (std::size_t j = 0; j + 1 < dim; ++j) {
    const double angle = s.angles[dim - 2 - j];
    z[j] = s.rho * std::cos(angle) * sin_product;
    sin_product *= std::sin(angle);
  }
  z[dim - 1] = s.rho * sin_product;
  return LatentCoordinate(std::move(z));
}

LatentCoordinate sample_h0(double kappa, std::size_t dim, Rng& rng) {
  SphericalCoordinate s;
  s.angles = sample_angles(dim, rng);
  s.rho = sample_radius(kappa, rng);
  return spherical_to_cartesian(s);
}

double latent_distance(const LatentCoordinate& a, const LatentCoordinate& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("latent coordinates differ in dimension");
  double s = 0.0;
  for (std::size_t d = 0; d < a.dim(); ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return std::sqrt(s);
}

std::size_t crp_simulate(double alpha, std::size_t n, Rng& rng) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (n == 0) throw std::invalid_argument("need at least one customer");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Only the table count matters: customer t opens a table w.p. alpha / (alpha + t).
  std::size_t k = 1;
  for (std::size_t t = 1; t < n; ++t) {
    if (unit(rng) * (alpha + static_cast<double>(t)) < alpha) ++k;
  }
  return k;
}

double expected_mass_points(double alpha, std::size_t n) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  return alpha * std::log((alpha + static_cast<double>(n)) / alpha);
}

double expected_mass_points_exact(double alpha, std::size_t n) {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  using boost::math::digamma;
  return alpha * (digamma(alpha + static_cast<double>(n)) - digamma(alpha));
}

ClusterTable::ClusterTable(std::size_t n_individuals, std::size_t dim)
    : dim_(dim), assignment_(n_individuals, kUnassigned), member_pos_(n_individuals, 0) {}

ClusterTable ClusterTable::singletons(std::vector<LatentCoordinate> coordinates) {
  const std::size_t dim = coordinates.empty() ? 0 : coordinates.front().dim();
  ClusterTable table(coordinates.size(), dim);
  for (std::size_t i = 0; i < coordinates.size(); ++i) table.assign_new(i, std::move(coordinates[i]));
  return table;
}

bool ClusterTable::is_singleton(std::size_t individual) const {
  const auto s = assignment_.at(individual);
  return s != kUnassigned && members_[s].size() == 1;
}

bool ClusterTable::remove(std::size_t individual) {
  const auto s = assignment_.at(individual);
  if (s == kUnassigned) throw std::logic_error("individual is not assigned");
  auto& list = members_[s];
  const auto pos = member_pos_[individual];
  list[pos] = list.back();
  member_pos_[list[pos]] = pos;
  list.pop_back();
  assignment_[individual] = kUnassigned;
  --n_assigned_;
  if (!list.empty()) return false;

  const auto last = sites_.size() - 1;
  if (s != last) {
    sites_[s] = std::move(sites_[last]);
    members_[s] = std::move(members_[last]);
    for (auto member : members_[s]) assignment_[member] = s;
  }
  sites_.pop_back();
  members_.pop_back();
  return true;
}

void ClusterTable::assign(std::size_t individual, std::size_t site) {
  if (site >= sites_.size()) throw std::out_of_range("assigning to nonexistent site");
  if (assignment_.at(individual) != kUnassigned) throw std::logic_error("individual already assigned");
  assignment_[individual] = site;
  member_pos_[individual] = members_[site].size();
  members_[site].push_back(static_cast<std::uint32_t>(individual));
  ++n_assigned_;
}

std::size_t ClusterTable::assign_new(std::size_t individual, LatentCoordinate coordinate) {
  if (coordinate.dim() != dim_) throw std::invalid_argument("site dimension mismatch");
  sites_.push_back(std::move(coordinate));
  members_.emplace_back();
  const auto s = sites_.size() - 1;
  assign(individual, s);
  return s;
}

void ClusterTable::check_invariants() const {
  if (members_.size() != sites_.size()) throw std::logic_error("site/member list size mismatch");
  std::size_t total = 0;
  for (std::size_t s = 0; s < sites_.size(); ++s) {
    if (members_[s].empty()) throw std::logic_error("empty site retained");
    for (std::size_t p = 0; p < members_[s].size(); ++p) {
      const auto i = members_[s][p];
      if (assignment_[i] != s || member_pos_[i] != p) throw std::logic_error("member bookkeeping broken");
    }
    total += members_[s].size();
    for (std::size_t t = s + 1; t < sites_.size(); ++t) {
      if (sites_[s] == sites_[t]) throw std::logic_error("duplicate sites");
    }
  }
  if (total != n_assigned_) throw std::logic_error("occupancy does not sum to assigned count");
}

}  // namespace latentdyad

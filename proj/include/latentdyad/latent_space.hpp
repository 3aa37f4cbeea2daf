#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace latentdyad {

using Rng = std::mt19937_64;

// A point in the D-dimensional latent space.
class LatentCoordinate {
 public:
  LatentCoordinate() = default;
  explicit LatentCoordinate(std::vector<double> values) : values_(std::move(values)) {}
  LatentCoordinate(std::initializer_list<double> values) : values_(values) {}

  std::size_t dim() const { return values_.size(); }
  double operator[](std::size_t d) const { return values_[d]; }
  double& operator[](std::size_t d) { return values_[d]; }
  std::span<const double> values() const { return values_; }
  double norm() const;

  // Bitwise comparison: sites are distinct unless exactly equal.
  bool operator==(const LatentCoordinate&) const = default;

 private:
  std::vector<double> values_;
};

// rho >= 0; angles[0] in (0, 2pi), angles[j] in (0, pi) for j >= 1.
struct SphericalCoordinate {
  double rho = 0.0;
  std::vector<double> angles;
};

std::vector<double> sample_angles(std::size_t dim, Rng& rng);

// Radius prior with E(rho) = 1. kappa = 1 is exponential, kappa = 2 half-normal.
double sample_radius(double kappa, Rng& rng);
double radius_density(double rho, double kappa);
double log_radius_density(double rho, double kappa);

LatentCoordinate spherical_to_cartesian(const SphericalCoordinate& s);

// One draw from the base measure H0 (power-sine direction, power-gamma radius).
LatentCoordinate sample_h0(double kappa, std::size_t dim, Rng& rng);

double latent_distance(const LatentCoordinate& a, const LatentCoordinate& b);

// Number of occupied tables after seating n customers by the Polya urn.
std::size_t crp_simulate(double alpha, std::size_t n, Rng& rng);

// Asymptotic E(k) = alpha * ln((alpha + n) / alpha).
double expected_mass_points(double alpha, std::size_t n);
// Exact E(k) = alpha * (digamma(alpha + n) - digamma(alpha)).
double expected_mass_points_exact(double alpha, std::size_t n);

// Distinct latent sites shared by individuals. Emptied sites are removed
// immediately, so site indices are not stable across updates.
class ClusterTable {
 public:
  static constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);

  ClusterTable() = default;
  ClusterTable(std::size_t n_individuals, std::size_t dim);

  // Each individual at its own site.
  static ClusterTable singletons(std::vector<LatentCoordinate> coordinates);

  std::size_t n_individuals() const { return assignment_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t k() const { return sites_.size(); }
  std::size_t n_assigned() const { return n_assigned_; }

  const LatentCoordinate& site(std::size_t s) const { return sites_[s]; }
  const std::vector<LatentCoordinate>& sites() const { return sites_; }
  std::size_t occupancy(std::size_t s) const { return members_[s].size(); }
  const std::vector<std::uint32_t>& members(std::size_t s) const { return members_[s]; }
  std::size_t site_of(std::size_t individual) const { return assignment_[individual]; }
  const LatentCoordinate& coordinate_of(std::size_t individual) const { return sites_[assignment_[individual]]; }
  bool is_singleton(std::size_t individual) const;

  // Detaches the individual. Returns true if its site became empty and was deleted.
  bool remove(std::size_t individual);
  void assign(std::size_t individual, std::size_t site);
  // Opens a new site at `coordinate`; returns its index.
  std::size_t assign_new(std::size_t individual, LatentCoordinate coordinate);

  // Throws std::logic_error if bookkeeping is inconsistent.
  void check_invariants() const;

 private:
  std::size_t dim_ = 0;
  std::size_t n_assigned_ = 0;
  std::vector<LatentCoordinate> sites_;
  std::vector<std::vector<std::uint32_t>> members_;
  std::vector<std::size_t> assignment_;
  std::vector<std::size_t> member_pos_;
};

}  // namespace latentdyad

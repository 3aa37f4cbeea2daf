#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentdyad/dyadic_data.hpp"
#include "latentdyad/sampler.hpp"

namespace latentdyad {

// Unweighted undirected view of a table: an edge per nonempty dyad.
class BinaryNetwork {
 public:
  explicit BinaryNetwork(std::size_t n = 0) : adjacency_(n) {}
  static BinaryNetwork from_table(const DyadTable& table);

  void add_edge(IndividualId a, IndividualId b);  // call finalize() after the last edge
  void finalize();

  std::size_t n() const { return adjacency_.size(); }
  std::size_t n_edges() const { return n_edges_; }
  const std::vector<IndividualId>& neighbors(std::size_t i) const { return adjacency_[i]; }
  bool has_edge(IndividualId a, IndividualId b) const;

 private:
  std::vector<std::vector<IndividualId>> adjacency_;
  std::size_t n_edges_ = 0;
};

using Histogram = std::vector<std::uint64_t>;

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
};
Moments histogram_moments(const Histogram& h, std::size_t offset = 0);

// Index = degree.
Histogram degree_distribution(const BinaryNetwork& net);

struct GeodesicSummary {
  Histogram histogram;  // index = path length over unordered reachable pairs; [0] unused
  std::uint64_t reachable_pairs = 0;
  std::uint64_t unreachable_pairs = 0;
  double mean = 0.0;  // over reachable pairs only
  double sd = 0.0;
};
GeodesicSummary geodesic_distribution(const BinaryNetwork& net);

struct TriangleCounts {
  std::uint64_t triangles = 0;
  std::uint64_t connected_triples = 0;  // paths of length two, counted at their centre
};
TriangleCounts count_triangles(const BinaryNetwork& net);

enum class ClusteringMode { Transitivity, MeanLocal };
double clustering_coefficient(const BinaryNetwork& net, ClusteringMode mode = ClusteringMode::Transitivity);

// Index = number of common neighbours, over edges.
Histogram dyadwise_shared_partners(const BinaryNetwork& net);

// Index = contact count, over nonempty dyads.
Histogram calls_distribution(const DyadTable& table);

struct DensityReport {
  double density = 0.0;
  double empty_proportion = 1.0;
};
DensityReport density(const DyadTable& table);

struct NetworkStats {
  Histogram degree;
  Histogram shared_partners;
  GeodesicSummary geodesic;
  Histogram calls;
  DensityReport density;
  double clustering = 0.0;
};
NetworkStats compute_network_stats(const DyadTable& table, ClusteringMode mode = ClusteringMode::Transitivity);

struct DescriptiveColumn {
  std::string name;
  int weeks = 0;
  std::size_t customers = 0;
  std::size_t nonempty_dyads = 0;
  double empty_proportion = 0.0;
  double clustering = 0.0;
  Moments degree;
  Moments geodesic;
  std::uint64_t unreachable_pairs = 0;
  Moments calls;
  Moments shared_partners;
};

struct DescriptiveReport {
  std::vector<DescriptiveColumn> columns;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

DescriptiveReport descriptive_report(const DyadTable& calibration, const DyadTable& holdout, const DyadTable& full,
                                     ClusteringMode mode = ClusteringMode::Transitivity);

struct RandomGraphExpectation {
  double geodesic = 0.0;    // ln N / ln kbar
  double clustering = 0.0;  // kbar / N
  bool approximation_valid = true;
};
RandomGraphExpectation random_graph_expectations(std::size_t n, double mean_degree);

// Erdos-Renyi G(n, p) with p chosen for the requested mean degree.
BinaryNetwork erdos_renyi(std::size_t n, double mean_degree, Rng& rng);

struct Envelope {
  double q025 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q975 = 0.0;
  bool contains(double x) const;
};
Envelope envelope_of(std::vector<double> values);

struct PpcCheck {
  std::string statistic;
  std::string bin;
  double observed = 0.0;
  Envelope envelope;
  bool inside = true;
  // False for bins where the observation and every replicate are zero.
  bool informative = true;
};

struct PpcReport {
  std::size_t draws_used = 0;
  std::size_t replicates = 0;
  std::vector<PpcCheck> checks;

  const PpcCheck* find(const std::string& statistic, const std::string& bin = "") const;
  double fraction_inside(bool informative_only = true) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

struct PpcOptions {
  std::size_t replicates = 100;
  std::uint64_t seed = 1;
  ClusteringMode clustering = ClusteringMode::Transitivity;
  std::size_t threads = 1;
};

// Simulates `replicates` networks of the holdout's duration, cycling over the
// draws, and places the holdout's statistics against the replicate quantiles.
PpcReport run_ppc(const std::vector<PosteriorDraw>& draws, const DyadTable& holdout, const PpcOptions& options);

// Ranking key for a candidate dyad: higher primary first, then higher
// secondary; remaining ties are broken uniformly at random.
struct Score {
  double primary = 0.0;
  double secondary = 0.0;
};

class DyadScorer {
 public:
  virtual ~DyadScorer() = default;
  virtual std::string name() const = 0;
  // Scores for every j in [0, N); entry i is ignored.
  virtual void score_row(IndividualId i, std::vector<Score>& out) const = 0;
};

// Every dyad scores the same.
class ConstantScorer : public DyadScorer {
 public:
  explicit ConstantScorer(std::size_t n, std::string name = "random") : n_(n), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void score_row(IndividualId i, std::vector<Score>& out) const override;

 private:
  std::size_t n_;
  std::string name_;
};

// Predicts each dyad keeps its calibration state.
class ConditionOnObservedScorer : public DyadScorer {
 public:
  explicit ConditionOnObservedScorer(const DyadTable& calibration) : calibration_(&calibration) {}
  std::string name() const override { return "condition_on_observed"; }
  void score_row(IndividualId i, std::vector<Score>& out) const override;

 private:
  const DyadTable* calibration_;
};

// Scores with the holdout truth itself.
class OracleScorer : public DyadScorer {
 public:
  explicit OracleScorer(const DyadTable& holdout) : holdout_(&holdout) {}
  std::string name() const override { return "oracle"; }
  void score_row(IndividualId i, std::vector<Score>& out) const override;

 private:
  const DyadTable* holdout_;
};

enum class GeodesicTiebreak { Random, CallVolume };

// Shorter calibration geodesic ranks first; unreachable pairs rank last.
// CallVolume breaks ties by the largest total contact count along a shortest path.
class GeodesicScorer : public DyadScorer {
 public:
  GeodesicScorer(const DyadTable& calibration, GeodesicTiebreak tiebreak);
  std::string name() const override;
  void score_row(IndividualId i, std::vector<Score>& out) const override;

 private:
  const DyadTable* calibration_;
  GeodesicTiebreak tiebreak_;
  std::vector<std::vector<std::pair<IndividualId, std::uint32_t>>> adjacency_;
};

// Posterior mean, over draws, of the probability that a calibration-empty dyad
// has at least one contact within `horizon`.
class ModelScorer : public DyadScorer {
 public:
  ModelScorer(const std::vector<PosteriorDraw>& draws, double calibration_duration, double horizon);
  std::string name() const override;
  void score_row(IndividualId i, std::vector<Score>& out) const override;
  double score(IndividualId i, IndividualId j) const;

 private:
  struct DrawTable {
    std::size_t k = 0;
    std::vector<double> prob;  // k x k
    const std::vector<std::uint32_t>* assignment = nullptr;
  };
  std::vector<DrawTable> tables_;
  std::size_t n_ = 0;
  std::string variant_;
};

struct LiftResult {
  double q_percent = 0.0;
  double micro = 0.0;  // pooled captured / pooled converters
  double macro = 0.0;  // mean of per-individual lifts, over individuals with converters
  std::size_t individuals_with_converters = 0;
  std::uint64_t converters = 0;
};

// For each individual, ranks its calibration-empty partners by score and takes
// the top q share (q = q_percent / 100; the boundary candidate counts
// fractionally). Lift is the share of that individual's holdout converters
// captured in the top set: q in expectation for random scores, at most 1.
LiftResult lift(const DyadTable& calibration, const DyadTable& holdout, const DyadScorer& scorer, double q_percent,
                Rng& tiebreak);

struct LiftReport {
  std::vector<double> q_percents;
  std::vector<std::string> scorers;
  std::vector<std::vector<LiftResult>> results;  // [scorer][q]
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

LiftReport lift_report(const DyadTable& calibration, const DyadTable& holdout,
                       const std::vector<const DyadScorer*>& scorers, const std::vector<double>& q_percents,
                       std::uint64_t seed);

// Rank correlation with average ranks for ties.
double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y);

// Posterior mean open probability for every dyad (i < j, row-major order).
std::vector<double> posterior_mean_open_probability(const std::vector<PosteriorDraw>& draws);

}  // namespace latentdyad

#include "latentdyad/netstats.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace latentdyad {

namespace {

std::size_t common_neighbors(const std::vector<IndividualId>& a, const std::vector<IndividualId>& b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

void bump(Histogram& h, std::size_t index) {
  if (h.size() <= index) h.resize(index + 1, 0);
  ++h[index];
}

// Contact-count bins for the PPC; raw counts have long sparse tails.
const std::vector<std::pair<std::uint32_t, std::uint32_t>>& call_bins() {
  static const std::vector<std::pair<std::uint32_t, std::uint32_t>> bins = {
      {1, 1},   {2, 2},   {3, 3},   {4, 4},     {5, 6},     {7, 9},
      {10, 14}, {15, 24}, {25, 49}, {50, 99}, {100, 199}, {200, std::numeric_limits<std::uint32_t>::max()}};
  return bins;
}

std::string call_bin_label(const std::pair<std::uint32_t, std::uint32_t>& b) {
  if (b.first == b.second) return std::to_string(b.first);
  if (b.second == std::numeric_limits<std::uint32_t>::max()) return std::to_string(b.first) + "+";
  return std::to_string(b.first) + "-" + std::to_string(b.second);
}

std::vector<double> proportions(const Histogram& h, std::size_t length) {
  std::vector<double> out(length, 0.0);
  const double total = static_cast<double>(std::accumulate(h.begin(), h.end(), std::uint64_t{0}));
  if (total == 0.0) return out;
  for (std::size_t i = 0; i < h.size() && i < length; ++i) out[i] = static_cast<double>(h[i]) / total;
  return out;
}

// Named proportion vectors that the PPC compares bin by bin.
struct PpcSummary {
  std::vector<double> degree;
  std::vector<double> shared_partners;
  std::vector<double> geodesic;  // by length, last entry = unreachable share
  std::vector<double> calls;
  double density = 0.0;
  double clustering = 0.0;
};

PpcSummary summarize(const DyadTable& table, ClusteringMode mode) {
  const auto stats = compute_network_stats(table, mode);
  PpcSummary s;
  s.degree = proportions(stats.degree, stats.degree.size());
  s.shared_partners = proportions(stats.shared_partners, stats.shared_partners.size());
  Histogram geo = stats.geodesic.histogram;
  if (geo.empty()) geo.resize(1, 0);
  geo[0] = 0;
  s.geodesic = proportions(geo, geo.size());
  const double pairs = static_cast<double>(stats.geodesic.reachable_pairs + stats.geodesic.unreachable_pairs);
  if (pairs > 0) {
    for (auto& x : s.geodesic) x *= static_cast<double>(stats.geodesic.reachable_pairs) / pairs;
  }
  s.geodesic.push_back(pairs > 0 ? static_cast<double>(stats.geodesic.unreachable_pairs) / pairs : 0.0);
  Histogram binned(call_bins().size(), 0);
  for (std::size_t y = 1; y < stats.calls.size(); ++y) {
    for (std::size_t b = 0; b < call_bins().size(); ++b) {
      if (y >= call_bins()[b].first && y <= call_bins()[b].second) {
        binned[b] += stats.calls[y];
        break;
      }
    }
  }
  s.calls = proportions(binned, binned.size());
  s.density = stats.density.density;
  s.clustering = stats.clustering;
  return s;
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

BinaryNetwork BinaryNetwork::from_table(const DyadTable& table) {
  BinaryNetwork net(table.n_individuals());
  for (const auto& [key, y] : table.nonempty()) {
    net.adjacency_[key.i].push_back(key.j);
    net.adjacency_[key.j].push_back(key.i);
  }
  net.n_edges_ = table.n_nonempty();
  net.finalize();
  return net;
}

void BinaryNetwork::add_edge(IndividualId a, IndividualId b) {
  if (a == b) throw std::invalid_argument("self-loops are not allowed");
  if (a >= n() || b >= n()) throw std::out_of_range("edge endpoint outside network");
  adjacency_[a].push_back(b);
  adjacency_[b].push_back(a);
  ++n_edges_;
}

void BinaryNetwork::finalize() {
  std::size_t twice = 0;
  for (auto& list : adjacency_) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    twice += list.size();
  }
  n_edges_ = twice / 2;
}

bool BinaryNetwork::has_edge(IndividualId a, IndividualId b) const {
  const auto& list = adjacency_.at(a);
  return std::binary_search(list.begin(), list.end(), b);
}

Moments histogram_moments(const Histogram& h, std::size_t offset) {
  double n = 0.0, sum = 0.0, sq = 0.0;
  for (std::size_t i = offset; i < h.size(); ++i) {
    const double c = static_cast<double>(h[i]);
    n += c;
    sum += c * static_cast<double>(i);
    sq += c * static_cast<double>(i) * static_cast<double>(i);
  }
  if (n == 0.0) return {};
  const double mean = sum / n;
  return {mean, std::sqrt(std::max(0.0, sq / n - mean * mean))};
}

Histogram degree_distribution(const BinaryNetwork& net) {
  Histogram h;
  for (std::size_t i = 0; i < net.n(); ++i) bump(h, net.neighbors(i).size());
  return h;
}

GeodesicSummary geodesic_distribution(const BinaryNetwork& net) {
  GeodesicSummary g;
  const std::size_t n = net.n();
  std::vector<std::uint32_t> dist(n);
  std::vector<IndividualId> queue(n);
  constexpr auto kUnseen = std::numeric_limits<std::uint32_t>::max();
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), kUnseen);
    dist[s] = 0;
    std::size_t head = 0, tail = 0;
    queue[tail++] = static_cast<IndividualId>(s);
    while (head < tail) {
      const auto u = queue[head++];
      for (auto w : net.neighbors(u)) {
        if (dist[w] == kUnseen) {
          dist[w] = dist[u] + 1;
          queue[tail++] = w;
        }
      }
    }
    for (std::size_t t = s + 1; t < n; ++t) {
      if (dist[t] == kUnseen) {
        ++g.unreachable_pairs;
      } else {
        bump(g.histogram, dist[t]);
        ++g.reachable_pairs;
      }
    }
  }
  const auto m = histogram_moments(g.histogram, 1);
  g.mean = m.mean;
  g.sd = m.sd;
  return g;
}

TriangleCounts count_triangles(const BinaryNetwork& net) {
  TriangleCounts c;
  for (std::size_t u = 0; u < net.n(); ++u) {
    const auto& nu = net.neighbors(u);
    const std::uint64_t d = nu.size();
    c.connected_triples += d * (d == 0 ? 0 : d - 1) / 2;
    for (auto v : nu) {
      if (v <= u) continue;
      // Count each triangle once, at its smallest vertex and middle vertex.
      const auto& nv = net.neighbors(v);
      auto ia = std::upper_bound(nu.begin(), nu.end(), v);
      auto ib = std::upper_bound(nv.begin(), nv.end(), v);
      while (ia != nu.end() && ib != nv.end()) {
        if (*ia < *ib) {
          ++ia;
        } else if (*ib < *ia) {
          ++ib;
        } else {
          ++c.triangles;
          ++ia;
          ++ib;
        }
      }
    }
  }
  return c;
}

double clustering_coefficient(const BinaryNetwork& net, ClusteringMode mode) {
  if (mode == ClusteringMode::Transitivity) {
    const auto c = count_triangles(net);
    return c.connected_triples == 0 ? 0.0
                                    : 3.0 * static_cast<double>(c.triangles) / static_cast<double>(c.connected_triples);
  }
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t u = 0; u < net.n(); ++u) {
    const auto& nu = net.neighbors(u);
    if (nu.size() < 2) continue;
    std::size_t links = 0;
    for (auto v : nu) links += common_neighbors(nu, net.neighbors(v));
    const double possible = static_cast<double>(nu.size()) * static_cast<double>(nu.size() - 1);
    sum += static_cast<double>(links) / possible;
    ++counted;
  }
  return counted == 0 ? 0.0 : sum / static_cast<double>(counted);
}

Histogram dyadwise_shared_partners(const BinaryNetwork& net) {
  Histogram h;
  for (std::size_t u = 0; u < net.n(); ++u) {
    for (auto v : net.neighbors(u)) {
      if (v > u) bump(h, common_neighbors(net.neighbors(u), net.neighbors(v)));
    }
  }
  return h;
}

Histogram calls_distribution(const DyadTable& table) {
  Histogram h;
  for (const auto& [key, y] : table.nonempty()) bump(h, y);
  return h;
}

DensityReport density(const DyadTable& table) {
  const auto dyads = table.n_dyads();
  if (dyads == 0) return {};
  const double d = static_cast<double>(table.n_nonempty()) / static_cast<double>(dyads);
  return {d, 1.0 - d};
}

NetworkStats compute_network_stats(const DyadTable& table, ClusteringMode mode) {
  const auto net = BinaryNetwork::from_table(table);
  NetworkStats s;
  s.degree = degree_distribution(net);
  s.shared_partners = dyadwise_shared_partners(net);
  s.geodesic = geodesic_distribution(net);
  s.calls = calls_distribution(table);
  s.density = density(table);
  s.clustering = clustering_coefficient(net, mode);
  return s;
}

DescriptiveReport descriptive_report(const DyadTable& calibration, const DyadTable& holdout, const DyadTable& full,
                                     ClusteringMode mode) {
  DescriptiveReport report;
  const std::pair<const char*, const DyadTable*> windows[] = {
      {"Calibration", &calibration}, {"Holdout", &holdout}, {"Full", &full}};
  for (const auto& [name, table] : windows) {
    const auto stats = compute_network_stats(*table, mode);
    DescriptiveColumn c;
    c.name = name;
    c.weeks = table->window().duration();
    c.customers = table->n_individuals();
    c.nonempty_dyads = table->n_nonempty();
    c.empty_proportion = stats.density.empty_proportion;
    c.clustering = stats.clustering;
    c.degree = histogram_moments(stats.degree);
    c.geodesic = {stats.geodesic.mean, stats.geodesic.sd};
    c.unreachable_pairs = stats.geodesic.unreachable_pairs;
    c.calls = histogram_moments(stats.calls, 1);
    c.shared_partners = histogram_moments(stats.shared_partners);
    report.columns.push_back(c);
  }
  return report;
}

nlohmann::json DescriptiveReport::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) {
    cols.push_back({{"window", c.name},
                    {"weeks", c.weeks},
                    {"customers", c.customers},
                    {"nonempty_dyads", c.nonempty_dyads},
                    {"empty_proportion", c.empty_proportion},
                    {"clustering_coefficient", c.clustering},
                    {"degree", {{"mean", c.degree.mean}, {"sd", c.degree.sd}}},
                    {"geodesic", {{"mean", c.geodesic.mean}, {"sd", c.geodesic.sd}}},
                    {"unreachable_pairs", c.unreachable_pairs},
                    {"calls_per_nonempty_dyad", {{"mean", c.calls.mean}, {"sd", c.calls.sd}}},
                    {"shared_partners_per_nonempty_dyad",
                     {{"mean", c.shared_partners.mean}, {"sd", c.shared_partners.sd}}}});
  }
  return {{"report", "descriptive"}, {"columns", cols}};
}

std::string DescriptiveReport::to_text() const {
  std::ostringstream os;
  auto row = [&](const std::string& label, auto&& cell) {
    os << std::left << std::setw(44) << label;
    for (const auto& c : columns) os << std::right << std::setw(16) << cell(c);
    os << '\n';
  };
  auto fixed = [](double x, int digits) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << x;
    return s.str();
  };
  auto pair = [&](const Moments& m) { return fixed(m.mean, 1) + " (" + fixed(m.sd, 1) + ")"; };
  row("", [](const DescriptiveColumn& c) { return c.name; });
  row("Weeks", [](const DescriptiveColumn& c) { return std::to_string(c.weeks); });
  row("Customers", [](const DescriptiveColumn& c) { return std::to_string(c.customers); });
  row("Non-empty dyads", [](const DescriptiveColumn& c) { return std::to_string(c.nonempty_dyads); });
  row("Proportion of empty dyads", [&](const DescriptiveColumn& c) { return fixed(c.empty_proportion, 4); });
  row("Clustering coefficient", [&](const DescriptiveColumn& c) { return fixed(c.clustering, 3); });
  row("Mean (s.d.) degree distribution", [&](const DescriptiveColumn& c) { return pair(c.degree); });
  row("Mean (s.d.) geodesic distance", [&](const DescriptiveColumn& c) { return pair(c.geodesic); });
  row("Mean (s.d.) calls per non-empty dyad", [&](const DescriptiveColumn& c) { return pair(c.calls); });
  row("Mean (s.d.) shared friends in non-empty dyad", [&](const DescriptiveColumn& c) {
    return pair(c.shared_partners);
  });
  return os.str();
}

RandomGraphExpectation random_graph_expectations(std::size_t n, double mean_degree) {
  if (!(mean_degree > 1.0)) throw std::invalid_argument("mean degree must exceed 1");
  if (n < 2) throw std::invalid_argument("need at least two nodes");
  RandomGraphExpectation e;
  e.geodesic = std::log(static_cast<double>(n)) / std::log(mean_degree);
  e.clustering = mean_degree / static_cast<double>(n);
  // The approximations assume a sparse graph.
  e.approximation_valid = mean_degree < 0.5 * static_cast<double>(n - 1);
  return e;
}

BinaryNetwork erdos_renyi(std::size_t n, double mean_degree, Rng& rng) {
  BinaryNetwork net(n);
  if (n < 2) return net;
  const double p = std::clamp(mean_degree / static_cast<double>(n - 1), 0.0, 1.0);
  if (p <= 0.0) return net;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double log_q = std::log1p(-p);
  // Geometric skipping over the pairs (w, v), w < v.
  std::int64_t v = 1, w = -1;
  const auto nn = static_cast<std::int64_t>(n);
  while (v < nn) {
    const double r = unit(rng);
    w += 1 + (p >= 1.0 ? 0 : static_cast<std::int64_t>(std::floor(std::log1p(-r) / log_q)));
    while (w >= v && v < nn) {
      w -= v;
      ++v;
    }
    if (v < nn) net.add_edge(static_cast<IndividualId>(w), static_cast<IndividualId>(v));
  }
  net.finalize();
  return net;
}

bool Envelope::contains(double x) const {
  const double tol = 1e-12;
  return x >= q025 - tol && x <= q975 + tol;
}

Envelope envelope_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return {quantile(values, 0.025), quantile(values, 0.25), quantile(values, 0.5), quantile(values, 0.75),
          quantile(values, 0.975)};
}

const PpcCheck* PpcReport::find(const std::string& statistic, const std::string& bin) const {
  for (const auto& c : checks) {
    if (c.statistic == statistic && c.bin == bin) return &c;
  }
  return nullptr;
}

double PpcReport::fraction_inside(bool informative_only) const {
  std::size_t total = 0, inside = 0;
  for (const auto& c : checks) {
    if (informative_only && !c.informative) continue;
    ++total;
    inside += c.inside;
  }
  return total == 0 ? 1.0 : static_cast<double>(inside) / static_cast<double>(total);
}

nlohmann::json PpcReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : checks) {
    rows.push_back({{"statistic", c.statistic},
                    {"bin", c.bin},
                    {"observed", c.observed},
                    {"q025", c.envelope.q025},
                    {"q25", c.envelope.q25},
                    {"q50", c.envelope.q50},
                    {"q75", c.envelope.q75},
                    {"q975", c.envelope.q975},
                    {"inside", c.inside},
                    {"informative", c.informative}});
  }
  return {{"report", "ppc"},
          {"draws_used", draws_used},
          {"replicates", replicates},
          {"fraction_inside", fraction_inside(true)},
          {"checks", rows}};
}

std::string PpcReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10) << "statistic,bin,observed,q025,q25,q50,q75,q975,inside,informative\n";
  for (const auto& c : checks) {
    os << c.statistic << ',' << c.bin << ',' << c.observed << ',' << c.envelope.q025 << ',' << c.envelope.q25 << ','
       << c.envelope.q50 << ',' << c.envelope.q75 << ',' << c.envelope.q975 << ',' << c.inside << ','
       << c.informative << '\n';
  }
  return os.str();
}

PpcReport run_ppc(const std::vector<PosteriorDraw>& draws, const DyadTable& holdout, const PpcOptions& options) {
  if (draws.empty()) throw std::invalid_argument("PPC needs at least one posterior draw");
  if (options.replicates < 1) throw std::invalid_argument("PPC needs at least one replicate");
  const int duration = holdout.window().duration();
  const std::size_t reps = options.replicates;

  std::vector<PpcSummary> sims(reps);
  auto simulate = [&](std::size_t r) {
    // Spread replicates evenly over the stored draws.
    const auto& draw = draws[(r * draws.size()) / reps];
    std::seed_seq seq{options.seed, static_cast<std::uint64_t>(r)};
    Rng rng(seq);
    const auto clusters = draw.to_clusters();
    if (clusters.n_individuals() != holdout.n_individuals()) {
      throw std::invalid_argument("draw and holdout table disagree on N");
    }
    sims[r] = summarize(simulate_network(clusters, draw.params, duration, rng), options.clustering);
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, reps));
  if (workers == 1) {
    for (std::size_t r = 0; r < reps; ++r) simulate(r);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t r = w; r < reps; r += workers) simulate(r);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  PpcSummary observed = summarize(holdout, options.clustering);
  PpcReport report;
  report.draws_used = std::min(draws.size(), reps);
  report.replicates = reps;

  auto add_vector = [&](const std::string& name, auto member, auto label) {
    std::size_t length = (observed.*member).size();
    for (const auto& s : sims) length = std::max(length, (s.*member).size());
    for (std::size_t b = 0; b < length; ++b) {
      std::vector<double> values(reps);
      bool any = false;
      for (std::size_t r = 0; r < reps; ++r) {
        values[r] = b < (sims[r].*member).size() ? (sims[r].*member)[b] : 0.0;
        any = any || values[r] != 0.0;
      }
      const double obs = b < (observed.*member).size() ? (observed.*member)[b] : 0.0;
      PpcCheck c;
      c.statistic = name;
      c.bin = label(b, length);
      c.observed = obs;
      c.envelope = envelope_of(std::move(values));
      c.inside = c.envelope.contains(obs);
      c.informative = any || obs != 0.0;
      report.checks.push_back(std::move(c));
    }
  };
  auto index_label = [](std::size_t b, std::size_t) { return std::to_string(b); };
  add_vector("degree", &PpcSummary::degree, index_label);
  add_vector("shared_partners", &PpcSummary::shared_partners, index_label);
  // Geodesic vectors end in the unreachable share; align it across replicates.
  {
    std::size_t length = observed.geodesic.size();
    for (const auto& s : sims) length = std::max(length, s.geodesic.size());
    auto pad = [length](std::vector<double> g) {
      const double unreachable = g.back();
      g.pop_back();
      g.resize(length - 1, 0.0);
      g.push_back(unreachable);
      return g;
    };
    observed.geodesic = pad(observed.geodesic);
    for (auto& s : sims) s.geodesic = pad(s.geodesic);
    add_vector("geodesic", &PpcSummary::geodesic, [](std::size_t b, std::size_t len) {
      return b + 1 == len ? std::string("unreachable") : std::to_string(b);
    });
  }
  add_vector("calls", &PpcSummary::calls,
             [](std::size_t b, std::size_t) { return call_bin_label(call_bins()[b]); });
  auto add_scalar = [&](const std::string& name, double PpcSummary::*member) {
    std::vector<double> values(reps);
    for (std::size_t r = 0; r < reps; ++r) values[r] = sims[r].*member;
    PpcCheck c;
    c.statistic = name;
    c.observed = observed.*member;
    c.envelope = envelope_of(std::move(values));
    c.inside = c.envelope.contains(c.observed);
    report.checks.push_back(std::move(c));
  };
  add_scalar("density", &PpcSummary::density);
  add_scalar("clustering", &PpcSummary::clustering);
  return report;
}

void ConstantScorer::score_row(IndividualId, std::vector<Score>& out) const { out.assign(n_, Score{}); }

void ConditionOnObservedScorer::score_row(IndividualId i, std::vector<Score>& out) const {
  out.assign(calibration_->n_individuals(), Score{});
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (j != i && calibration_->count(i, static_cast<IndividualId>(j)) > 0) out[j].primary = 1.0;
  }
}

void OracleScorer::score_row(IndividualId i, std::vector<Score>& out) const {
  out.assign(holdout_->n_individuals(), Score{});
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (j != i) out[j].primary = static_cast<double>(holdout_->count(i, static_cast<IndividualId>(j)));
  }
}

GeodesicScorer::GeodesicScorer(const DyadTable& calibration, GeodesicTiebreak tiebreak)
    : calibration_(&calibration), tiebreak_(tiebreak), adjacency_(calibration.n_individuals()) {
  for (const auto& [key, y] : calibration.nonempty()) {
    adjacency_[key.i].emplace_back(key.j, y);
    adjacency_[key.j].emplace_back(key.i, y);
  }
}

std::string GeodesicScorer::name() const {
  return tiebreak_ == GeodesicTiebreak::Random ? "geodesic_random_tiebreak" : "geodesic_calls_tiebreak";
}

void GeodesicScorer::score_row(IndividualId i, std::vector<Score>& out) const {
  const std::size_t n = calibration_->n_individuals();
  constexpr auto kUnseen = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> dist(n, kUnseen);
  std::vector<double> volume(n, 0.0);  // best total contacts over shortest paths from i
  std::deque<IndividualId> queue{i};
  dist[i] = 0;
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    for (const auto& [w, y] : adjacency_[u]) {
      if (dist[w] == kUnseen) {
        dist[w] = dist[u] + 1;
        volume[w] = volume[u] + y;
        queue.push_back(w);
      } else if (dist[w] == dist[u] + 1) {
        volume[w] = std::max(volume[w], volume[u] + y);
      }
    }
  }
  out.assign(n, Score{});
  for (std::size_t j = 0; j < n; ++j) {
    out[j].primary = dist[j] == kUnseen ? -std::numeric_limits<double>::infinity() : -static_cast<double>(dist[j]);
    if (tiebreak_ == GeodesicTiebreak::CallVolume) out[j].secondary = volume[j];
  }
}

ModelScorer::ModelScorer(const std::vector<PosteriorDraw>& draws, double calibration_duration, double horizon) {
  if (draws.empty()) throw std::invalid_argument("model scorer needs at least one draw");
  n_ = draws.front().assignment.size();
  variant_ = std::string(to_string(draws.front().params.variant));
  for (const auto& d : draws) {
    if (d.assignment.size() != n_) throw std::invalid_argument("draws disagree on N");
    DrawTable t;
    t.k = d.k();
    t.prob.resize(t.k * t.k);
    t.assignment = &d.assignment;
    for (std::size_t a = 0; a < t.k; ++a) {
      for (std::size_t b = a; b < t.k; ++b) {
        const double dist = a == b ? 0.0 : latent_distance(d.sites[a], d.sites[b]);
        const double p = prob_nonempty_future(calibration_duration, horizon, dyad_params(dist, d.params));
        t.prob[a * t.k + b] = t.prob[b * t.k + a] = p;
      }
    }
    tables_.push_back(std::move(t));
  }
}

std::string ModelScorer::name() const { return "model_" + variant_; }

double ModelScorer::score(IndividualId i, IndividualId j) const {
  double s = 0.0;
  for (const auto& t : tables_) s += t.prob[(*t.assignment)[i] * t.k + (*t.assignment)[j]];
  return s / static_cast<double>(tables_.size());
}

void ModelScorer::score_row(IndividualId i, std::vector<Score>& out) const {
  out.assign(n_, Score{});
  for (const auto& t : tables_) {
    const auto* row = &t.prob[(*t.assignment)[i] * t.k];
    for (std::size_t j = 0; j < n_; ++j) out[j].primary += row[(*t.assignment)[j]];
  }
  for (auto& s : out) s.primary /= static_cast<double>(tables_.size());
}

LiftResult lift(const DyadTable& calibration, const DyadTable& holdout, const DyadScorer& scorer, double q_percent,
                Rng& tiebreak) {
  if (!(q_percent > 0.0 && q_percent < 100.0)) throw std::invalid_argument("Q must lie in (0, 100)");
  if (calibration.n_individuals() != holdout.n_individuals()) {
    throw std::invalid_argument("calibration and holdout disagree on N");
  }
  const std::size_t n = calibration.n_individuals();
  const double q = q_percent / 100.0;

  std::vector<std::vector<IndividualId>> calib_partners(n), hold_partners(n);
  for (const auto& [key, y] : calibration.nonempty()) {
    calib_partners[key.i].push_back(key.j);
    calib_partners[key.j].push_back(key.i);
  }
  for (const auto& [key, y] : holdout.nonempty()) {
    hold_partners[key.i].push_back(key.j);
    hold_partners[key.j].push_back(key.i);
  }

  LiftResult result;
  result.q_percent = q_percent;
  double captured_total = 0.0, macro_sum = 0.0;
  std::vector<Score> scores;
  std::vector<char> excluded(n), converts(n);
  std::vector<IndividualId> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(excluded.begin(), excluded.end(), 0);
    std::fill(converts.begin(), converts.end(), 0);
    excluded[i] = 1;
    for (auto j : calib_partners[i]) excluded[j] = 1;
    std::size_t n_converters = 0;
    for (auto j : hold_partners[i]) {
      if (!excluded[j]) {
        converts[j] = 1;
        ++n_converters;
      }
    }
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (!excluded[j]) candidates.push_back(static_cast<IndividualId>(j));
    }
    if (candidates.empty()) continue;
    // The tie-break shuffle runs for every individual so that the random
    // stream does not depend on which individuals have converters.
    std::shuffle(candidates.begin(), candidates.end(), tiebreak);
    if (n_converters == 0) continue;

    scorer.score_row(static_cast<IndividualId>(i), scores);
    if (scores.size() != n) throw std::invalid_argument("scorer returned a row of the wrong length");
    std::stable_sort(candidates.begin(), candidates.end(), [&](IndividualId a, IndividualId b) {
      if (scores[a].primary != scores[b].primary) return scores[a].primary > scores[b].primary;
      return scores[a].secondary > scores[b].secondary;
    });

    const double top = q * static_cast<double>(candidates.size());
    const auto whole = static_cast<std::size_t>(std::floor(top));
    double captured = 0.0;
    for (std::size_t r = 0; r < whole && r < candidates.size(); ++r) captured += converts[candidates[r]];
    if (whole < candidates.size()) captured += (top - static_cast<double>(whole)) * converts[candidates[whole]];

    captured_total += captured;
    result.converters += n_converters;
    ++result.individuals_with_converters;
    macro_sum += captured / static_cast<double>(n_converters);
  }
  if (result.converters > 0) {
    result.micro = captured_total / static_cast<double>(result.converters);
    result.macro = macro_sum / static_cast<double>(result.individuals_with_converters);
  }
  return result;
}

LiftReport lift_report(const DyadTable& calibration, const DyadTable& holdout,
                       const std::vector<const DyadScorer*>& scorers, const std::vector<double>& q_percents,
                       std::uint64_t seed) {
  LiftReport report;
  report.q_percents = q_percents;
  for (std::size_t s = 0; s < scorers.size(); ++s) {
    report.scorers.push_back(scorers[s]->name());
    std::vector<LiftResult> row;
    for (std::size_t q = 0; q < q_percents.size(); ++q) {
      std::seed_seq seq{seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(q)};
      Rng rng(seq);
      row.push_back(lift(calibration, holdout, *scorers[s], q_percents[q], rng));
    }
    report.results.push_back(std::move(row));
  }
  return report;
}

nlohmann::json LiftReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t s = 0; s < scorers.size(); ++s) {
    for (const auto& r : results[s]) {
      rows.push_back({{"scorer", scorers[s]},
                      {"q_percent", r.q_percent},
                      {"lift_micro", r.micro},
                      {"lift_macro", r.macro},
                      {"individuals_with_converters", r.individuals_with_converters},
                      {"converters", r.converters}});
    }
  }
  return {{"report", "lift"}, {"q_percents", q_percents}, {"rows", rows}};
}

std::string LiftReport::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(10) << "scorer,q_percent,lift_micro,lift_macro,individuals_with_converters,converters\n";
  for (std::size_t s = 0; s < scorers.size(); ++s) {
    for (const auto& r : results[s]) {
      os << scorers[s] << ',' << r.q_percent << ',' << r.micro << ',' << r.macro << ','
         << r.individuals_with_converters << ',' << r.converters << '\n';
    }
  }
  return os.str();
}

double spearman_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need two equal-length samples");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> posterior_mean_open_probability(const std::vector<PosteriorDraw>& draws) {
  if (draws.empty()) throw std::invalid_argument("need at least one draw");
  const std::size_t n = draws.front().assignment.size();
  std::vector<double> mean(dyad_count(n), 0.0);
  for (const auto& d : draws) {
    const std::size_t k = d.k();
    std::vector<double> p(k * k);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a; b < k; ++b) {
        const double dist = a == b ? 0.0 : latent_distance(d.sites[a], d.sites[b]);
        p[a * k + b] = p[b * k + a] = dyad_params(dist, d.params).p;
      }
    }
    std::size_t idx = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) mean[idx++] += p[d.assignment[i] * k + d.assignment[j]];
    }
  }
  for (auto& x : mean) x /= static_cast<double>(draws.size());
  return mean;
}

}  // namespace latentdyad

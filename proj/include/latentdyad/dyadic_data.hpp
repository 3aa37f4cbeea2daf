#pragma once

#include <cstddef>
#include <cstdint>
#include <compare>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace latentdyad {

using IndividualId = std::uint32_t;

struct InteractionRecord {
  IndividualId a = 0;
  IndividualId b = 0;
  int week = 0;
};

// Half-open week range [start_week, end_week).
struct ObservationWindow {
  int start_week = 0;
  int end_week = 0;

  int duration() const { return end_week - start_week; }
  bool contains(int week) const { return week >= start_week && week < end_week; }
};

// Undirected dyad, always stored with i < j.
struct DyadKey {
  IndividualId i = 0;
  IndividualId j = 0;

  static DyadKey of(IndividualId a, IndividualId b);
  auto operator<=>(const DyadKey&) const = default;
};

inline std::uint64_t dyad_count(std::size_t n) {
  return static_cast<std::uint64_t>(n) * (n == 0 ? 0 : n - 1) / 2;
}

// Per-dyad contact counts over one observation window. Only nonempty
// dyads are stored; the empty count is implied by N.
class DyadTable {
 public:
  using CountMap = std::map<DyadKey, std::uint32_t>;

  DyadTable() = default;
  DyadTable(std::size_t n_individuals, ObservationWindow window);

  void add_contacts(DyadKey key, std::uint32_t count = 1);

  std::size_t n_individuals() const { return n_; }
  const ObservationWindow& window() const { return window_; }
  double duration() const { return window_.duration(); }
  const CountMap& nonempty() const { return nonempty_; }
  std::size_t n_nonempty() const { return nonempty_.size(); }
  std::uint64_t n_dyads() const { return dyad_count(n_); }
  std::uint64_t n_empty() const { return n_dyads() - nonempty_.size(); }
  std::uint64_t total_contacts() const;

  // Zero for empty dyads.
  std::uint32_t count(IndividualId a, IndividualId b) const;

 private:
  std::size_t n_ = 0;
  ObservationWindow window_;
  CountMap nonempty_;
};

struct IdPolicy {
  enum class Order { FirstSeen, Sorted };
  Order order = Order::FirstSeen;
  // When set, rows touching ids outside this set are dropped.
  std::optional<std::unordered_set<std::string>> universe;
};

struct IngestResult {
  std::vector<InteractionRecord> records;
  std::size_t n_individuals = 0;
  std::vector<std::string> ids;  // dense index -> original id
  std::size_t self_contacts_dropped = 0;
  std::size_t out_of_network_dropped = 0;
  int min_week = 0;
  int max_week = 0;
};

// Reads `caller_id,callee_id,week` CSV. Throws DataError with the line number
// on malformed rows, and on a stream with no data rows.
IngestResult ingest_records(std::istream& in, const IdPolicy& policy = {});

DyadTable build_dyad_table(const std::vector<InteractionRecord>& records, std::size_t n_individuals,
                           ObservationWindow window);

struct WindowSplit {
  DyadTable calibration;
  DyadTable holdout;
};

WindowSplit split_windows(const std::vector<InteractionRecord>& records, std::size_t n_individuals,
                          ObservationWindow span, int boundary_week);

struct TransitionCounts {
  std::uint64_t nonempty_to_nonempty = 0;
  std::uint64_t nonempty_to_empty = 0;
  std::uint64_t empty_to_nonempty = 0;
  std::uint64_t empty_to_empty = 0;
};

TransitionCounts dyad_transition_counts(const DyadTable& calibration, const DyadTable& holdout);

// Table restricted to individuals in `keep` (renumbered in the given order).
DyadTable induced_subtable(const DyadTable& table, const std::vector<IndividualId>& keep);

}  // namespace latentdyad

#include "latentdyad/dyadic_data.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <unordered_map>

#include "latentdyad/error.hpp"

namespace latentdyad {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

[[noreturn]] void fail_at(std::size_t line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

DyadKey DyadKey::of(IndividualId a, IndividualId b) {
  if (a == b) throw DataError("dyad requires two distinct individuals");
  return a < b ? DyadKey{a, b} : DyadKey{b, a};
}

DyadTable::DyadTable(std::size_t n_individuals, ObservationWindow window)
    : n_(n_individuals), window_(window) {
  if (window.duration() <= 0) throw DataError("observation window must have positive duration");
}

void DyadTable::add_contacts(DyadKey key, std::uint32_t count) {
  if (key.i >= key.j) throw DataError("dyad key not canonical");
  if (key.j >= n_) throw DataError("dyad references individual outside table");
  if (count == 0) return;
  nonempty_[key] += count;
}

std::uint64_t DyadTable::total_contacts() const {
  std::uint64_t total = 0;
  for (const auto& [key, y] : nonempty_) total += y;
  return total;
}

std::uint32_t DyadTable::count(IndividualId a, IndividualId b) const {
  if (a == b) return 0;
  const auto it = nonempty_.find(DyadKey::of(a, b));
  return it == nonempty_.end() ? 0 : it->second;
}

IngestResult ingest_records(std::istream& in, const IdPolicy& policy) {
  struct RawRow {
    std::string a, b;
    int week;
  };
  std::vector<RawRow> rows;
  IngestResult result;

  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view);
    if (!seen_header) {
      if (fields.size() != 3 || fields[0] != "caller_id" || fields[1] != "callee_id" ||
          fields[2] != "week") {
        fail_at(line_no, "expected header 'caller_id,callee_id,week'");
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != 3) fail_at(line_no, "expected 3 fields, got " + std::to_string(fields.size()));
    if (fields[0].empty() || fields[1].empty()) fail_at(line_no, "empty individual id");
    int week = 0;
    const auto* end = fields[2].data() + fields[2].size();
    const auto [ptr, ec] = std::from_chars(fields[2].data(), end, week);
    if (ec != std::errc{} || ptr != end) fail_at(line_no, "week is not an integer");
    if (week < 0) fail_at(line_no, "week must be nonnegative");
    std::string a(fields[0]), b(fields[1]);
    if (policy.universe && (!policy.universe->count(a) || !policy.universe->count(b))) {
      ++result.out_of_network_dropped;
      continue;
    }
    rows.push_back({std::move(a), std::move(b), week});
  }
  if (rows.empty() && result.out_of_network_dropped == 0) {
    throw DataError("input contains no contact records");
  }

  std::unordered_map<std::string, IndividualId> index;
  auto intern = [&](const std::string& id) {
    if (index.emplace(id, static_cast<IndividualId>(result.ids.size())).second) result.ids.push_back(id);
  };
  for (const auto& row : rows) {
    intern(row.a);
    intern(row.b);
  }
  if (policy.order == IdPolicy::Order::Sorted) {
    std::sort(result.ids.begin(), result.ids.end());
    for (std::size_t k = 0; k < result.ids.size(); ++k) index[result.ids[k]] = static_cast<IndividualId>(k);
  }
  result.n_individuals = result.ids.size();

  result.min_week = std::numeric_limits<int>::max();
  result.max_week = std::numeric_limits<int>::min();
  for (const auto& row : rows) {
    result.min_week = std::min(result.min_week, row.week);
    result.max_week = std::max(result.max_week, row.week);
    if (row.a == row.b) {
      ++result.self_contacts_dropped;
      continue;
    }
    result.records.push_back({index.at(row.a), index.at(row.b), row.week});
  }
  if (rows.empty()) result.min_week = result.max_week = 0;
  return result;
}

DyadTable build_dyad_table(const std::vector<InteractionRecord>& records, std::size_t n_individuals,
                           ObservationWindow window) {
  DyadTable table(n_individuals, window);
  for (const auto& r : records) {
    if (!window.contains(r.week)) {
      throw DataError("record in week " + std::to_string(r.week) + " outside window [" +
                      std::to_string(window.start_week) + ", " + std::to_string(window.end_week) + ")");
    }
    table.add_contacts(DyadKey::of(r.a, r.b));
  }
  return table;
}

WindowSplit split_windows(const std::vector<InteractionRecord>& records, std::size_t n_individuals,
                          ObservationWindow span, int boundary_week) {
  if (boundary_week <= span.start_week || boundary_week >= span.end_week) {
    throw DataError("boundary week " + std::to_string(boundary_week) + " not strictly inside [" +
                    std::to_string(span.start_week) + ", " + std::to_string(span.end_week) + ")");
  }
  const ObservationWindow calib{span.start_week, boundary_week};
  const ObservationWindow hold{boundary_week, span.end_week};
  WindowSplit out{DyadTable(n_individuals, calib), DyadTable(n_individuals, hold)};
  for (const auto& r : records) {
    if (!span.contains(r.week)) throw DataError("record in week " + std::to_string(r.week) + " outside span");
    (calib.contains(r.week) ? out.calibration : out.holdout).add_contacts(DyadKey::of(r.a, r.b));
  }
  return out;
}

TransitionCounts dyad_transition_counts(const DyadTable& calibration, const DyadTable& holdout) {
  if (calibration.n_individuals() != holdout.n_individuals()) {
    throw DataError("calibration and holdout tables have different N");
  }
  TransitionCounts c;
  for (const auto& [key, y] : calibration.nonempty()) {
    if (holdout.nonempty().count(key)) {
      ++c.nonempty_to_nonempty;
    } else {
      ++c.nonempty_to_empty;
    }
  }
  c.empty_to_nonempty = holdout.n_nonempty() - c.nonempty_to_nonempty;
  c.empty_to_empty = calibration.n_dyads() - c.nonempty_to_nonempty - c.nonempty_to_empty - c.empty_to_nonempty;
  return c;
}

DyadTable induced_subtable(const DyadTable& table, const std::vector<IndividualId>& keep) {
  constexpr auto kAbsent = std::numeric_limits<IndividualId>::max();
  std::vector<IndividualId> remap(table.n_individuals(), kAbsent);
  for (std::size_t k = 0; k < keep.size(); ++k) {
    if (keep[k] >= table.n_individuals()) throw DataError("subset id outside table");
    if (remap[keep[k]] != kAbsent) throw DataError("duplicate id in subset");
    remap[keep[k]] = static_cast<IndividualId>(k);
  }
  DyadTable out(keep.size(), table.window());
  for (const auto& [key, y] : table.nonempty()) {
    const auto a = remap[key.i], b = remap[key.j];
    if (a != kAbsent && b != kAbsent) out.add_contacts(DyadKey::of(a, b), y);
  }
  return out;
}

}  // namespace latentdyad

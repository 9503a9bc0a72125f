// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <map>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "blockpulse/error.hpp"
#include "blockpulse/ipv4.hpp"

namespace blockpulse {

/// One probe result: a single address in a /24 probed by one observer at one time.
struct ObservationRecord {
  std::int64_t timestamp = 0;  // seconds since the Unix epoch
  std::string observer;
  Block24 block;
  std::uint8_t offset = 0;
  bool response = false;

  friend bool operator==(const ObservationRecord&, const ObservationRecord&) = default;
};

/// Sort key used by every merge: time, then observer id, then offset.
inline auto merge_key(const ObservationRecord& r) { return std::tie(r.timestamp, r.observer, r.offset); }

struct ObserverStream {
  std::string observer;
  std::vector<ObservationRecord> records;
};

/// Offsets that have historically responded in a block; the only ones tracked.
struct EverActiveList {
  Block24 block;
  std::vector<std::uint8_t> offsets;  // sorted, unique

  bool contains(std::uint8_t off) const { return std::binary_search(offsets.begin(), offsets.end(), off); }
  std::size_t size() const { return offsets.size(); }
  friend bool operator==(const EverActiveList&, const EverActiveList&) = default;
};

using EverActiveTable = std::map<Block24, EverActiveList>;

/// A non-fatal finding about one input line or block.
struct Diagnostic {
  std::size_t line = 0;  // 0 when not tied to an input line
  std::string message;
};

struct ParsedObservations {
  std::vector<ObservationRecord> records;
  std::vector<Diagnostic> rejected;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

/// Calls fn(line_number, line) for every non-blank, non-comment line.
template <typename Fn>
void for_each_data_line(std::string_view text, Fn&& fn) {
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    ++lineno;
    pos = nl + 1;
    std::size_t first = line.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || line[first] == '#') continue;
    fn(lineno, line);
  }
}

}  // namespace detail

/// Parses the observation text format:
///   <timestamp> <observer_id> <a.b.c.0/24> <offset> <0|1>
/// Lines starting with '#' are comments. A malformed field throws ParseError;
/// an offset outside [0,255] rejects only that line.
inline ParsedObservations parse_observations(std::string_view text) {
  ParsedObservations out;
  detail::for_each_data_line(text, [&](std::size_t lineno, std::string_view line) {
    auto f = detail::split_ws(line);
    if (f.size() != 5) throw ParseError(lineno, "record", "expected 5 fields, got " + std::to_string(f.size()));
    ObservationRecord r;
    if (!detail::parse_number(f[0], r.timestamp) || r.timestamp <= 0)
      throw ParseError(lineno, "timestamp", "not a positive integer: " + std::string(f[0]));
    r.observer = std::string(f[1]);
    auto block = parse_block(f[2]);
    if (!block) throw ParseError(lineno, "block", "not an a.b.c.0/24 prefix: " + std::string(f[2]));
    r.block = *block;
    long long off = 0;
    if (!detail::parse_number(f[3], off)) throw ParseError(lineno, "offset", "not an integer: " + std::string(f[3]));
    if (f[4] != "0" && f[4] != "1") throw ParseError(lineno, "response", "expected 0 or 1: " + std::string(f[4]));
    if (off < 0 || off > 255) {
      out.rejected.push_back({lineno, "offset out of range: " + std::string(f[3])});
      return;
    }
    r.offset = static_cast<std::uint8_t>(off);
    r.response = f[4] == "1";
    out.records.push_back(std::move(r));
  });
  return out;
}

inline void write_observation(std::ostream& os, const ObservationRecord& r) {
  os << r.timestamp << ' ' << r.observer << ' ' << to_string(r.block) << ' ' << int(r.offset) << ' '
     << (r.response ? '1' : '0') << '\n';
}

inline std::string serialize_observations(std::span<const ObservationRecord> records) {
  std::ostringstream os;
  for (const auto& r : records) write_observation(os, r);
  return os.str();
}

/// Parses "<a.b.c.0/24> <comma-separated offsets>" lines.
inline EverActiveTable parse_ever_active(std::string_view text) {
  EverActiveTable table;
  detail::for_each_data_line(text, [&](std::size_t lineno, std::string_view line) {
    auto f = detail::split_ws(line);
    if (f.empty() || f.size() > 2) throw ParseError(lineno, "record", "expected <block> <offsets>");
    auto block = parse_block(f[0]);
    if (!block) throw ParseError(lineno, "block", "not an a.b.c.0/24 prefix: " + std::string(f[0]));
    if (table.count(*block)) throw ParseError(lineno, "block", "duplicate entry for " + std::string(f[0]));
    EverActiveList list{*block, {}};
    std::string_view rest = f.size() == 2 ? f[1] : std::string_view{};
    while (!rest.empty()) {
      auto comma = rest.find(',');
      auto tok = rest.substr(0, comma);
      int off = -1;
      if (!detail::parse_number(tok, off) || off < 0 || off > 255)
        throw ParseError(lineno, "offsets", "bad offset: " + std::string(tok));
      list.offsets.push_back(static_cast<std::uint8_t>(off));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
    std::sort(list.offsets.begin(), list.offsets.end());
    list.offsets.erase(std::unique(list.offsets.begin(), list.offsets.end()), list.offsets.end());
    table.emplace(*block, std::move(list));
  });
  return table;
}

inline std::string serialize_ever_active(const EverActiveTable& table) {
  std::ostringstream os;
  for (const auto& [block, list] : table) {
    os << to_string(block) << ' ';
    for (std::size_t i = 0; i < list.offsets.size(); ++i) os << (i ? "," : "") << int(list.offsets[i]);
    os << '\n';
  }
  return os.str();
}

/// Splits a record sequence into per-observer streams, preserving order.
/// Streams come back sorted by observer id.
inline std::vector<ObserverStream> split_by_observer(std::span<const ObservationRecord> records) {
  std::map<std::string, std::vector<ObservationRecord>> by;
  for (const auto& r : records) by[r.observer].push_back(r);
  std::vector<ObserverStream> out;
  for (auto& [id, recs] : by) out.push_back({id, std::move(recs)});
  return out;
}

/// Throws ValidationError naming observer and position if timestamps decrease.
inline void validate_stream(const ObserverStream& s) {
  for (std::size_t i = 1; i < s.records.size(); ++i) {
    if (s.records[i].timestamp < s.records[i - 1].timestamp)
      throw ValidationError("observer " + s.observer + ": timestamp decreases at position " + std::to_string(i) +
                            " (" + std::to_string(s.records[i - 1].timestamp) + " -> " +
                            std::to_string(s.records[i].timestamp) + ")");
  }
}

using MergedObservations = std::map<Block24, std::vector<ObservationRecord>>;

/// K-way merge of time-ordered observer streams into one ordered sequence per block.
/// Ties at equal timestamps break by observer id, then offset.
inline MergedObservations merge_streams(std::span<const ObserverStream> streams) {
  // Equal-time records inside one stream are put in offset order first.
  auto by_key = [](const ObservationRecord& a, const ObservationRecord& b) { return merge_key(a) < merge_key(b); };
  std::vector<std::vector<ObservationRecord>> reordered;
  std::vector<std::span<const ObservationRecord>> views;
  reordered.reserve(streams.size());
  for (const auto& s : streams) {
    validate_stream(s);
    if (std::is_sorted(s.records.begin(), s.records.end(), by_key)) {
      views.emplace_back(s.records);
    } else {
      auto& copy = reordered.emplace_back(s.records);
      std::stable_sort(copy.begin(), copy.end(), by_key);
      views.emplace_back(copy);
    }
  }

  // (stream index, position) cursor; the heap orders by record key then stream index.
  using Cursor = std::pair<std::size_t, std::size_t>;
  auto later = [&](const Cursor& a, const Cursor& b) {
    const auto& ra = views[a.first][a.second];
    const auto& rb = views[b.first][b.second];
    if (merge_key(ra) != merge_key(rb)) return merge_key(ra) > merge_key(rb);
    return a > b;
  };
  std::priority_queue<Cursor, std::vector<Cursor>, decltype(later)> heap(later);
  for (std::size_t i = 0; i < views.size(); ++i)
    if (!views[i].empty()) heap.emplace(i, 0);

  MergedObservations out;
  while (!heap.empty()) {
    auto [si, pos] = heap.top();
    heap.pop();
    const auto& rec = views[si][pos];
    out[rec.block].push_back(rec);
    if (pos + 1 < views[si].size()) heap.emplace(si, pos + 1);
  }
  return out;
}

/// Collapses repeated probes of one (observer, offset) at one timestamp, keeping
/// the last record of each group. Input must be merge-ordered for a single block.
inline std::vector<ObservationRecord> drop_duplicate_probes(std::vector<ObservationRecord> recs,
                                                            std::vector<Diagnostic>& diags) {
  std::vector<ObservationRecord> out;
  out.reserve(recs.size());
  for (auto& r : recs) {
    if (!out.empty() && merge_key(out.back()) == merge_key(r)) {
      diags.push_back({0, "duplicate probe " + to_string(r.block) + " offset " + std::to_string(r.offset) +
                              " observer " + r.observer + " at " + std::to_string(r.timestamp) + "; kept last"});
      out.back() = std::move(r);
    } else {
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// Flags records whose offset is not in the block's ever-active list. In strict
/// mode such records are dropped; otherwise they are kept.
inline std::vector<ObservationRecord> screen_ever_active(std::vector<ObservationRecord> recs,
                                                         const EverActiveList& list, bool strict,
                                                         std::vector<Diagnostic>& diags) {
  std::size_t outside = 0;
  std::erase_if(recs, [&](const ObservationRecord& r) {
    if (list.contains(r.offset)) return false;
    ++outside;
    return strict;
  });
  if (outside)
    diags.push_back({0, to_string(list.block) + ": " + std::to_string(outside) +
                            " record(s) outside ever-active list" + (strict ? " dropped" : " kept")});
  return recs;
}

}  // namespace blockpulse

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "blockpulse/observation.hpp"

namespace blockpulse {

/// Length of one probing round in seconds (11 minutes).
inline constexpr std::int64_t kRoundSeconds = 660;

enum class AddressState : std::uint8_t { unknown, down, up };

/// Floor division for round indexing; timestamps may precede the anchor.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

/// Tri-state per-address view of one block. Only ever-active offsets count.
class AddressStateVector {
 public:
  explicit AddressStateVector(const EverActiveList& list) : block_(list.block) {
    for (auto off : list.offsets) tracked_[off] = true;
    unknown_ = list.offsets.size();
  }

  Block24 block() const { return block_; }
  AddressState state(std::uint8_t off) const { return state_[off]; }
  std::int64_t last_update(std::uint8_t off) const { return last_update_[off]; }
  bool tracked(std::uint8_t off) const { return tracked_[off]; }

  std::size_t up_count() const { return up_; }
  std::size_t unknown_count() const { return unknown_; }
  bool warmed_up() const { return unknown_ == 0; }

  /// Records one probe. Untracked offsets update their own slot but never the counts.
  void apply(const ObservationRecord& rec) {
    const auto off = rec.offset;
    const auto next = rec.response ? AddressState::up : AddressState::down;
    if (tracked_[off]) {
      if (state_[off] == AddressState::unknown) --unknown_;
      if (state_[off] == AddressState::up) --up_;
      if (next == AddressState::up) ++up_;
    }
    state_[off] = next;
    last_update_[off] = rec.timestamp;
  }

  friend bool operator==(const AddressStateVector&, const AddressStateVector&) = default;

 private:
  Block24 block_;
  std::array<AddressState, 256> state_{};
  std::array<std::int64_t, 256> last_update_{};
  std::array<bool, 256> tracked_{};
  std::size_t up_ = 0;
  std::size_t unknown_ = 0;
};

inline AddressStateVector apply_observation(AddressStateVector state, const ObservationRecord& rec) {
  state.apply(rec);
  return state;
}

struct CountSample {
  std::int64_t timestamp = 0;
  int count = 0;
  friend bool operator==(const CountSample&, const CountSample&) = default;
};

/// Per-round active-address counts for one block, starting at warm-up end.
struct ActiveCountSeries {
  Block24 block;
  std::size_t ever_active_size = 0;
  std::int64_t warm_up_end = 0;
  std::int64_t interval = kRoundSeconds;
  std::vector<CountSample> samples;

  bool empty() const { return samples.empty(); }
  friend bool operator==(const ActiveCountSeries&, const ActiveCountSeries&) = default;
};

struct SeriesResult {
  ActiveCountSeries series;
  std::optional<std::string> diagnostic;
};

/// Rounds with no observation for longer than this are left out of the series.
inline constexpr std::int64_t kMaxHoldSeconds = 86400;

/// Replays time-ordered observations for one block and emits one sample per round
/// once every ever-active offset has been seen. Rounds sit on a fixed grid anchored
/// at `anchor`; the sample for round r is stamped anchor + r*660 and holds the count
/// after all of that round's observations. Between observations the last count is
/// repeated, except across observation gaps longer than a day.
inline SeriesResult emit_series(const EverActiveList& list, std::span<const ObservationRecord> observations,
                                std::int64_t anchor) {
  SeriesResult out;
  out.series.block = list.block;
  out.series.ever_active_size = list.size();
  if (list.offsets.empty()) {
    out.diagnostic = to_string(list.block) + ": empty ever-active list; block dropped";
    return out;
  }

  AddressStateVector state(list);
  std::optional<std::int64_t> last_round;
  std::int64_t last_obs_time = 0;
  bool warm = false;

  auto emit_round = [&](std::int64_t r) {
    out.series.samples.push_back({anchor + r * kRoundSeconds, static_cast<int>(state.up_count())});
  };

  std::size_t i = 0;
  while (i < observations.size()) {
    const std::int64_t r = floor_div(observations[i].timestamp - anchor, kRoundSeconds);
    // Hold the previous count through rounds without observations.
    if (warm && last_round) {
      for (std::int64_t q = *last_round + 1; q < r; ++q) {
        if (anchor + q * kRoundSeconds - last_obs_time > kMaxHoldSeconds) break;
        emit_round(q);
      }
    }
    while (i < observations.size() && floor_div(observations[i].timestamp - anchor, kRoundSeconds) == r) {
      state.apply(observations[i]);
      last_obs_time = observations[i].timestamp;
      ++i;
    }
    if (!warm && state.warmed_up()) {
      warm = true;
      out.series.warm_up_end = anchor + r * kRoundSeconds;
    }
    if (warm) emit_round(r);
    last_round = r;
  }
  if (!warm)
    out.diagnostic = to_string(list.block) + ": warm-up incomplete, " + std::to_string(state.unknown_count()) +
                     " of " + std::to_string(list.size()) + " ever-active offsets never observed";
  return out;
}

/// Time to observe every ever-active offset at least once.
struct ScanLatency {
  Block24 block;
  std::set<std::string> observers;
  bool complete = false;
  std::int64_t rounds = 0;      // probing rounds spanned, inclusive of first and last
  std::int64_t duration_s = 0;  // rounds * 660
};

/// Measures full-scan time from the round of the first observation (or `start`,
/// when given) using only records from `observers` (all records when empty).
inline ScanLatency full_scan_time(const EverActiveList& list, std::span<const ObservationRecord> observations,
                                  const std::set<std::string>& observers, std::int64_t anchor,
                                  std::optional<std::int64_t> start = std::nullopt) {
  ScanLatency out;
  out.block = list.block;
  out.observers = observers;
  std::array<bool, 256> seen{};
  std::size_t remaining = list.size();
  std::optional<std::int64_t> first_round;
  if (start) first_round = floor_div(*start - anchor, kRoundSeconds);
  for (const auto& rec : observations) {
    if (!observers.empty() && !observers.count(rec.observer)) continue;
    if (start && rec.timestamp < *start) continue;
    const auto r = floor_div(rec.timestamp - anchor, kRoundSeconds);
    if (!first_round) first_round = r;
    if (list.contains(rec.offset) && !seen[rec.offset]) {
      seen[rec.offset] = true;
      if (--remaining == 0) {
        out.complete = true;
        out.rounds = r - *first_round + 1;
        out.duration_s = out.rounds * kRoundSeconds;
        return out;
      }
    }
  }
  return out;
}

/// Reconstructs one block from several observers' streams.
inline SeriesResult fuse_observers(const EverActiveList& list, std::span<const ObserverStream> streams,
                                   std::int64_t anchor) {
  auto merged = merge_streams(streams);
  auto it = merged.find(list.block);
  if (it == merged.end()) return emit_series(list, {}, anchor);
  return emit_series(list, it->second, anchor);
}

// Series file: per block a header line, then "<block> <round_timestamp> <count>".
//   # block 2.0.2.0/24 ever_active 3 warm_up_end 1577836800 interval 660

inline void write_series(std::ostream& os, const ActiveCountSeries& s) {
  const auto name = to_string(s.block);
  os << "# block " << name << " ever_active " << s.ever_active_size << " warm_up_end " << s.warm_up_end
     << " interval " << s.interval << '\n';
  for (const auto& smp : s.samples) os << name << ' ' << smp.timestamp << ' ' << smp.count << '\n';
}

inline std::vector<ActiveCountSeries> parse_series(std::string_view text) {
  std::vector<ActiveCountSeries> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    auto f = detail::split_ws(line);
    if (f.empty()) continue;
    if (f[0] == "#") {
      if (f.size() != 9 || f[1] != "block") throw ParseError(lineno, "header", "malformed series header");
      ActiveCountSeries s;
      auto b = parse_block(f[2]);
      if (!b) throw ParseError(lineno, "block", "bad block");
      s.block = *b;
      if (!detail::parse_number(f[4], s.ever_active_size) || !detail::parse_number(f[6], s.warm_up_end) ||
          !detail::parse_number(f[8], s.interval))
        throw ParseError(lineno, "header", "bad numeric field");
      out.push_back(std::move(s));
      continue;
    }
    if (out.empty()) throw ParseError(lineno, "record", "sample before any block header");
    if (f.size() != 3) throw ParseError(lineno, "record", "expected 3 fields");
    auto b = parse_block(f[0]);
    if (!b || *b != out.back().block) throw ParseError(lineno, "block", "does not match header");
    CountSample smp;
    if (!detail::parse_number(f[1], smp.timestamp)) throw ParseError(lineno, "round_timestamp", "not an integer");
    if (!detail::parse_number(f[2], smp.count)) throw ParseError(lineno, "active_count", "not an integer");
    out.back().samples.push_back(smp);
  }
  return out;
}

}  // namespace blockpulse

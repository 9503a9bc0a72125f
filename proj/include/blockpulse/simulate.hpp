// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "blockpulse/reconstruct.hpp"
#include "blockpulse/timegrid.hpp"

namespace blockpulse {

/// A scheduled shift in a block's usage, effective from `day` (days after span start).
struct ProfileChange {
  int day = 0;
  int baseline = 0;
  int amplitude = 0;
};

/// Ground-truth behaviour of one simulated block. Address i (by position in
/// the ever-active list) is up during work hours on work days iff
/// i < baseline + amplitude, otherwise iff i < baseline.
struct BlockProfile {
  Block24 block;
  int size = 256;  // ever-active addresses, offsets 0..size-1
  int baseline = 0;
  int amplitude = 0;
  std::uint8_t workdays = 0b0011111;  // bit d set = weekday d works, Monday = bit 0
  double work_start_hour = 9;         // UTC
  double work_end_hour = 17;
  double noise = 0;  // per address, per round flip probability
  std::optional<ProfileChange> change;
  std::optional<LatLon> location;

  /// Throws std::invalid_argument when the profile is inconsistent.
  void validate() const {
    auto fail = [&](const std::string& why) { throw std::invalid_argument(to_string(block) + ": " + why); };
    if (size < 1 || size > 256) fail("size must be in [1,256]");
    if (baseline < 0 || amplitude < 0 || baseline + amplitude > size) fail("baseline + amplitude exceeds size");
    if (!(noise >= 0 && noise <= 1)) fail("noise must be in [0,1]");
    if (!(work_start_hour >= 0 && work_end_hour <= 24 && work_start_hour <= work_end_hour)) fail("bad work hours");
    if (change) {
      if (change->day < 0) fail("change day must be non-negative");
      if (change->baseline < 0 || change->amplitude < 0 || change->baseline + change->amplitude > size)
        fail("changed baseline + amplitude exceeds size");
    }
  }

  EverActiveList ever_active() const {
    EverActiveList l{block, {}};
    for (int i = 0; i < size; ++i) l.offsets.push_back(static_cast<std::uint8_t>(i));
    return l;
  }
};

/// Monday = 0.
constexpr int weekday(std::int64_t utc_day_number) { return static_cast<int>((utc_day_number % 7 + 7 + 3) % 7); }

struct TruthSeries {
  Block24 block;
  std::int64_t start = 0;  // timestamp of round 0
  int size = 0;
  std::vector<int> counts;             // up-count per round
  std::vector<std::uint8_t> states;    // rounds x size, row-major, 1 = up

  std::size_t rounds() const { return counts.size(); }
  bool up(std::size_t round, int addr) const { return states[round * size + addr] != 0; }
  std::int64_t round_time(std::size_t r) const { return start + static_cast<std::int64_t>(r) * kRoundSeconds; }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Uniform [0,1) from the top 53 bits; identical across standard libraries.
inline double unit(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Independent per-block stream seed.
inline std::uint64_t block_seed(std::uint64_t seed, Block24 block, std::uint64_t salt = 0) {
  return detail::splitmix64(seed ^ detail::splitmix64(block.prefix + (salt << 32)));
}

/// Active-address target for a profile at time t.
inline int scheduled_active(const BlockProfile& p, std::int64_t span_start, std::int64_t t) {
  int baseline = p.baseline, amplitude = p.amplitude;
  const auto day = utc_day(t);
  if (p.change && day - utc_day(span_start) >= p.change->day) {
    baseline = p.change->baseline;
    amplitude = p.change->amplitude;
  }
  const double hour = double(t - day * kDaySeconds) / 3600.0;
  const bool working = ((p.workdays >> weekday(day)) & 1) && hour >= p.work_start_hour && hour < p.work_end_hour;
  return working ? baseline + amplitude : baseline;
}

/// Per-round ground truth over `days` days from `start`. Deterministic in seed.
inline TruthSeries gen_truth(const BlockProfile& p, std::int64_t start, int days, std::uint64_t seed) {
  p.validate();
  if (days < 7) throw std::invalid_argument("span must be at least 7 days");
  TruthSeries t;
  t.block = p.block;
  t.start = start;
  t.size = p.size;
  const auto rounds = static_cast<std::size_t>(days * kDaySeconds / kRoundSeconds);
  t.counts.resize(rounds);
  t.states.resize(rounds * p.size);
  std::mt19937_64 rng(block_seed(seed, p.block, 1));
  for (std::size_t r = 0; r < rounds; ++r) {
    const int active = scheduled_active(p, start, t.round_time(r));
    int count = 0;
    for (int i = 0; i < p.size; ++i) {
      bool up = i < active;
      if (p.noise > 0 && detail::unit(rng) < p.noise) up = !up;
      t.states[r * p.size + i] = up;
      count += up;
    }
    t.counts[r] = count;
  }
  return t;
}

struct ProbePolicy {
  int budget = 15;  // probes per round, 1..16
  bool stop_on_first_positive = true;
  std::int64_t probe_spacing = 3;  // seconds between probes within a round
  int max_jitter = 10;             // per-round start jitter in seconds, [0, max_jitter)

  void validate() const {
    if (budget < 1 || budget > 16) throw std::invalid_argument("probe budget must be in [1,16]");
  }
};

/// Observer tags in the order they are assigned.
inline std::string observer_id(int i) {
  static constexpr const char* names[] = {"w", "j", "n", "e", "g"};
  return i < 5 ? names[i] : "o" + std::to_string(i);
}

/// Simulates k independent observers walking the ever-active list round-robin.
/// Observer i starts i/k of the way through the list and i/k of the way into
/// each round. Each round it probes consecutive addresses until the budget is
/// spent or, with stop-on-first-positive, until one replies; the walk resumes
/// where it stopped in the next round.
inline std::vector<ObserverStream> gen_probing(const TruthSeries& truth, const EverActiveList& list,
                                               const ProbePolicy& policy, int observers, std::uint64_t seed) {
  policy.validate();
  if (observers < 1) throw std::invalid_argument("need at least one observer");
  if (static_cast<int>(list.size()) != truth.size) throw std::invalid_argument("ever-active list size mismatch");
  const int n = truth.size;
  std::vector<ObserverStream> streams;
  for (int o = 0; o < observers; ++o) {
    ObserverStream s{observer_id(o), {}};
    std::mt19937_64 rng(block_seed(seed, truth.block, 100 + o));
    const std::int64_t phase = kRoundSeconds * o / observers;
    std::int64_t cursor = static_cast<std::int64_t>(n) * o / observers;
    s.records.reserve(truth.rounds() * 2);
    for (std::size_t r = 0; r < truth.rounds(); ++r) {
      const std::int64_t jitter = policy.max_jitter > 0 ? static_cast<std::int64_t>(rng() % policy.max_jitter) : 0;
      const std::int64_t t0 = truth.round_time(r) + phase + jitter;
      for (int j = 0; j < policy.budget; ++j) {
        const int idx = static_cast<int>(cursor % n);
        ++cursor;
        const bool up = truth.up(r, idx);
        s.records.push_back({t0 + j * policy.probe_spacing, s.observer, truth.block, list.offsets[idx], up});
        if (up && policy.stop_on_first_positive) break;
      }
    }
    streams.push_back(std::move(s));
  }
  std::sort(streams.begin(), streams.end(), [](auto& a, auto& b) { return a.observer < b.observer; });
  return streams;
}

/// Pearson correlation; nullopt when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(n);
  my /= double(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0 || syy <= 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

/// Correlates a reconstruction with ground truth on the truth's round grid.
/// Throws InsufficientData when the overlap is shorter than two days.
inline std::optional<double> reconstruction_correlation(const TruthSeries& truth,
                                                        const ActiveCountSeries& reconstructed) {
  std::vector<double> a, b;
  for (const auto& smp : reconstructed.samples) {
    const auto r = floor_div(smp.timestamp - truth.start, kRoundSeconds);
    if (r < 0 || r >= static_cast<std::int64_t>(truth.rounds())) continue;
    a.push_back(truth.counts[r]);
    b.push_back(smp.count);
  }
  if (static_cast<std::int64_t>(a.size()) * kRoundSeconds < 2 * kDaySeconds)
    throw InsufficientData("reconstruction overlaps truth for less than two days");
  return pearson(a, b);
}

/// Parameters of a synthetic cohort of workplace-like blocks. Integer ranges
/// are inclusive; each block draws its parameters independently.
struct CohortSpec {
  int blocks = 500;
  int changed = 100;     // blocks given a change on change_day
  int change_day = 42;   // days after span start
  int baseline_drop = 3; // changed blocks: baseline -= drop, amplitude -> 0
  Block24 first_block{0x0A0000};
  std::pair<int, int> size{30, 64}, baseline{5, 15}, amplitude{6, 12};
  std::pair<int, int> work_start{7, 10}, work_length{7, 10};  // hours
  double max_noise = 0.002;
  std::vector<LatLon> sites{{34.05, -118.24}, {40.71, -74.01}, {51.51, -0.13}, {35.68, 139.69}, {30.59, 114.31}};
  double site_jitter = 1.5;  // degrees, uniform +-
};

/// Draws a cohort; blocks are consecutive /24s from first_block. Which blocks
/// change is a seeded choice of `changed` distinct indices.
inline std::vector<BlockProfile> gen_cohort(const CohortSpec& spec, std::uint64_t seed) {
  if (spec.blocks < 0 || spec.changed < 0 || spec.changed > spec.blocks)
    throw std::invalid_argument("cohort: need 0 <= changed <= blocks");
  std::mt19937_64 rng(detail::splitmix64(seed ^ 0xC0407ull));
  auto pick = [&](std::pair<int, int> r) {
    return r.first + static_cast<int>(rng() % static_cast<std::uint64_t>(r.second - r.first + 1));
  };
  std::vector<int> order(spec.blocks);
  for (int i = 0; i < spec.blocks; ++i) order[i] = i;
  for (int i = spec.blocks - 1; i > 0; --i) std::swap(order[i], order[rng() % static_cast<std::uint64_t>(i + 1)]);
  std::vector<bool> changed(spec.blocks, false);
  for (int i = 0; i < spec.changed; ++i) changed[order[i]] = true;

  std::vector<BlockProfile> out;
  out.reserve(spec.blocks);
  for (int i = 0; i < spec.blocks; ++i) {
    BlockProfile p;
    p.block = Block24(spec.first_block.prefix + static_cast<std::uint32_t>(i));
    p.size = pick(spec.size);
    p.baseline = pick(spec.baseline);
    p.amplitude = std::min(pick(spec.amplitude), p.size - p.baseline);
    p.work_start_hour = pick(spec.work_start);
    p.work_end_hour = std::min(24.0, p.work_start_hour + pick(spec.work_length));
    p.noise = spec.max_noise * detail::unit(rng);
    if (!spec.sites.empty()) {
      const auto& c = spec.sites[rng() % spec.sites.size()];
      const double lat = c.lat + spec.site_jitter * (2 * detail::unit(rng) - 1);
      const double lon = c.lon + spec.site_jitter * (2 * detail::unit(rng) - 1);
      p.location = LatLon{std::clamp(lat, -90.0, 90.0), std::clamp(lon, -180.0, 180.0)};
    }
    if (changed[i]) p.change = ProfileChange{spec.change_day, std::max(0, p.baseline - spec.baseline_drop), 0};
    p.validate();
    out.push_back(p);
  }
  return out;
}

/// Writes profiles in the format read by parse_profiles.
inline std::string serialize_profiles(std::span<const BlockProfile> profiles) {
  auto num = [](double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::ostringstream os;
  for (const auto& p : profiles) {
    os << "block=" << to_string(p.block) << " size=" << p.size << " baseline=" << p.baseline
       << " amplitude=" << p.amplitude << " workdays=";
    for (int d = 0; d < 7; ++d) os << ((p.workdays >> d) & 1);
    os << " work_start=" << num(p.work_start_hour) << " work_end=" << num(p.work_end_hour) << " noise=" << num(p.noise);
    if (p.change)
      os << " change_day=" << p.change->day << " change_baseline=" << p.change->baseline
         << " change_amplitude=" << p.change->amplitude;
    if (p.location) os << " lat=" << num(p.location->lat) << " lon=" << num(p.location->lon);
    os << '\n';
  }
  return os.str();
}

// Profile file: one block per line, whitespace-separated key=value fields:
//   block=2.0.2.0/24 size=40 baseline=10 amplitude=8 workdays=1111100
//   work_start=9 work_end=17 noise=0.01 change_day=42 change_baseline=7
//   change_amplitude=0 lat=34.0 lon=-118.2
// Only block and size are required. workdays lists Monday..Sunday.

inline std::vector<BlockProfile> parse_profiles(std::string_view text) {
  std::vector<BlockProfile> out;
  detail::for_each_data_line(text, [&](std::size_t lineno, std::string_view line) {
    BlockProfile p;
    bool have_block = false;
    std::optional<int> cday, cbase, camp;
    std::optional<double> lat, lon;
    for (auto tok : detail::split_ws(line)) {
      auto eq = tok.find('=');
      if (eq == std::string_view::npos) throw ParseError(lineno, std::string(tok), "expected key=value");
      const auto key = tok.substr(0, eq);
      const auto val = tok.substr(eq + 1);
      auto as_int = [&](int& dst) {
        if (!detail::parse_number(val, dst)) throw ParseError(lineno, std::string(key), "not an integer");
      };
      auto as_double = [&](double& dst) {
        try {
          std::size_t used = 0;
          dst = std::stod(std::string(val), &used);
          if (used != val.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw ParseError(lineno, std::string(key), "not a number");
        }
      };
      if (key == "block") {
        auto b = parse_block(val);
        if (!b) throw ParseError(lineno, "block", "bad block");
        p.block = *b;
        have_block = true;
      } else if (key == "size") {
        as_int(p.size);
      } else if (key == "baseline") {
        as_int(p.baseline);
      } else if (key == "amplitude") {
        as_int(p.amplitude);
      } else if (key == "workdays") {
        if (val.size() != 7 || val.find_first_not_of("01") != std::string_view::npos)
          throw ParseError(lineno, "workdays", "expected 7 digits of 0/1, Monday first");
        p.workdays = 0;
        for (int d = 0; d < 7; ++d)
          if (val[d] == '1') p.workdays |= std::uint8_t(1u << d);
      } else if (key == "work_start") {
        as_double(p.work_start_hour);
      } else if (key == "work_end") {
        as_double(p.work_end_hour);
      } else if (key == "noise") {
        as_double(p.noise);
      } else if (key == "change_day") {
        int v = 0;
        as_int(v);
        cday = v;
      } else if (key == "change_baseline") {
        int v = 0;
        as_int(v);
        cbase = v;
      } else if (key == "change_amplitude") {
        int v = 0;
        as_int(v);
        camp = v;
      } else if (key == "lat") {
        double v = 0;
        as_double(v);
        lat = v;
      } else if (key == "lon") {
        double v = 0;
        as_double(v);
        lon = v;
      } else {
        throw ParseError(lineno, std::string(key), "unknown profile key");
      }
    }
    if (!have_block) throw ParseError(lineno, "block", "missing");
    if (cday) p.change = ProfileChange{*cday, cbase.value_or(p.baseline), camp.value_or(p.amplitude)};
    if (lat.has_value() != lon.has_value()) throw ParseError(lineno, "lat/lon", "both or neither required");
    if (lat) p.location = LatLon{*lat, *lon};
    try {
      p.validate();
    } catch (const std::invalid_argument& e) {
      throw ParseError(lineno, "profile", e.what());
    }
    out.push_back(p);
  });
  return out;
}

}  // namespace blockpulse

// SPDX-License-Identifier: Apache-2.0
// Shared fixtures for the unit tests.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "blockpulse/reconstruct.hpp"
#include "blockpulse/timegrid.hpp"

namespace blockpulse::testing {

inline constexpr std::int64_t kJan1 = 1577836800;  // 2020-01-01T00:00:00Z

/// Series on the 660 s grid from `start` with the given counts.
inline ActiveCountSeries round_series(const std::vector<int>& counts, std::int64_t start = kJan1,
                                      Block24 block = Block24{0x0A0000}) {
  ActiveCountSeries s;
  s.block = block;
  s.ever_active_size = 256;
  s.warm_up_end = start;
  for (std::size_t i = 0; i < counts.size(); ++i)
    s.samples.push_back({start + static_cast<std::int64_t>(i) * kRoundSeconds, counts[i]});
  return s;
}

/// Series with exactly `per_day` samples per UTC day, starting at midnight.
inline ActiveCountSeries day_grid_series(const std::vector<double>& values, int per_day = kSamplesPerDay,
                                         std::int64_t start = kJan1) {
  ActiveCountSeries s;
  s.block = Block24{0x0A0000};
  s.ever_active_size = 256;
  s.warm_up_end = start;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto day = static_cast<std::int64_t>(i) / per_day;
    const auto slot = static_cast<std::int64_t>(i) % per_day;
    s.samples.push_back({start + day * kDaySeconds + slot * kDaySeconds / per_day,
                         static_cast<int>(std::lround(values[i]))});
  }
  return s;
}

}  // namespace blockpulse::testing

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "blockpulse/reconstruct.hpp"

namespace blockpulse {

inline constexpr std::int64_t kDaySeconds = 86400;

/// Rounds per day after re-gridding (86400 / 660, rounded).
inline constexpr int kSamplesPerDay = 131;

/// Days since the Unix epoch of the UTC date containing `ts`.
constexpr std::int64_t utc_day(std::int64_t ts) { return floor_div(ts, kDaySeconds); }

inline std::string format_date(std::int64_t day) {
  using namespace std::chrono;
  const year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

/// Uniformly sampled series with an integral number of samples per UTC day.
struct RegularSeries {
  std::int64_t first_day = 0;  // UTC day of the first sample (first sample sits at midnight)
  int per_day = kSamplesPerDay;
  std::vector<double> values;

  std::size_t days() const { return values.size() / static_cast<std::size_t>(per_day); }
  std::int64_t timestamp(std::size_t i) const {
    const auto d = static_cast<std::int64_t>(i) / per_day;
    const auto j = static_cast<std::int64_t>(i) % per_day;
    return (first_day + d) * kDaySeconds + (j * kDaySeconds) / per_day;
  }
};

/// Samples of `s` with timestamp in [from, to).
inline ActiveCountSeries slice(const ActiveCountSeries& s, std::int64_t from, std::int64_t to) {
  ActiveCountSeries out = s;
  out.samples.clear();
  for (const auto& smp : s.samples)
    if (smp.timestamp >= from && smp.timestamp < to) out.samples.push_back(smp);
  return out;
}

/// Splits at gaps longer than a day and returns the longest (by time span) segment.
inline std::vector<CountSample> longest_segment(const ActiveCountSeries& s) {
  std::size_t best_begin = 0, best_end = 0, begin = 0;
  std::int64_t best_span = -1;
  for (std::size_t i = 0; i <= s.samples.size(); ++i) {
    const bool boundary =
        i == s.samples.size() || (i > begin && s.samples[i].timestamp - s.samples[i - 1].timestamp > kDaySeconds);
    if (!boundary) continue;
    if (i > begin) {
      const auto span = s.samples[i - 1].timestamp - s.samples[begin].timestamp;
      if (span > best_span) {
        best_span = span;
        best_begin = begin;
        best_end = i;
      }
    }
    begin = i;
  }
  return {s.samples.begin() + best_begin, s.samples.begin() + best_end};
}

/// Re-grids onto exactly `per_day` samples per UTC day by sample-and-hold, keeping
/// only whole days covered by the longest gap-free segment.
inline RegularSeries regrid_daily(const ActiveCountSeries& s, int per_day = kSamplesPerDay) {
  RegularSeries out;
  out.per_day = per_day;
  const auto seg = longest_segment(s);
  if (seg.empty()) return out;
  const std::int64_t first_day = utc_day(seg.front().timestamp + kDaySeconds - 1);  // first midnight >= start
  const std::int64_t end_day = utc_day(seg.back().timestamp + s.interval);         // exclusive
  out.first_day = first_day;
  if (end_day <= first_day) return out;
  out.values.reserve(static_cast<std::size_t>((end_day - first_day) * per_day));
  std::size_t k = 0;
  for (std::int64_t d = first_day; d < end_day; ++d) {
    for (int j = 0; j < per_day; ++j) {
      const std::int64_t t = d * kDaySeconds + (static_cast<std::int64_t>(j) * kDaySeconds) / per_day;
      while (k + 1 < seg.size() && seg[k + 1].timestamp <= t) ++k;
      out.values.push_back(seg[k].count);
    }
  }
  return out;
}

}  // namespace blockpulse

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "blockpulse/timegrid.hpp"
#include "support.hpp"

using namespace blockpulse;
using blockpulse::testing::kJan1;
using blockpulse::testing::round_series;

TEST(UtcDay, FloorsAndFormats) {
  EXPECT_EQ(utc_day(kJan1), 18262);
  EXPECT_EQ(utc_day(kJan1 - 1), 18261);
  EXPECT_EQ(utc_day(-1), -1);
  EXPECT_EQ(format_date(18262), "2020-01-01");
  EXPECT_EQ(format_date(utc_day(1584230400)), "2020-03-15");
  EXPECT_EQ(format_date(0), "1970-01-01");
}

TEST(RegridDaily, KeepsOnlyWholeDays) {
  // Start at 06:00 on Jan 1 and run for 3 days: Jan 2 and Jan 3 are whole, Jan 4 is partial.
  std::vector<int> counts(3 * 131);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = static_cast<int>(i % 7);
  auto s = round_series(counts, kJan1 + 6 * 3600);
  auto g = regrid_daily(s);
  EXPECT_EQ(g.first_day, utc_day(kJan1) + 1);
  EXPECT_EQ(g.days(), 2u);
  EXPECT_EQ(g.values.size(), 2u * 131);
  EXPECT_EQ(g.timestamp(0), kJan1 + kDaySeconds);
  EXPECT_EQ(g.timestamp(131), kJan1 + 2 * kDaySeconds);
}

TEST(RegridDaily, SampleAndHold) {
  // Samples every 660 s; grid slot j sits at j*86400/131 s after midnight.
  std::vector<int> counts(2 * 131 + 10);
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = static_cast<int>(i);
  auto s = round_series(counts, kJan1);
  auto g = regrid_daily(s);
  ASSERT_EQ(g.days(), 2u);
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const auto t = g.timestamp(i);
    const auto held = floor_div(t - kJan1, kRoundSeconds);  // last sample at or before t
    EXPECT_EQ(g.values[i], static_cast<double>(held)) << i;
  }
}

TEST(RegridDaily, UsesLongestSegmentAcrossGaps) {
  auto a = round_series(std::vector<int>(2 * 131, 1), kJan1);
  auto b = round_series(std::vector<int>(4 * 131, 2), kJan1 + 5 * kDaySeconds);
  a.samples.insert(a.samples.end(), b.samples.begin(), b.samples.end());
  auto seg = longest_segment(a);
  EXPECT_EQ(seg.size(), 4u * 131);
  auto g = regrid_daily(a);
  EXPECT_EQ(g.first_day, utc_day(kJan1) + 5);
  for (double v : g.values) EXPECT_EQ(v, 2.0);
}

TEST(RegridDaily, EmptyAndShortInputs) {
  EXPECT_TRUE(regrid_daily(ActiveCountSeries{}).values.empty());
  EXPECT_TRUE(regrid_daily(round_series({1, 2, 3}, kJan1 + 3600)).values.empty());
}

TEST(Slice, HalfOpenInterval) {
  auto s = round_series({1, 2, 3, 4}, kJan1);
  auto w = slice(s, kJan1 + 660, kJan1 + 1980);
  ASSERT_EQ(w.samples.size(), 2u);
  EXPECT_EQ(w.samples[0].count, 2);
  EXPECT_EQ(w.samples[1].count, 3);
}

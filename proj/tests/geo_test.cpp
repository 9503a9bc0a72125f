// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <random>

#include "blockpulse/geo.hpp"
#include "support.hpp"

using namespace blockpulse;
using blockpulse::testing::kJan1;

namespace {

const std::int64_t kDay0 = utc_day(kJan1);

BlockClassification sensitive(std::uint32_t prefix, bool cs = true) {
  BlockClassification c;
  c.block = Block24{prefix};
  c.responsive = c.diurnal = c.wide_swing = c.change_sensitive = cs;
  return c;
}

LabeledEvent event(std::uint32_t prefix, std::int64_t day, EventLabelKind label, int hour = 12) {
  const auto t = day * kDaySeconds + hour * 3600;
  const auto dir = label == EventLabelKind::sustained_up ? Direction::up : Direction::down;
  return {{Block24{prefix}, dir, t - 3600, t, t + 3600, 2.0}, label};
}

}  // namespace

TEST(GridCell, Examples) {
  EXPECT_EQ(grid_cell(0.0, 0.0), (GridCell{0, 0}));
  EXPECT_EQ(grid_cell(30.59, 114.30), (GridCell{30, 114}));
  EXPECT_EQ(grid_cell(-1.0, -1.0), (GridCell{-2, -2}));
  EXPECT_EQ(grid_cell(-2.0, 3.999), (GridCell{-2, 2}));
  EXPECT_EQ(grid_cell(90, 180), (GridCell{88, 178}));
  EXPECT_EQ(grid_cell(-90, -180), (GridCell{-90, -180}));
}

TEST(GridCell, RejectsOutOfRange) {
  EXPECT_THROW(grid_cell(90.01, 0), std::out_of_range);
  EXPECT_THROW(grid_cell(0, -180.5), std::out_of_range);
  EXPECT_THROW(grid_cell(std::nan(""), 0), std::out_of_range);
}

TEST(GridCell, PartitionsCoordinates) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> lat(-90, 90), lon(-180, 180);
  for (int i = 0; i < 10000; ++i) {
    const double a = lat(rng), b = lon(rng);
    const auto c = grid_cell(a, b);
    EXPECT_EQ(c.lat % 2, 0);
    EXPECT_EQ(c.lon % 2, 0);
    EXPECT_LE(c.lat, a);
    EXPECT_LT(a, c.lat + 2);
    EXPECT_LE(c.lon, b);
    EXPECT_LT(b, c.lon + 2);
  }
}

TEST(ParseGeoTable, ReadsAndRejects) {
  const auto t = parse_geo_table("# block lat lon\n10.0.0.0/24 30.59 114.3\n10.0.1.0/24 -1 -1\n");
  ASSERT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(t.at(Block24{0x0A0000}).lat, 30.59);
  EXPECT_THROW(parse_geo_table("10.0.0.0/24 30\n"), ParseError);
  EXPECT_THROW(parse_geo_table("10.0.0.0/24 91 0\n"), ParseError);
  EXPECT_THROW(parse_geo_table("10.0.0.0/24 0 181\n"), ParseError);
  EXPECT_THROW(parse_geo_table("10.0.0.0/24 x 0\n"), ParseError);
  EXPECT_THROW(parse_geo_table("10.0.0.0/24 0 0\n10.0.0.0/24 1 1\n"), ParseError);
}

TEST(DailyChangeFraction, FivePercentOfAHundred) {
  GeoTable geo;
  std::vector<BlockClassification> cls;
  std::vector<LabeledEvent> evs;
  for (std::uint32_t i = 0; i < 100; ++i) {
    geo[Block24{0x0A0000 + i}] = {30.59, 114.3};
    cls.push_back(sensitive(0x0A0000 + i));
    if (i < 5) evs.push_back(event(0x0A0000 + i, kDay0 + 3, EventLabelKind::sustained_down));
  }
  const auto agg = daily_change_fraction(evs, cls, geo, kDay0, kDay0 + 6);
  ASSERT_EQ(agg.summaries.size(), 7u);
  for (const auto& s : agg.summaries) {
    EXPECT_EQ(s.cell, (GridCell{30, 114}));
    EXPECT_EQ(s.change_sensitive_count, 100);
    EXPECT_EQ(s.down_fraction, s.day == kDay0 + 3 ? 0.05 : 0.0);
    EXPECT_EQ(s.up_fraction, 0.0);
  }
}

TEST(DailyChangeFraction, IgnoresOutagesAndInsensitiveBlocks) {
  GeoTable geo{{Block24{0x0A0000}, {1, 1}}, {Block24{0x0A0001}, {1, 1}}};
  std::vector<BlockClassification> cls{sensitive(0x0A0000), sensitive(0x0A0001, false), sensitive(0x0A0002)};
  std::vector<LabeledEvent> evs{event(0x0A0000, kDay0, EventLabelKind::outage),
                                event(0x0A0001, kDay0, EventLabelKind::sustained_down),
                                event(0x0A0002, kDay0, EventLabelKind::sustained_down)};
  const auto agg = daily_change_fraction(evs, cls, geo, kDay0, kDay0);
  ASSERT_EQ(agg.summaries.size(), 1u);
  EXPECT_EQ(agg.summaries[0].change_sensitive_count, 1);
  EXPECT_EQ(agg.summaries[0].down_count, 0);
  EXPECT_EQ(agg.unlocated, (std::vector<Block24>{Block24{0x0A0002}}));
}

TEST(DailyChangeFraction, MatchesGroupByOracle) {
  std::mt19937_64 rng(42);
  const GridCell cells[] = {{30, 114}, {40, -76}, {-2, -2}, {50, 0}};
  for (int trial = 0; trial < 30; ++trial) {
    GeoTable geo;
    std::vector<BlockClassification> cls;
    std::vector<LabeledEvent> evs;
    const int n = 20 + static_cast<int>(rng() % 80);
    for (int i = 0; i < n; ++i) {
      const std::uint32_t p = 0x0A0000 + static_cast<std::uint32_t>(i);
      const auto& c = cells[rng() % 4];
      if (rng() % 10) geo[Block24{p}] = {c.lat + 0.5, c.lon + 1.5};
      cls.push_back(sensitive(p, rng() % 5 != 0));
      for (int e = static_cast<int>(rng() % 4); e > 0; --e) {
        const auto label = static_cast<EventLabelKind>(rng() % 3);
        evs.push_back(event(p, kDay0 + static_cast<std::int64_t>(rng() % 12), label, static_cast<int>(rng() % 24)));
      }
    }
    const std::int64_t lo = kDay0 + 1, hi = kDay0 + 9;
    const auto agg = daily_change_fraction(evs, cls, geo, lo, hi);

    // Oracle: recount each (day, cell) from scratch.
    std::map<GridCell, int> denom;
    std::size_t unlocated = 0;
    for (const auto& c : cls) {
      if (!c.change_sensitive) continue;
      if (!geo.count(c.block)) {
        ++unlocated;
        continue;
      }
      ++denom[grid_cell(geo[c.block].lat, geo[c.block].lon)];
    }
    EXPECT_EQ(agg.unlocated.size(), unlocated);
    ASSERT_EQ(agg.summaries.size(), denom.size() * static_cast<std::size_t>(hi - lo + 1));
    for (const auto& s : agg.summaries) {
      int down = 0, up = 0;
      for (const auto& c : cls) {
        if (!c.change_sensitive || !geo.count(c.block)) continue;
        if (grid_cell(geo[c.block].lat, geo[c.block].lon) != s.cell) continue;
        bool d = false, u = false;
        for (const auto& e : evs) {
          if (e.event.block != c.block || utc_day(e.event.peak) != s.day) continue;
          d |= e.label == EventLabelKind::sustained_down;
          u |= e.label == EventLabelKind::sustained_up;
        }
        down += d;
        up += u;
      }
      EXPECT_EQ(s.change_sensitive_count, denom[s.cell]);
      EXPECT_EQ(s.down_count, down);
      EXPECT_EQ(s.up_count, up);
      EXPECT_DOUBLE_EQ(s.down_fraction, double(down) / denom[s.cell]);
      EXPECT_GE(s.down_fraction, 0.0);
      EXPECT_LE(s.down_fraction, 1.0);
      EXPECT_GE(s.up_fraction, 0.0);
      EXPECT_LE(s.up_fraction, 1.0);
    }

    // Conservation per day.
    for (std::int64_t day = lo; day <= hi; ++day) {
      int cell_sum = 0;
      for (const auto& s : agg.summaries)
        if (s.day == day) cell_sum += s.down_count;
      std::set<Block24> blocks;
      for (const auto& e : evs) {
        if (e.label != EventLabelKind::sustained_down || utc_day(e.event.peak) != day) continue;
        auto it = std::find_if(cls.begin(), cls.end(), [&](auto& c) { return c.block == e.event.block; });
        if (it->change_sensitive && geo.count(e.event.block)) blocks.insert(e.event.block);
      }
      EXPECT_EQ(cell_sum, static_cast<int>(blocks.size()));
    }
  }
}

TEST(Heatmap, HeaderOnlyWhenEmpty) {
  const auto text = export_heatmap(kDay0, std::vector<GridCellSummary>{});
  EXPECT_EQ(text, "# lat_cell lon_cell net_fraction down_count up_count denominator\n");
}

TEST(Heatmap, SingleCellRowAndDeterminism) {
  std::vector<GridCellSummary> s{{{24, 108}, kDay0, 25, 4, 0, 0.16, 0}, {{24, 108}, kDay0 + 1, 25, 0, 0, 0, 0}};
  const auto text = export_heatmap(kDay0, s);
  EXPECT_EQ(text, "# lat_cell lon_cell net_fraction down_count up_count denominator\n24 108 0.160000 4 0 25\n");
  EXPECT_EQ(export_heatmap(kDay0, s), text);
}

TEST(Heatmap, RowsOrderedByCellWithNetSign) {
  std::vector<GridCellSummary> s{{{40, -76}, kDay0, 10, 1, 3, 0.1, 0.3}, {{-2, 8}, kDay0, 4, 1, 0, 0.25, 0},
                                 {{40, -78}, kDay0, 2, 0, 0, 0, 0}};
  const auto text = export_heatmap(kDay0, s);
  EXPECT_EQ(text,
            "# lat_cell lon_cell net_fraction down_count up_count denominator\n"
            "-2 8 0.250000 1 0 4\n40 -78 0.000000 0 0 2\n40 -76 -0.200000 1 3 10\n");
}

TEST(CellTimeseries, ZeroFilledOverSpan) {
  GeoTable geo{{Block24{0x0A0000}, {30.59, 114.3}}, {Block24{0x0A0001}, {30.1, 115}}};
  std::vector<BlockClassification> cls{sensitive(0x0A0000), sensitive(0x0A0001)};
  std::vector<LabeledEvent> evs{event(0x0A0000, kDay0 + 4, EventLabelKind::sustained_down)};
  const auto agg = daily_change_fraction(evs, cls, geo, kDay0, kDay0 + 9);
  const auto ts = export_cell_timeseries({30, 114}, agg.summaries, kDay0, kDay0 + 9);
  ASSERT_FALSE(ts.diagnostic);
  std::istringstream in(ts.text);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# date down_fraction up_fraction");
  int rows = 0, nonzero = 0;
  double total = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream f(line);
    std::string date;
    double down = 0, up = 0;
    f >> date >> down >> up;
    if (down != 0 || up != 0) {
      ++nonzero;
      EXPECT_EQ(date, "2020-01-05");
    }
    total += down * 2;  // denominator of this cell
  }
  EXPECT_EQ(rows, 10);
  EXPECT_EQ(nonzero, 1);
  EXPECT_DOUBLE_EQ(total, 1.0);

  const auto unknown = export_cell_timeseries({0, 0}, agg.summaries, kDay0, kDay0 + 9);
  EXPECT_TRUE(unknown.text.empty());
  ASSERT_TRUE(unknown.diagnostic);
  EXPECT_NE(unknown.diagnostic->find("unknown cell"), std::string::npos);
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "blockpulse/changepoint.hpp"
#include "blockpulse/classify.hpp"

namespace blockpulse {

using GeoTable = std::map<Block24, LatLon>;

/// South-west corner of a 2x2-degree cell, in even degrees.
struct GridCell {
  int lat = 0, lon = 0;
  friend auto operator<=>(const GridCell&, const GridCell&) = default;
};

/// Maps a coordinate to its 2x2-degree cell. The north pole and the
/// antimeridian fold into the last cell so cells stay inside the valid range.
inline GridCell grid_cell(double lat, double lon) {
  if (!(lat >= -90 && lat <= 90) || !(lon >= -180 && lon <= 180))
    throw std::out_of_range("coordinate out of range: " + std::to_string(lat) + "," + std::to_string(lon));
  int clat = 2 * static_cast<int>(std::floor(lat / 2));
  int clon = 2 * static_cast<int>(std::floor(lon / 2));
  if (clat == 90) clat = 88;
  if (clon == 180) clon = 178;
  return {clat, clon};
}

inline GeoTable parse_geo_table(std::string_view text) {
  GeoTable table;
  detail::for_each_data_line(text, [&](std::size_t lineno, std::string_view line) {
    auto f = detail::split_ws(line);
    if (f.size() != 3) throw ParseError(lineno, "record", "expected <block> <lat> <lon>");
    auto b = parse_block(f[0]);
    if (!b) throw ParseError(lineno, "block", "bad block " + std::string(f[0]));
    LatLon ll;
    try {
      ll.lat = std::stod(std::string(f[1]));
      ll.lon = std::stod(std::string(f[2]));
    } catch (const std::exception&) {
      throw ParseError(lineno, "coordinate", "not a number");
    }
    if (!(ll.lat >= -90 && ll.lat <= 90)) throw ParseError(lineno, "lat", "out of range");
    if (!(ll.lon >= -180 && ll.lon <= 180)) throw ParseError(lineno, "lon", "out of range");
    if (!table.emplace(*b, ll).second) throw ParseError(lineno, "block", "duplicate entry");
  });
  return table;
}

struct GridCellSummary {
  GridCell cell;
  std::int64_t day = 0;  // UTC day number
  int change_sensitive_count = 0;
  int down_count = 0;
  int up_count = 0;
  double down_fraction = 0;
  double up_fraction = 0;
};

struct GridAggregate {
  std::vector<GridCellSummary> summaries;  // ordered by (day, lat, lon)
  std::vector<Block24> unlocated;          // change-sensitive blocks with no geo entry
};

/// Per (cell, day) share of change-sensitive blocks whose sustained change
/// peaks that day. Every cell holding a located change-sensitive block gets a
/// row for every day in [first_day, last_day], zero-filled.
inline GridAggregate daily_change_fraction(std::span<const LabeledEvent> events,
                                           std::span<const BlockClassification> classes, const GeoTable& geo,
                                           std::int64_t first_day, std::int64_t last_day) {
  GridAggregate out;
  std::map<Block24, GridCell> located;
  std::map<GridCell, int> denom;
  for (const auto& c : classes) {
    if (!c.change_sensitive) continue;
    auto it = geo.find(c.block);
    if (it == geo.end()) {
      out.unlocated.push_back(c.block);
      continue;
    }
    const auto cell = grid_cell(it->second.lat, it->second.lon);
    located.emplace(c.block, cell);
    ++denom[cell];
  }

  // Distinct (day, cell, block) per direction; a block counts once per day.
  std::set<std::tuple<std::int64_t, GridCell, Block24>> downs, ups;
  for (const auto& le : events) {
    if (le.label == EventLabelKind::outage) continue;
    auto it = located.find(le.event.block);
    if (it == located.end()) continue;
    const auto day = utc_day(le.event.peak);
    if (day < first_day || day > last_day) continue;
    (le.label == EventLabelKind::sustained_down ? downs : ups).emplace(day, it->second, le.event.block);
  }
  std::map<std::pair<std::int64_t, GridCell>, std::pair<int, int>> counts;
  for (const auto& [day, cell, b] : downs) ++counts[{day, cell}].first;
  for (const auto& [day, cell, b] : ups) ++counts[{day, cell}].second;

  for (std::int64_t day = first_day; day <= last_day; ++day) {
    for (const auto& [cell, n] : denom) {
      GridCellSummary s{cell, day, n, 0, 0, 0, 0};
      if (auto it = counts.find({day, cell}); it != counts.end()) {
        s.down_count = it->second.first;
        s.up_count = it->second.second;
      }
      s.down_fraction = double(s.down_count) / n;
      s.up_fraction = double(s.up_count) / n;
      out.summaries.push_back(s);
    }
  }
  return out;
}

/// Heatmap rows for one day: cell, net fraction (down positive, up negative),
/// counts and denominator, ordered by (lat, lon).
inline std::string export_heatmap(std::int64_t day, std::span<const GridCellSummary> summaries) {
  std::ostringstream os;
  os << "# lat_cell lon_cell net_fraction down_count up_count denominator\n";
  std::vector<GridCellSummary> rows;
  for (const auto& s : summaries)
    if (s.day == day) rows.push_back(s);
  std::sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.cell < b.cell; });
  char buf[32];
  for (const auto& s : rows) {
    std::snprintf(buf, sizeof buf, "%.6f", s.down_fraction - s.up_fraction);
    os << s.cell.lat << ' ' << s.cell.lon << ' ' << buf << ' ' << s.down_count << ' ' << s.up_count << ' '
       << s.change_sensitive_count << '\n';
  }
  return os.str();
}

struct CellTimeseries {
  std::string text;
  std::optional<std::string> diagnostic;
};

/// Daily down/up fractions for one cell over [first_day, last_day].
inline CellTimeseries export_cell_timeseries(GridCell cell, std::span<const GridCellSummary> summaries,
                                             std::int64_t first_day, std::int64_t last_day) {
  CellTimeseries out;
  std::map<std::int64_t, const GridCellSummary*> by_day;
  for (const auto& s : summaries)
    if (s.cell == cell) by_day[s.day] = &s;
  if (by_day.empty()) {
    out.diagnostic = "unknown cell " + std::to_string(cell.lat) + "," + std::to_string(cell.lon);
    return out;
  }
  std::ostringstream os;
  os << "# date down_fraction up_fraction\n";
  char buf[64];
  for (std::int64_t day = first_day; day <= last_day; ++day) {
    double down = 0, up = 0;
    if (auto it = by_day.find(day); it != by_day.end()) {
      down = it->second->down_fraction;
      up = it->second->up_fraction;
    }
    std::snprintf(buf, sizeof buf, " %.6f %.6f\n", down, up);
    os << format_date(day) << buf;
  }
  out.text = os.str();
  return out;
}

inline void write_grid_summaries(std::ostream& os, std::span<const GridCellSummary> summaries) {
  os << "# date lat_cell lon_cell change_sensitive down_count up_count down_fraction up_fraction\n";
  char buf[64];
  for (const auto& s : summaries) {
    std::snprintf(buf, sizeof buf, " %.6f %.6f\n", s.down_fraction, s.up_fraction);
    os << format_date(s.day) << ' ' << s.cell.lat << ' ' << s.cell.lon << ' ' << s.change_sensitive_count << ' '
       << s.down_count << ' ' << s.up_count << buf;
  }
}

}  // namespace blockpulse

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "blockpulse/fft.hpp"
#include "blockpulse/timegrid.hpp"

namespace blockpulse {

struct ClassifyConfig {
  double diurnal_threshold = 0.5;  // fraction of non-DC energy at daily harmonics
  int harmonics = 2;               // harmonics counted beyond the 24 h fundamental
  int weekly_sidebands = 0;        // +-n cycles/week around each daily harmonic also count
  int min_days = 7;
  int per_day = kSamplesPerDay;
  double swing_threshold = 5;
  int swing_days = 4;    // k
  int swing_window = 7;  // w
  std::int64_t baseline_days = 28;
};

struct DaySwing {
  std::int64_t day = 0;  // UTC day number
  int swing = 0;
  friend bool operator==(const DaySwing&, const DaySwing&) = default;
};

struct DailySwingSeries {
  Block24 block;
  std::vector<DaySwing> days;  // ascending, only days with samples
};

/// max - min of the active count per midnight-to-midnight UTC day.
inline DailySwingSeries daily_swing(const ActiveCountSeries& s) {
  DailySwingSeries out{s.block, {}};
  std::int64_t cur = 0;
  int lo = 0, hi = 0;
  bool open = false;
  for (const auto& smp : s.samples) {
    const auto d = utc_day(smp.timestamp);
    if (!open || d != cur) {
      if (open) out.days.push_back({cur, hi - lo});
      cur = d;
      lo = hi = smp.count;
      open = true;
    }
    lo = std::min(lo, smp.count);
    hi = std::max(hi, smp.count);
  }
  if (open) out.days.push_back({cur, hi - lo});
  return out;
}

struct SwingTest {
  bool wide = false;
  bool insufficient = false;
};

/// True iff some run of `window` consecutive calendar days holds at least
/// `min_days` days whose swing reaches `threshold` (one "seasonal week").
inline SwingTest wide_swing_test(const DailySwingSeries& swings, double threshold = 5, int min_days = 4,
                                 int window = 7) {
  SwingTest out;
  if (static_cast<int>(swings.days.size()) < window) {
    out.insufficient = true;
    return out;
  }
  // Two-pointer scan over calendar days; absent days never qualify.
  const auto& d = swings.days;
  std::size_t lo = 0;
  int hits = 0;
  for (std::size_t hi = 0; hi < d.size(); ++hi) {
    if (d[hi].swing >= threshold) ++hits;
    while (d[hi].day - d[lo].day >= window) {
      if (d[lo].swing >= threshold) --hits;
      ++lo;
    }
    if (hits >= min_days) {
      out.wide = true;
      return out;
    }
  }
  return out;
}

/// Removes a line through the series mean in place. With at least two whole
/// days the slope is the least-squares slope of the daily means, so anything
/// that repeats every day (whatever its phase) leaves it at zero; otherwise it
/// is the least-squares slope of the samples themselves.
inline void remove_linear_trend(std::vector<double>& x, int per_day = 0) {
  const std::size_t n = x.size();
  if (n < 2) {
    std::fill(x.begin(), x.end(), 0.0);
    return;
  }
  auto ls_slope = [](const std::vector<double>& y) {
    const double m = double(y.size() - 1) / 2;
    double my = 0;
    for (double v : y) my += v;
    my /= double(y.size());
    double sii = 0, siy = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      sii += (double(i) - m) * (double(i) - m);
      siy += (double(i) - m) * (y[i] - my);
    }
    return siy / sii;
  };
  double b = 0;
  const std::size_t days = per_day > 0 ? n / static_cast<std::size_t>(per_day) : 0;
  if (days >= 2) {
    std::vector<double> means(days, 0.0);
    for (std::size_t i = 0; i < days * per_day; ++i) means[i / per_day] += x[i];
    for (auto& m : means) m /= per_day;
    b = ls_slope(means) / per_day;
  } else {
    b = ls_slope(x);
  }
  double mx = 0;
  for (double v : x) mx += v;
  mx /= double(n);
  const double mi = double(n - 1) / 2;
  for (std::size_t i = 0; i < n; ++i) x[i] -= mx + b * (double(i) - mi);
}

/// Share of non-DC spectral energy that falls on the 24 h frequency and its
/// first `harmonics` harmonics. `values` must span whole days at `per_day`
/// samples per day; it is mean-removed and linearly de-trended first.
inline double diurnal_score(std::span<const double> values, int per_day, int harmonics, int weekly_sidebands = 0) {
  const std::size_t n = values.size();
  if (n < 2 || per_day <= 0) return 0.0;
  std::vector<double> x(values.begin(), values.end());
  remove_linear_trend(x, per_day);
  const auto spectrum = real_dft(x);
  const std::size_t days = n / static_cast<std::size_t>(per_day);

  auto energy = [&](std::size_t k) {
    const double e = std::norm(spectrum[k]);
    return (n % 2 == 0 && k == n / 2) ? e : 2.0 * e;  // mirrored negative frequency
  };
  double total = 0;
  for (std::size_t k = 1; k < spectrum.size(); ++k) total += energy(k);
  if (!(total > 1e-12 * std::max(1.0, double(n)))) return 0.0;

  const auto band = static_cast<std::size_t>(std::lround(weekly_sidebands * double(days) / 7.0));
  std::vector<bool> counted(spectrum.size(), false);
  double daily = 0;
  for (int h = 1; h <= harmonics + 1; ++h) {
    const std::size_t centre = static_cast<std::size_t>(h) * days;
    const std::size_t lo = centre > band ? centre - band : 1;
    for (std::size_t k = std::max<std::size_t>(lo, 1); k <= centre + band && k < spectrum.size(); ++k) {
      if (counted[k]) continue;
      counted[k] = true;
      daily += energy(k);
    }
  }
  return daily / total;
}

struct DiurnalTest {
  bool diurnal = false;
  double score = 0;
  bool insufficient = false;
};

inline DiurnalTest diurnal_test(const ActiveCountSeries& s, const ClassifyConfig& cfg = {}) {
  DiurnalTest out;
  const auto grid = regrid_daily(s, cfg.per_day);
  if (static_cast<int>(grid.days()) < cfg.min_days) {
    out.insufficient = true;
    return out;
  }
  out.score = diurnal_score(grid.values, cfg.per_day, cfg.harmonics, cfg.weekly_sidebands);
  out.diurnal = out.score >= cfg.diurnal_threshold;
  return out;
}

struct BlockClassification {
  Block24 block;
  bool responsive = false;
  bool diurnal = false;
  bool wide_swing = false;
  bool change_sensitive = false;
  double diurnal_score = 0;
  int max_daily_swing = 0;
  friend bool operator==(const BlockClassification&, const BlockClassification&) = default;
};

/// Classifies a block on the first `baseline_days` of its series.
inline BlockClassification classify(const ActiveCountSeries& s, const ClassifyConfig& cfg = {}) {
  BlockClassification c;
  c.block = s.block;
  if (s.samples.empty()) return c;
  const auto from = s.samples.front().timestamp;
  const auto window = slice(s, from, from + cfg.baseline_days * kDaySeconds);
  c.responsive = std::any_of(window.samples.begin(), window.samples.end(), [](auto& x) { return x.count > 0; });
  if (!c.responsive) return c;

  const auto swings = daily_swing(window);
  for (const auto& d : swings.days) c.max_daily_swing = std::max(c.max_daily_swing, d.swing);
  c.wide_swing = wide_swing_test(swings, cfg.swing_threshold, cfg.swing_days, cfg.swing_window).wide;

  const auto diurnal = diurnal_test(window, cfg);
  c.diurnal = diurnal.diurnal;
  c.diurnal_score = diurnal.score;
  c.change_sensitive = c.diurnal && c.wide_swing;
  return c;
}

/// Category totals laid out like the block-census tables.
struct ClassificationSummary {
  std::size_t blocks = 0, responsive = 0, diurnal = 0, wide_swing = 0, change_sensitive = 0;
};

inline ClassificationSummary summarize(std::span<const BlockClassification> cs) {
  ClassificationSummary s;
  for (const auto& c : cs) {
    ++s.blocks;
    if (!c.responsive) continue;
    ++s.responsive;
    s.diurnal += c.diurnal;
    s.wide_swing += c.wide_swing;
    s.change_sensitive += c.change_sensitive;
  }
  return s;
}

inline void write_classifications(std::ostream& os, std::span<const BlockClassification> cs) {
  char score[32];
  for (const auto& c : cs) {
    std::snprintf(score, sizeof score, "%.6f", c.diurnal_score);
    os << to_string(c.block) << ' ' << c.responsive << ' ' << c.diurnal << ' ' << c.wide_swing << ' '
       << c.change_sensitive << ' ' << score << ' ' << c.max_daily_swing << '\n';
  }
  const auto s = summarize(cs);
  os << "# blocks " << s.blocks << '\n'
     << "#   not_responsive " << s.blocks - s.responsive << '\n'
     << "#   responsive " << s.responsive << '\n'
     << "#     not_diurnal " << s.responsive - s.diurnal << '\n'
     << "#     diurnal " << s.diurnal << '\n'
     << "#     narrow_swing " << s.responsive - s.wide_swing << '\n'
     << "#     wide_swing " << s.wide_swing << '\n'
     << "#     not_change_sensitive " << s.responsive - s.change_sensitive << '\n'
     << "#     change_sensitive " << s.change_sensitive << '\n';
}

inline std::vector<BlockClassification> parse_classifications(std::string_view text) {
  std::vector<BlockClassification> out;
  detail::for_each_data_line(text, [&](std::size_t lineno, std::string_view line) {
    auto f = detail::split_ws(line);
    if (f.size() != 7) throw ParseError(lineno, "record", "expected 7 fields");
    BlockClassification c;
    auto b = parse_block(f[0]);
    if (!b) throw ParseError(lineno, "block", "bad block");
    c.block = *b;
    auto flag = [&](std::string_view v, const char* name) {
      if (v != "0" && v != "1") throw ParseError(lineno, name, "expected 0 or 1");
      return v == "1";
    };
    c.responsive = flag(f[1], "responsive");
    c.diurnal = flag(f[2], "diurnal");
    c.wide_swing = flag(f[3], "wide_swing");
    c.change_sensitive = flag(f[4], "change_sensitive");
    c.diurnal_score = std::stod(std::string(f[5]));
    if (!detail::parse_number(f[6], c.max_daily_swing)) throw ParseError(lineno, "max_daily_swing", "not an integer");
    out.push_back(c);
  });
  return out;
}

}  // namespace blockpulse

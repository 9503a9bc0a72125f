// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blockpulse/decompose.hpp"

namespace blockpulse {

enum class Direction : std::uint8_t { down, up };

inline std::string_view to_string(Direction d) { return d == Direction::down ? "down" : "up"; }

/// (x - mean) / stddev, with moments taken over the first `baseline` samples
/// (all samples when baseline is 0 or exceeds the length). A baseline with no
/// spread relative to its level yields all zeros.
inline std::vector<double> normalize_trend(std::span<const double> trend, std::size_t baseline = 0) {
  std::vector<double> out(trend.size(), 0.0);
  if (trend.empty()) return out;
  const std::size_t m = (baseline == 0 || baseline > trend.size()) ? trend.size() : baseline;
  double mean = 0;
  for (std::size_t i = 0; i < m; ++i) mean += trend[i];
  mean /= double(m);
  double var = 0;
  for (std::size_t i = 0; i < m; ++i) var += (trend[i] - mean) * (trend[i] - mean);
  const double sd = std::sqrt(var / double(m));
  if (!(sd > 1e-9 * std::max(1.0, std::abs(mean)))) return out;
  for (std::size_t i = 0; i < trend.size(); ++i) out[i] = (trend[i] - mean) / sd;
  return out;
}

/// One threshold crossing of a one-sided CUSUM sum.
struct CusumAlarm {
  Direction direction = Direction::down;
  std::size_t onset = 0;      // first sample of the excursion that crossed
  std::size_t detection = 0;  // sample where the sum exceeded h
  std::size_t tail = 0;       // last sample before the restarted sum next hits zero
};

/// Alarms of S_i = max(0, S_{i-1} + s*x_i - k), s = +1 (up) or -1 (down).
/// The sum resets to zero at each alarm.
inline std::vector<CusumAlarm> cusum_alarms(std::span<const double> x, double h, double k, Direction dir) {
  std::vector<CusumAlarm> out;
  const double sign = dir == Direction::up ? 1.0 : -1.0;
  double sum = 0;
  std::size_t onset = 0;
  bool tail_open = false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double prev = sum;
    sum = std::max(0.0, prev + sign * x[i] - k);
    if (sum <= 0) {
      tail_open = false;
      continue;
    }
    if (prev <= 0) onset = i;
    if (tail_open) out.back().tail = i;
    if (sum > h) {
      out.push_back({dir, onset, i, i});
      tail_open = true;
      sum = 0;
    }
  }
  return out;
}

/// A detected change, as sample indices into the CUSUM input.
struct CusumEvent {
  Direction direction = Direction::down;
  std::size_t onset = 0;      // first sample of the excursion that raised the first alarm
  std::size_t detection = 0;  // first alarm
  std::size_t peak = 0;       // maximum of the sum over the first excursion
  std::size_t end = 0;        // last positive sample of the last merged excursion
  double mean_shift = 0;      // mean of the signed deviation over onset..end

  friend bool operator==(const CusumEvent&, const CusumEvent&) = default;
};

/// Two-sided CUSUM with reset:
///   S+_i = max(0, S+_{i-1} + x_i - k),  S-_i = max(0, S-_{i-1} - x_i - k).
/// Each crossing of h is an alarm. A shift that persists re-alarms, so
/// consecutive same-direction alarms whose excursions are at most `merge_gap`
/// samples apart (0: the sum never returned to zero) form one change.
inline std::vector<CusumEvent> cusum_detect(std::span<const double> x, double h, double k,
                                            std::size_t merge_gap = 0) {
  auto alarms = cusum_alarms(x, h, k, Direction::up);
  auto downs = cusum_alarms(x, h, k, Direction::down);
  alarms.insert(alarms.end(), downs.begin(), downs.end());
  std::sort(alarms.begin(), alarms.end(), [](const CusumAlarm& a, const CusumAlarm& b) {
    return std::tie(a.detection, a.direction) < std::tie(b.detection, b.direction);
  });

  std::vector<CusumEvent> out;
  for (const auto& a : alarms) {
    if (!out.empty() && out.back().direction == a.direction && a.onset <= out.back().end + 1 + merge_gap) {
      out.back().end = std::max(out.back().end, a.tail);
      continue;
    }
    // The sum only rises to its first crossing, so the first excursion peaks there.
    out.push_back({a.direction, a.onset, a.detection, a.detection, a.tail, 0});
  }
  for (auto& e : out) {
    const double sign = e.direction == Direction::up ? 1.0 : -1.0;
    double s = 0;
    for (std::size_t j = e.onset; j <= e.end; ++j) s += sign * x[j];
    e.mean_shift = s / double(e.end - e.onset + 1);
  }
  return out;
}

enum class EventLabelKind : std::uint8_t { outage, sustained_down, sustained_up };

inline std::string_view to_string(EventLabelKind l) {
  switch (l) {
    case EventLabelKind::outage: return "outage";
    case EventLabelKind::sustained_down: return "sustained_down";
    case EventLabelKind::sustained_up: return "sustained_up";
  }
  return "?";
}

struct ChangeEvent {
  Block24 block;
  Direction direction = Direction::down;
  std::int64_t onset = 0, peak = 0, end = 0;  // timestamps
  double magnitude = 0;                       // trend units (addresses)
};

/// Label for one event or an outage pair (indices into the event sequence).
struct EventLabel {
  EventLabelKind label = EventLabelKind::sustained_down;
  std::vector<std::size_t> events;
};

/// Pairs a down event with an immediately following up event whose onset is at
/// most `outage_gap` seconds after the down event ends; everything else is a
/// sustained change in its own direction. Events must be time-ordered.
inline std::vector<EventLabel> label_events(std::span<const ChangeEvent> events, std::int64_t outage_gap) {
  std::vector<EventLabel> out;
  for (std::size_t i = 0; i < events.size();) {
    const auto& e = events[i];
    if (e.direction == Direction::down && i + 1 < events.size() && events[i + 1].direction == Direction::up &&
        events[i + 1].onset - e.end <= outage_gap) {
      out.push_back({EventLabelKind::outage, {i, i + 1}});
      i += 2;
      continue;
    }
    out.push_back({e.direction == Direction::down ? EventLabelKind::sustained_down : EventLabelKind::sustained_up,
                   {i}});
    ++i;
  }
  return out;
}

struct DetectConfig {
  double h = 5.0;
  double k = 0.5;
  std::int64_t outage_gap = 48 * 3600;
  std::int64_t baseline_days = 28;
  std::int64_t suppress_days = 7;
};

struct LabeledEvent {
  ChangeEvent event;
  EventLabelKind label = EventLabelKind::sustained_down;
};

/// Normalises a decomposition's trend over its baseline window, runs CUSUM,
/// drops changes peaking in the first `suppress_days`, and labels the rest.
inline std::vector<LabeledEvent> detect_changes(const Decomposition& d, const DetectConfig& cfg = {}) {
  std::vector<LabeledEvent> out;
  if (d.size() == 0) return out;
  const std::int64_t first = d.timestamps.front();
  std::size_t baseline = 0;
  while (baseline < d.size() && d.timestamps[baseline] < first + cfg.baseline_days * kDaySeconds) ++baseline;

  // Scale of the normalisation, to report magnitudes in addresses.
  const auto z = normalize_trend(d.trend, baseline);
  double mean = 0, var = 0;
  for (std::size_t i = 0; i < baseline; ++i) mean += d.trend[i];
  mean /= double(baseline);
  for (std::size_t i = 0; i < baseline; ++i) var += (d.trend[i] - mean) * (d.trend[i] - mean);
  const double sd = std::sqrt(var / double(baseline));

  std::vector<ChangeEvent> events;
  // Same-direction alarms closer than an outage gap are one change.
  const auto merge_gap = static_cast<std::size_t>(cfg.outage_gap * d.period / kDaySeconds);
  for (const auto& c : cusum_detect(z, cfg.h, cfg.k, merge_gap)) {
    ChangeEvent e{d.block, c.direction, d.timestamps[c.onset], d.timestamps[c.peak], d.timestamps[c.end],
                  c.mean_shift * sd};
    if (e.peak < first + cfg.suppress_days * kDaySeconds) continue;
    events.push_back(e);
  }
  for (const auto& lab : label_events(events, cfg.outage_gap))
    for (auto idx : lab.events) out.push_back({events[idx], lab.label});
  return out;
}

// Event file: "<block> <direction> <onset_ts> <peak_ts> <end_ts> <magnitude> <label>".

inline void write_event(std::ostream& os, const LabeledEvent& le) {
  const auto& e = le.event;
  char mag[32];
  std::snprintf(mag, sizeof mag, "%.6f", e.magnitude);
  os << to_string(e.block) << ' ' << to_string(e.direction) << ' ' << e.onset << ' ' << e.peak << ' ' << e.end
     << ' ' << mag << ' ' << to_string(le.label) << '\n';
}

struct EventFile {
  std::int64_t span_begin = 0, span_end = 0;  // from the "# span" header, if present
  bool has_span = false;
  std::vector<LabeledEvent> events;
};

inline EventFile parse_events(std::string_view text) {
  EventFile out;
  std::size_t lineno = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    auto f = detail::split_ws(line);
    if (f.empty()) continue;
    if (f[0] == "#") {
      if (f.size() == 4 && f[1] == "span") {
        if (!detail::parse_number(f[2], out.span_begin) || !detail::parse_number(f[3], out.span_end))
          throw ParseError(lineno, "span", "bad span header");
        out.has_span = true;
      }
      continue;
    }
    if (f.size() != 7) throw ParseError(lineno, "record", "expected 7 fields");
    LabeledEvent le;
    auto b = parse_block(f[0]);
    if (!b) throw ParseError(lineno, "block", "bad block");
    le.event.block = *b;
    if (f[1] == "down") le.event.direction = Direction::down;
    else if (f[1] == "up") le.event.direction = Direction::up;
    else throw ParseError(lineno, "direction", "expected up or down");
    if (!detail::parse_number(f[2], le.event.onset) || !detail::parse_number(f[3], le.event.peak) ||
        !detail::parse_number(f[4], le.event.end))
      throw ParseError(lineno, "timestamp", "not an integer");
    le.event.magnitude = std::stod(std::string(f[5]));
    if (f[6] == "outage") le.label = EventLabelKind::outage;
    else if (f[6] == "sustained_down") le.label = EventLabelKind::sustained_down;
    else if (f[6] == "sustained_up") le.label = EventLabelKind::sustained_up;
    else throw ParseError(lineno, "label", "unknown label " + std::string(f[6]));
    out.events.push_back(le);
  }
  return out;
}

}  // namespace blockpulse

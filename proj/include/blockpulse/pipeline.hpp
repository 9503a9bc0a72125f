// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "blockpulse/changepoint.hpp"
#include "blockpulse/classify.hpp"
#include "blockpulse/decompose.hpp"
#include "blockpulse/geo.hpp"
#include "blockpulse/observation.hpp"
#include "blockpulse/reconstruct.hpp"
#include "blockpulse/simulate.hpp"

namespace blockpulse {

namespace fs = std::filesystem;

/// Malformed or out-of-range configuration (exit status 3).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stage input that does not exist (exit status 2).
class MissingInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  // Inputs. Empty paths fall back to the corresponding file in output_dir.
  fs::path observations, ever_active, geo, profiles;
  fs::path output_dir = "out";
  std::uint64_t seed = 1;

  // Simulation.
  std::int64_t start = 1577836800;  // 2020-01-01T00:00:00Z
  int days = 56;
  int observers = 5;
  ProbePolicy probe;

  bool strict = false;  // drop records outside the ever-active list
  ClassifyConfig classify;
  Decomposer decomposer = Decomposer::stl;
  StlConfig stl;
  DetectConfig detect;
  int workers = 0;  // 0 = hardware concurrency

  int worker_count() const {
    if (workers > 0) return workers;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

namespace detail {

inline bool parse_bool(std::string_view v, bool& out) {
  if (v == "true" || v == "1" || v == "yes") return out = true, true;
  if (v == "false" || v == "0" || v == "no") return out = false, true;
  return false;
}

inline bool parse_double(std::string_view v, double& out) {
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  return ec == std::errc{} && p == v.data() + v.size() && std::isfinite(out);
}

inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingInput("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace detail

/// Parses "key = value" lines ('#' starts a comment). Relative paths resolve
/// against `base_dir`. Throws ConfigError on unknown keys or bad values.
inline PipelineConfig parse_config(std::string_view text, const fs::path& base_dir = {}) {
  PipelineConfig c;
  std::set<std::string> seen;
  std::size_t lineno = 0, pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto trim = [](std::string_view s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    auto where = [&] { return "config line " + std::to_string(lineno) + ": "; };
    if (eq == std::string_view::npos) throw ConfigError(where() + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view val = trim(line.substr(eq + 1));
    if (!seen.insert(key).second) throw ConfigError(where() + "duplicate key " + key);
    auto bad = [&] { return ConfigError(where() + "bad value for " + key + ": '" + std::string(val) + "'"); };
    auto as_int = [&](auto& dst) {
      if (!detail::parse_number(val, dst)) throw bad();
    };
    auto as_double = [&](double& dst) {
      if (!detail::parse_double(val, dst)) throw bad();
    };
    auto as_bool = [&](bool& dst) {
      if (!detail::parse_bool(val, dst)) throw bad();
    };
    auto as_path = [&](fs::path& dst) {
      if (val.empty()) throw bad();
      fs::path p{std::string(val)};
      dst = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    };

    if (key == "observations") as_path(c.observations);
    else if (key == "ever_active") as_path(c.ever_active);
    else if (key == "geo") as_path(c.geo);
    else if (key == "profiles") as_path(c.profiles);
    else if (key == "output_dir") as_path(c.output_dir);
    else if (key == "seed") as_int(c.seed);
    else if (key == "start") as_int(c.start);
    else if (key == "days") as_int(c.days);
    else if (key == "observers") as_int(c.observers);
    else if (key == "probe_budget") as_int(c.probe.budget);
    else if (key == "stop_on_first_positive") as_bool(c.probe.stop_on_first_positive);
    else if (key == "strict") as_bool(c.strict);
    else if (key == "baseline_days") {
      as_int(c.classify.baseline_days);
      c.detect.baseline_days = c.classify.baseline_days;
    } else if (key == "diurnal_threshold") as_double(c.classify.diurnal_threshold);
    else if (key == "harmonics") as_int(c.classify.harmonics);
    else if (key == "weekly_sidebands") as_int(c.classify.weekly_sidebands);
    else if (key == "min_days") as_int(c.classify.min_days);
    else if (key == "samples_per_day") as_int(c.classify.per_day);
    else if (key == "swing_threshold") as_double(c.classify.swing_threshold);
    else if (key == "swing_days") as_int(c.classify.swing_days);
    else if (key == "swing_window") as_int(c.classify.swing_window);
    else if (key == "decomposer") {
      if (val == "stl") c.decomposer = Decomposer::stl;
      else if (val == "naive") c.decomposer = Decomposer::naive;
      else throw bad();
    } else if (key == "stl_seasonal") as_int(c.stl.seasonal);
    else if (key == "stl_trend") as_int(c.stl.trend);
    else if (key == "stl_low_pass") as_int(c.stl.low_pass);
    else if (key == "stl_inner") as_int(c.stl.inner);
    else if (key == "stl_outer") as_int(c.stl.outer);
    else if (key == "stl_robust") as_bool(c.stl.robust);
    else if (key == "cusum_h") as_double(c.detect.h);
    else if (key == "cusum_k") as_double(c.detect.k);
    else if (key == "outage_gap_hours") {
      double h = 0;
      as_double(h);
      if (h < 0) throw bad();
      c.detect.outage_gap = static_cast<std::int64_t>(std::llround(h * 3600));
    } else if (key == "suppress_days") as_int(c.detect.suppress_days);
    else if (key == "workers") as_int(c.workers);
    else throw ConfigError(where() + "unknown key " + key);
  }
  return c;
}

/// Throws ConfigError when a setting is out of range.
inline void validate(const PipelineConfig& c) {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  need(c.days >= 7, "days must be at least 7");
  need(c.observers >= 1, "observers must be at least 1");
  need(c.probe.budget >= 1 && c.probe.budget <= 16, "probe_budget must be in [1,16]");
  need(c.classify.baseline_days > 0, "baseline_days must be positive");
  need(c.classify.diurnal_threshold > 0 && c.classify.diurnal_threshold <= 1, "diurnal_threshold must be in (0,1]");
  need(c.classify.harmonics >= 0, "harmonics must be non-negative");
  need(c.classify.weekly_sidebands >= 0, "weekly_sidebands must be non-negative");
  need(c.classify.min_days > 0, "min_days must be positive");
  need(c.classify.per_day >= 2, "samples_per_day must be at least 2");
  need(c.classify.swing_threshold > 0, "swing_threshold must be positive");
  need(c.classify.swing_window > 0 && c.classify.swing_days > 0 && c.classify.swing_days <= c.classify.swing_window,
       "need 0 < swing_days <= swing_window");
  need(c.stl.seasonal >= 3 && c.stl.seasonal % 2 == 1, "stl_seasonal must be odd and at least 3");
  need(c.stl.trend == 0 || (c.stl.trend >= 3 && c.stl.trend % 2 == 1), "stl_trend must be 0 or odd >= 3");
  need(c.stl.low_pass == 0 || (c.stl.low_pass >= 3 && c.stl.low_pass % 2 == 1), "stl_low_pass must be 0 or odd >= 3");
  need(c.stl.inner >= 1 && c.stl.outer >= 0, "stl_inner must be positive");
  need(c.detect.h > 0, "cusum_h must be positive");
  need(c.detect.k > 0, "cusum_k must be positive");
  need(c.detect.outage_gap >= 0, "outage_gap_hours must be non-negative");
  need(c.detect.suppress_days >= 0, "suppress_days must be non-negative");
  need(c.workers >= 0, "workers must be non-negative");
}

/// Canonical dump of the effective configuration; parse_config reads it back.
inline std::string dump_config(const PipelineConfig& c) {
  std::ostringstream os;
  auto path = [&](const char* key, const fs::path& p) {
    if (!p.empty()) os << key << " = " << p.generic_string() << '\n';
  };
  path("observations", c.observations);
  path("ever_active", c.ever_active);
  path("geo", c.geo);
  path("profiles", c.profiles);
  path("output_dir", c.output_dir);
  os << "seed = " << c.seed << '\n'
     << "start = " << c.start << '\n'
     << "days = " << c.days << '\n'
     << "observers = " << c.observers << '\n'
     << "probe_budget = " << c.probe.budget << '\n'
     << "stop_on_first_positive = " << (c.probe.stop_on_first_positive ? "true" : "false") << '\n'
     << "strict = " << (c.strict ? "true" : "false") << '\n'
     << "baseline_days = " << c.classify.baseline_days << '\n'
     << "diurnal_threshold = " << detail::fmt_double(c.classify.diurnal_threshold) << '\n'
     << "harmonics = " << c.classify.harmonics << '\n'
     << "weekly_sidebands = " << c.classify.weekly_sidebands << '\n'
     << "min_days = " << c.classify.min_days << '\n'
     << "samples_per_day = " << c.classify.per_day << '\n'
     << "swing_threshold = " << detail::fmt_double(c.classify.swing_threshold) << '\n'
     << "swing_days = " << c.classify.swing_days << '\n'
     << "swing_window = " << c.classify.swing_window << '\n'
     << "decomposer = " << (c.decomposer == Decomposer::stl ? "stl" : "naive") << '\n'
     << "stl_seasonal = " << c.stl.seasonal << '\n'
     << "stl_trend = " << c.stl.trend << '\n'
     << "stl_low_pass = " << c.stl.low_pass << '\n'
     << "stl_inner = " << c.stl.inner << '\n'
     << "stl_outer = " << c.stl.outer << '\n'
     << "stl_robust = " << (c.stl.robust ? "true" : "false") << '\n'
     << "cusum_h = " << detail::fmt_double(c.detect.h) << '\n'
     << "cusum_k = " << detail::fmt_double(c.detect.k) << '\n'
     << "outage_gap_hours = " << detail::fmt_double(double(c.detect.outage_gap) / 3600) << '\n'
     << "suppress_days = " << c.detect.suppress_days << '\n';
  // Worker count is deliberately left out: it never changes results.
  return os.str();
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index is handled
/// exactly once; if any call throws, the exception from the lowest index is
/// rethrown after all threads finish.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, workers)));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Everything the analysis stages derive from one block's series.
struct BlockAnalysis {
  BlockClassification classification;
  std::optional<Decomposition> decomposition;  // change-sensitive blocks with enough data
  std::vector<LabeledEvent> events;
  std::optional<std::string> diagnostic;
};

inline std::optional<Decomposition> detrend_block(const ActiveCountSeries& s, const PipelineConfig& cfg,
                                                  std::optional<std::string>& diagnostic) {
  try {
    return decompose_series(s, cfg.decomposer, cfg.classify.per_day, cfg.stl);
  } catch (const InsufficientData& e) {
    diagnostic = to_string(s.block) + ": " + e.what() + "; not decomposed";
    return std::nullopt;
  }
}

/// classify -> detrend -> detect for one block, as the staged pipeline does.
inline BlockAnalysis analyze_block(const ActiveCountSeries& s, const PipelineConfig& cfg) {
  BlockAnalysis a;
  a.classification = classify(s, cfg.classify);
  if (!a.classification.change_sensitive) return a;
  a.decomposition = detrend_block(s, cfg, a.diagnostic);
  if (a.decomposition) a.events = detect_changes(*a.decomposition, cfg.detect);
  return a;
}

enum class Stage { simulate, reconstruct, classify, detrend, detect, aggregate, all };

inline std::optional<Stage> parse_stage(std::string_view s) {
  static const std::pair<std::string_view, Stage> names[] = {
      {"simulate", Stage::simulate}, {"reconstruct", Stage::reconstruct}, {"classify", Stage::classify},
      {"detrend", Stage::detrend},   {"detect", Stage::detect},           {"aggregate", Stage::aggregate},
      {"all", Stage::all}};
  for (auto [name, st] : names)
    if (name == s) return st;
  return std::nullopt;
}

/// Output file names inside output_dir.
namespace files {
inline constexpr const char* config = "config.txt";
inline constexpr const char* observations = "observations.txt";
inline constexpr const char* ever_active = "ever_active.txt";
inline constexpr const char* geo = "geo.txt";
inline constexpr const char* truth = "truth.txt";
inline constexpr const char* fidelity = "fidelity.txt";
inline constexpr const char* series = "series.txt";
inline constexpr const char* scan = "scan.txt";
inline constexpr const char* classification = "classification.txt";
inline constexpr const char* decomposition = "decomposition.txt";
inline constexpr const char* events = "events.txt";
inline constexpr const char* grid = "grid_daily.txt";
inline constexpr const char* heatmaps = "heatmaps";
inline constexpr const char* cells = "cells";
}  // namespace files

class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), log_(log) { validate(cfg_); }

  const PipelineConfig& config() const { return cfg_; }

  void run(Stage stage) {
    fs::create_directories(cfg_.output_dir);
    detail::write_file(out(files::config), dump_config(cfg_));
    switch (stage) {
      case Stage::simulate: return simulate();
      case Stage::reconstruct: return reconstruct();
      case Stage::classify: return classify_stage();
      case Stage::detrend: return detrend();
      case Stage::detect: return detect();
      case Stage::aggregate: return aggregate();
      case Stage::all:
        if (!cfg_.profiles.empty()) simulate();
        reconstruct();
        classify_stage();
        detrend();
        detect();
        aggregate();
        return;
    }
  }

 private:
  fs::path out(const char* name) const { return cfg_.output_dir / name; }

  fs::path input(const fs::path& configured, const char* name) const {
    fs::path p = configured.empty() ? out(name) : configured;
    if (!fs::exists(p)) throw MissingInput("missing input " + p.string());
    return p;
  }

  void note(const std::string& msg) { log_ << msg << '\n'; }

  void simulate() {
    if (cfg_.profiles.empty()) throw MissingInput("simulate needs 'profiles' in the config");
    const auto profiles = parse_profiles(detail::read_file(input(cfg_.profiles, "")));
    note("simulate: " + std::to_string(profiles.size()) + " blocks, " + std::to_string(cfg_.days) + " days, " +
         std::to_string(cfg_.observers) + " observers");

    struct Sim {
      std::vector<ObservationRecord> records;
      std::string truth, fidelity;
    };
    std::vector<Sim> sims(profiles.size());
    parallel_for(profiles.size(), cfg_.worker_count(), [&](std::size_t i) {
      const auto& p = profiles[i];
      const auto truth = gen_truth(p, cfg_.start, cfg_.days, cfg_.seed);
      const auto list = p.ever_active();
      auto streams = gen_probing(truth, list, cfg_.probe, cfg_.observers, cfg_.seed);
      auto& sim = sims[i];
      std::ostringstream t;
      const auto name = to_string(p.block);
      for (std::size_t r = 0; r < truth.rounds(); ++r) t << name << ' ' << truth.round_time(r) << ' ' << truth.counts[r] << '\n';
      sim.truth = t.str();

      // Fidelity against the span start; the fused file anchor may differ by the probe jitter.
      auto fidelity_of = [&](std::span<const ObserverStream> ss) -> std::string {
        auto series = fuse_observers(list, ss, truth.start).series;
        if (series.samples.empty()) return "nan";
        try {
          auto r = reconstruction_correlation(truth, series);
          return r ? detail::fmt_double(*r) : "nan";
        } catch (const InsufficientData&) {
          return "nan";
        }
      };
      auto merged = merge_streams(streams);
      auto scan = full_scan_time(list, merged[p.block], {}, truth.start);
      sim.fidelity = name + ' ' + fidelity_of(streams) + ' ' + fidelity_of(std::span(streams).first(1)) + ' ' +
                     std::to_string(scan.complete ? scan.rounds : -1) + '\n';
      for (auto& s : streams)
        for (auto& r : s.records) sim.records.push_back(std::move(r));
    });

    std::vector<ObservationRecord> all;
    EverActiveTable table;
    std::ostringstream geo, truth, fidelity;
    fidelity << "# block r_all_observers r_first_observer full_scan_rounds\n";
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      all.insert(all.end(), std::make_move_iterator(sims[i].records.begin()),
                 std::make_move_iterator(sims[i].records.end()));
      table.emplace(profiles[i].block, profiles[i].ever_active());
      if (profiles[i].location)
        geo << to_string(profiles[i].block) << ' ' << detail::fmt_double(profiles[i].location->lat) << ' '
            << detail::fmt_double(profiles[i].location->lon) << '\n';
      truth << sims[i].truth;
      fidelity << sims[i].fidelity;
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      return std::tie(a.timestamp, a.observer, a.block, a.offset) < std::tie(b.timestamp, b.observer, b.block, b.offset);
    });
    detail::write_file(out(files::observations), serialize_observations(all));
    detail::write_file(out(files::ever_active), serialize_ever_active(table));
    detail::write_file(out(files::geo), geo.str());
    detail::write_file(out(files::truth), truth.str());
    detail::write_file(out(files::fidelity), fidelity.str());
    note("simulate: wrote " + std::to_string(all.size()) + " observations");
  }

  void reconstruct() {
    auto parsed = parse_observations(detail::read_file(input(cfg_.observations, files::observations)));
    const auto table = parse_ever_active(detail::read_file(input(cfg_.ever_active, files::ever_active)));
    for (const auto& d : parsed.rejected) note("reconstruct: line " + std::to_string(d.line) + ": " + d.message);

    std::int64_t anchor = 0;
    if (!parsed.records.empty())
      anchor = std::min_element(parsed.records.begin(), parsed.records.end(), [](auto& a, auto& b) {
                 return a.timestamp < b.timestamp;
               })->timestamp;
    auto merged = merge_streams(split_by_observer(parsed.records));
    parsed.records.clear();
    for (const auto& [block, recs] : merged)
      if (!table.count(block)) note("reconstruct: " + to_string(block) + ": no ever-active list; skipped");

    std::vector<const EverActiveList*> lists;
    for (const auto& [block, list] : table) lists.push_back(&list);
    struct Result {
      std::string series, scan;
      std::vector<std::string> diags;
    };
    std::vector<Result> results(lists.size());
    parallel_for(lists.size(), cfg_.worker_count(), [&](std::size_t i) {
      const auto& list = *lists[i];
      auto& res = results[i];
      std::vector<Diagnostic> diags;
      std::vector<ObservationRecord> recs;
      if (auto it = merged.find(list.block); it != merged.end()) recs = it->second;
      recs = drop_duplicate_probes(std::move(recs), diags);
      recs = screen_ever_active(std::move(recs), list, cfg_.strict, diags);
      for (auto& d : diags) res.diags.push_back(d.message);
      auto sr = emit_series(list, recs, anchor);
      if (sr.diagnostic) res.diags.push_back(*sr.diagnostic);
      std::ostringstream os;
      if (!sr.series.samples.empty()) write_series(os, sr.series);
      res.series = os.str();
      auto scan = full_scan_time(list, recs, {}, anchor);
      res.scan = to_string(list.block) + ' ' + std::to_string(scan.complete) + ' ' + std::to_string(scan.rounds) +
                 ' ' + std::to_string(scan.duration_s) + '\n';
    });
    std::string series, scan = "# block complete rounds duration_s\n";
    std::size_t emitted = 0;
    for (auto& r : results) {
      for (auto& d : r.diags) note("reconstruct: " + d);
      emitted += !r.series.empty();
      series += r.series;
      scan += r.scan;
    }
    detail::write_file(out(files::series), series);
    detail::write_file(out(files::scan), scan);
    note("reconstruct: " + std::to_string(emitted) + " of " + std::to_string(lists.size()) + " blocks have series");
  }

  std::vector<ActiveCountSeries> load_series() {
    return parse_series(detail::read_file(input({}, files::series)));
  }

  void classify_stage() {
    const auto series = load_series();
    std::vector<BlockClassification> cls(series.size());
    parallel_for(series.size(), cfg_.worker_count(), [&](std::size_t i) { cls[i] = classify(series[i], cfg_.classify); });
    std::ostringstream os;
    write_classifications(os, cls);
    detail::write_file(out(files::classification), os.str());
    const auto s = summarize(cls);
    note("classify: " + std::to_string(s.change_sensitive) + " of " + std::to_string(s.blocks) +
         " blocks change-sensitive");
  }

  void detrend() {
    const auto series = load_series();
    const auto cls = parse_classifications(detail::read_file(input({}, files::classification)));
    std::set<Block24> sensitive;
    for (const auto& c : cls)
      if (c.change_sensitive) sensitive.insert(c.block);
    std::vector<const ActiveCountSeries*> todo;
    for (const auto& s : series)
      if (sensitive.count(s.block)) todo.push_back(&s);
    std::vector<std::string> text(todo.size());
    std::vector<std::optional<std::string>> diags(todo.size());
    parallel_for(todo.size(), cfg_.worker_count(), [&](std::size_t i) {
      auto d = detrend_block(*todo[i], cfg_, diags[i]);
      if (!d) return;
      std::ostringstream os;
      write_decomposition(os, *d);
      text[i] = os.str();
    });
    std::string all;
    for (std::size_t i = 0; i < todo.size(); ++i) {
      if (diags[i]) note("detrend: " + *diags[i]);
      all += text[i];
    }
    detail::write_file(out(files::decomposition), all);
    note("detrend: decomposed " + std::to_string(todo.size()) + " blocks");
  }

  void detect() {
    const auto decs = parse_decompositions(detail::read_file(input({}, files::decomposition)));
    std::vector<std::vector<LabeledEvent>> events(decs.size());
    parallel_for(decs.size(), cfg_.worker_count(), [&](std::size_t i) { events[i] = detect_changes(decs[i], cfg_.detect); });
    std::ostringstream os;
    if (!decs.empty()) {
      std::int64_t lo = decs.front().timestamps.front(), hi = decs.front().timestamps.back();
      for (const auto& d : decs) {
        lo = std::min(lo, d.timestamps.front());
        hi = std::max(hi, d.timestamps.back());
      }
      os << "# span " << lo << ' ' << hi << '\n';
    }
    std::size_t n = 0, sustained = 0;
    for (const auto& ev : events)
      for (const auto& e : ev) {
        write_event(os, e);
        ++n;
        sustained += e.label != EventLabelKind::outage;
      }
    detail::write_file(out(files::events), os.str());
    note("detect: " + std::to_string(n) + " events, " + std::to_string(sustained) + " sustained");
  }

  void aggregate() {
    const auto ev = parse_events(detail::read_file(input({}, files::events)));
    const auto cls = parse_classifications(detail::read_file(input({}, files::classification)));
    const auto geo = parse_geo_table(detail::read_file(input(cfg_.geo, files::geo)));

    std::int64_t first = 0, last = -1;
    if (ev.has_span) {
      first = utc_day(ev.span_begin);
      last = utc_day(ev.span_end);
    }
    const auto agg = daily_change_fraction(ev.events, cls, geo, first, last);
    std::ostringstream os;
    write_grid_summaries(os, agg.summaries);
    os << "# unlocated_change_sensitive " << agg.unlocated.size() << '\n';
    detail::write_file(out(files::grid), os.str());
    for (auto b : agg.unlocated) note("aggregate: " + to_string(b) + ": change-sensitive but not geolocated");

    fs::remove_all(out(files::heatmaps));
    fs::remove_all(out(files::cells));
    std::set<GridCell> cells;
    for (const auto& s : agg.summaries) cells.insert(s.cell);
    for (std::int64_t day = first; day <= last; ++day)
      detail::write_file(out(files::heatmaps) / (format_date(day) + ".txt"), export_heatmap(day, agg.summaries));
    for (const auto& cell : cells) {
      auto ts = export_cell_timeseries(cell, agg.summaries, first, last);
      detail::write_file(out(files::cells) / (std::to_string(cell.lat) + "_" + std::to_string(cell.lon) + ".txt"),
                         ts.text);
    }
    note("aggregate: " + std::to_string(cells.size()) + " cells over " + std::to_string(last - first + 1) + " days");
  }

  PipelineConfig cfg_;
  std::ostream& log_;
};

/// Exit status of one stage run: 0 ok, 1 processing error, 2 missing input,
/// 3 bad configuration.
inline int run_stage(Stage stage, const PipelineConfig& cfg, std::ostream& log = std::cerr) {
  try {
    Pipeline(cfg, log).run(stage);
    return 0;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return 3;
  } catch (const MissingInput& e) {
    log << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace blockpulse

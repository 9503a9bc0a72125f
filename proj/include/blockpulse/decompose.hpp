// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "blockpulse/error.hpp"
#include "blockpulse/timegrid.hpp"

namespace blockpulse {

/// Additive split of a regular series: observed = trend + seasonal + residual.
struct Decomposition {
  Block24 block;
  int period = kSamplesPerDay;
  std::vector<std::int64_t> timestamps;
  std::vector<double> observed, trend, seasonal, residual;

  std::size_t size() const { return observed.size(); }
};

constexpr int next_odd(double x) {
  int v = static_cast<int>(x);
  if (v < x) ++v;
  return v % 2 == 0 ? v + 1 : v;
}

/// Smoother settings. Zero window lengths mean "derive from the period".
struct StlConfig {
  int seasonal = 7;  // cycle-subseries loess span, in periods
  int trend = 0;     // next odd >= 1.5 P / (1 - 1.5 / seasonal)
  int low_pass = 0;  // next odd >= P
  int seasonal_deg = 1;
  int trend_deg = 1;
  int low_pass_deg = 1;
  int inner = 2;
  int outer = 1;  // robustness passes, used only when robust
  bool robust = false;

  int trend_len(int period) const {
    return trend > 0 ? trend : next_odd(1.5 * period / (1.0 - 1.5 / seasonal));
  }
  int low_pass_len(int period) const { return low_pass > 0 ? low_pass : next_odd(period); }
};

namespace stl_detail {

// Local weighted regression at abscissa xs over y[nleft..nright] (1-based, as in
// Cleveland et al.'s reference code). Returns false when all weights vanish.
inline bool est(const double* y, int n, int len, int deg, double xs, double& ys, int nleft, int nright, double* w,
                bool userw, const double* rw) {
  const double range = double(n) - 1.0;
  double h = std::max(xs - nleft, nright - xs);
  if (len > n) h += (len - n) / 2;
  const double h9 = 0.999 * h, h1 = 0.001 * h;
  double a = 0;
  for (int j = nleft; j <= nright; ++j) {
    w[j] = 0;
    const double r = std::abs(j - xs);
    if (r <= h9) {
      if (r <= h1) {
        w[j] = 1;
      } else {
        const double q = r / h;
        const double t = 1 - q * q * q;
        w[j] = t * t * t;
      }
      if (userw) w[j] *= rw[j];
      a += w[j];
    }
  }
  if (a <= 0) return false;
  for (int j = nleft; j <= nright; ++j) w[j] /= a;
  if (h > 0 && deg > 0) {
    double c = 0;
    a = 0;
    for (int j = nleft; j <= nright; ++j) a += w[j] * j;
    double b = xs - a;
    for (int j = nleft; j <= nright; ++j) c += w[j] * (j - a) * (j - a);
    if (std::sqrt(c) > 0.001 * range) {
      b /= c;
      for (int j = nleft; j <= nright; ++j) w[j] *= b * (j - a) + 1.0;
    }
  }
  ys = 0;
  for (int j = nleft; j <= nright; ++j) ys += w[j] * y[j];
  return true;
}

// Loess smooth of y[1..n] into ys[1..n] with window len (no jumps).
inline void ess(const double* y, int n, int len, int deg, bool userw, const double* rw, double* ys, double* w) {
  if (n < 2) {
    ys[1] = y[1];
    return;
  }
  if (len >= n) {
    for (int i = 1; i <= n; ++i)
      if (!est(y, n, len, deg, i, ys[i], 1, n, w, userw, rw)) ys[i] = y[i];
    return;
  }
  const int nsh = (len + 1) / 2;
  int nleft = 1, nright = len;
  for (int i = 1; i <= n; ++i) {
    if (i > nsh && nright != n) {
      ++nleft;
      ++nright;
    }
    if (!est(y, n, len, deg, i, ys[i], nleft, nright, w, userw, rw)) ys[i] = y[i];
  }
}

// Moving average of length len: ave[1..n-len+1].
inline void ma(const double* x, int n, int len, double* ave) {
  const int newn = n - len + 1;
  const double flen = len;
  double v = 0;
  for (int i = 1; i <= len; ++i) v += x[i];
  ave[1] = v / flen;
  for (int j = 2, k = len + 1, m = 1; j <= newn; ++j, ++k, ++m) {
    v = v - x[m] + x[k];
    ave[j] = v / flen;
  }
}

}  // namespace stl_detail

/// Seasonal-trend decomposition by loess on a regular series with integral period.
/// Throws InsufficientData when the series has fewer than two full periods.
inline Decomposition stl_decompose(std::span<const double> y, int period, const StlConfig& cfg = {}) {
  using namespace stl_detail;
  const int n = static_cast<int>(y.size());
  if (period < 2 || n < 2 * period) throw InsufficientData("insufficient periods: need at least 2 x " +
                                                           std::to_string(period) + " samples, have " +
                                                           std::to_string(n));
  const int np = period;
  const int ns = std::max(3, cfg.seasonal % 2 == 0 ? cfg.seasonal + 1 : cfg.seasonal);
  const int nt = cfg.trend_len(np);
  const int nl = cfg.low_pass_len(np);

  // 1-based work arrays, sized for the period-extended cycle-subseries.
  const int ext = n + 2 * np;
  std::vector<double> Y(n + 1), trend(n + 1, 0.0), season(ext + 1, 0.0), rw(n + 1, 1.0);
  std::vector<double> w1(ext + 1), w2(ext + 1), w3(ext + 1), w4(ext + 1), w5(ext + 1);
  std::copy(y.begin(), y.end(), Y.begin() + 1);

  auto subseries_smooth = [&](const double* x, bool userw, double* c) {
    // Smooth each cycle-subseries and extend it by one value at each end.
    std::vector<double> sub(n / np + 3), subw(n / np + 3), fit(n / np + 4), wt(n / np + 4);
    for (int j = 1; j <= np; ++j) {
      const int k = (n - j) / np + 1;
      for (int i = 1; i <= k; ++i) sub[i] = x[(i - 1) * np + j];
      if (userw)
        for (int i = 1; i <= k; ++i) subw[i] = rw[(i - 1) * np + j];
      ess(sub.data(), k, ns, cfg.seasonal_deg, userw, subw.data(), fit.data() + 1, wt.data());
      const int nright = std::min(ns, k);
      if (!est(sub.data(), k, ns, cfg.seasonal_deg, 0.0, fit[1], 1, nright, wt.data(), userw, subw.data()))
        fit[1] = fit[2];
      const int nleft = std::max(1, k - ns + 1);
      if (!est(sub.data(), k, ns, cfg.seasonal_deg, k + 1.0, fit[k + 2], nleft, k, wt.data(), userw, subw.data()))
        fit[k + 2] = fit[k + 1];
      for (int m = 1; m <= k + 2; ++m) c[(m - 1) * np + j] = fit[m];
    }
  };

  auto inner_loop = [&](bool userw) {
    for (int pass = 0; pass < cfg.inner; ++pass) {
      for (int i = 1; i <= n; ++i) w1[i] = Y[i] - trend[i];
      subseries_smooth(w1.data(), userw, w2.data());  // w2[1..n+2np]
      // Low-pass filter of the cycle-subseries: MA(np), MA(np), MA(3), loess(nl).
      ma(w2.data(), ext, np, w3.data());
      ma(w3.data(), ext - np + 1, np, w1.data());
      ma(w1.data(), ext - 2 * np + 2, 3, w3.data());
      ess(w3.data(), n, nl, cfg.low_pass_deg, false, rw.data(), w1.data(), w5.data());
      for (int i = 1; i <= n; ++i) season[i] = w2[np + i] - w1[i];
      for (int i = 1; i <= n; ++i) w1[i] = Y[i] - season[i];
      ess(w1.data(), n, nt, cfg.trend_deg, userw, rw.data(), trend.data(), w5.data());
    }
  };

  inner_loop(false);
  if (cfg.robust) {
    for (int pass = 0; pass < cfg.outer; ++pass) {
      // Bisquare robustness weights from residual magnitudes.
      std::vector<double> r(n);
      for (int i = 1; i <= n; ++i) r[i - 1] = std::abs(Y[i] - trend[i] - season[i]);
      std::vector<double> sorted = r;
      const int mid0 = (n - 1) / 2, mid1 = n / 2;
      std::nth_element(sorted.begin(), sorted.begin() + mid0, sorted.end());
      double med = sorted[mid0];
      if (mid1 != mid0) {
        std::nth_element(sorted.begin(), sorted.begin() + mid1, sorted.end());
        med = 0.5 * (med + sorted[mid1]);
      }
      const double cmad = 6.0 * med;
      const double c9 = 0.999 * cmad, c1 = 0.001 * cmad;
      for (int i = 1; i <= n; ++i) {
        const double ri = r[i - 1];
        if (ri <= c1) {
          rw[i] = 1;
        } else if (ri <= c9) {
          const double u = ri / cmad;
          rw[i] = (1 - u * u) * (1 - u * u);
        } else {
          rw[i] = 0;
        }
      }
      inner_loop(true);
    }
  }

  Decomposition d;
  d.period = period;
  d.observed.assign(y.begin(), y.end());
  d.trend.assign(trend.begin() + 1, trend.end());
  d.seasonal.assign(season.begin() + 1, season.begin() + 1 + n);
  d.residual.resize(n);
  for (int i = 0; i < n; ++i) d.residual[i] = d.observed[i] - d.trend[i] - d.seasonal[i];
  return d;
}

/// Classical decomposition: centred moving-average trend (ends extended by a
/// least-squares line through the nearest `period` trend values), seasonal =
/// per-phase mean of the de-trended series, centred to zero mean.
inline Decomposition naive_decompose(std::span<const double> y, int period) {
  const int n = static_cast<int>(y.size());
  if (period < 2 || n < 2 * period) throw InsufficientData("insufficient periods: need at least 2 x " +
                                                           std::to_string(period) + " samples, have " +
                                                           std::to_string(n));
  Decomposition d;
  d.period = period;
  d.observed.assign(y.begin(), y.end());
  d.trend.assign(n, 0.0);

  // Centred filter: P equal weights for odd P, 2xP weights for even P.
  std::vector<double> filt;
  if (period % 2 == 1) {
    filt.assign(period, 1.0 / period);
  } else {
    filt.assign(period + 1, 1.0 / period);
    filt.front() = filt.back() = 0.5 / period;
  }
  const int half = static_cast<int>(filt.size()) / 2;
  const int first = half, last = n - 1 - half;  // valid centred positions
  for (int i = first; i <= last; ++i) {
    double s = 0;
    for (int k = 0; k < static_cast<int>(filt.size()); ++k) s += filt[k] * y[i - half + k];
    d.trend[i] = s;
  }

  auto fit_line = [&](int from, int to) {  // least squares over trend[from..to]
    const double m = to - from + 1;
    double sx = 0, sy = 0;
    for (int i = from; i <= to; ++i) {
      sx += i;
      sy += d.trend[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (int i = from; i <= to; ++i) {
      sxx += (i - mx) * (i - mx);
      sxy += (i - mx) * (d.trend[i] - my);
    }
    const double b = sxx > 0 ? sxy / sxx : 0.0;
    return std::pair{my - b * mx, b};
  };
  const int npts = std::min(period, last - first + 1);
  {
    auto [a, b] = fit_line(first, first + npts - 1);
    for (int i = 0; i < first; ++i) d.trend[i] = a + b * i;
  }
  {
    auto [a, b] = fit_line(last - npts + 1, last);
    for (int i = last + 1; i < n; ++i) d.trend[i] = a + b * i;
  }

  std::vector<double> phase_sum(period, 0.0);
  std::vector<int> phase_n(period, 0);
  for (int i = 0; i < n; ++i) {
    phase_sum[i % period] += y[i] - d.trend[i];
    ++phase_n[i % period];
  }
  double centre = 0;
  for (int p = 0; p < period; ++p) {
    phase_sum[p] /= phase_n[p];
    centre += phase_sum[p];
  }
  centre /= period;
  d.seasonal.resize(n);
  d.residual.resize(n);
  for (int i = 0; i < n; ++i) {
    d.seasonal[i] = phase_sum[i % period] - centre;
    d.residual[i] = y[i] - d.trend[i] - d.seasonal[i];
  }
  return d;
}

enum class Decomposer { stl, naive };

/// Re-grids a count series to `period` samples per day and decomposes it.
inline Decomposition decompose_series(const ActiveCountSeries& s, Decomposer method, int period = kSamplesPerDay,
                                      const StlConfig& cfg = {}) {
  const auto grid = regrid_daily(s, period);
  Decomposition d = method == Decomposer::stl ? stl_decompose(grid.values, period, cfg)
                                              : naive_decompose(grid.values, period);
  d.block = s.block;
  d.timestamps.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) d.timestamps[i] = grid.timestamp(i);
  return d;
}

inline void write_decomposition(std::ostream& os, const Decomposition& d) {
  const auto name = to_string(d.block);
  char buf[192];
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::snprintf(buf, sizeof buf, " %lld %.17g %.17g %.17g %.17g\n", static_cast<long long>(d.timestamps[i]),
                  d.observed[i], d.trend[i], d.seasonal[i], d.residual[i]);
    os << name << buf;
  }
}

/// Parses a decomposition file; consecutive lines of one block form one entry.
inline std::vector<Decomposition> parse_decompositions(std::string_view text) {
  std::vector<Decomposition> out;
  detail::for_each_data_line(text, [&](std::size_t lineno, std::string_view line) {
    auto f = detail::split_ws(line);
    if (f.size() != 6) throw ParseError(lineno, "record", "expected 6 fields");
    auto b = parse_block(f[0]);
    if (!b) throw ParseError(lineno, "block", "bad block");
    if (out.empty() || out.back().block != *b) {
      out.emplace_back();
      out.back().block = *b;
    }
    auto& d = out.back();
    std::int64_t ts = 0;
    if (!detail::parse_number(f[1], ts)) throw ParseError(lineno, "timestamp", "not an integer");
    double v[4];
    for (int k = 0; k < 4; ++k) {
      try {
        v[k] = std::stod(std::string(f[2 + k]));
      } catch (const std::exception&) {
        throw ParseError(lineno, "value", "not a number: " + std::string(f[2 + k]));
      }
    }
    d.timestamps.push_back(ts);
    d.observed.push_back(v[0]);
    d.trend.push_back(v[1]);
    d.seasonal.push_back(v[2]);
    d.residual.push_back(v[3]);
  });
  return out;
}

}  // namespace blockpulse

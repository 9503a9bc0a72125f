// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fftw3.h>

#include <complex>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace blockpulse {

namespace detail {

// The FFTW planner is not reentrant; plan execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace detail

/// Forward DFT of a real sequence. Returns bins 0..n/2 (unnormalised,
/// X_k = sum_t x_t e^{-2 pi i k t / n}).
inline std::vector<std::complex<double>> real_dft(std::span<const double> x) {
  const int n = static_cast<int>(x.size());
  if (n == 0) return {};
  const int bins = n / 2 + 1;
  std::unique_ptr<double, detail::FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * n)));
  std::unique_ptr<fftw_complex, detail::FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.get(), out.get(), FFTW_ESTIMATE);
  }
  std::copy(x.begin(), x.end(), in.get());
  fftw_execute(plan);
  std::vector<std::complex<double>> spectrum(bins);
  for (int k = 0; k < bins; ++k) spectrum[k] = {out.get()[k][0], out.get()[k][1]};
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  return spectrum;
}

}  // namespace blockpulse

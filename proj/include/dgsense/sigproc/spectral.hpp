#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <fftw3.h>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::sigproc {

namespace detail {

/// FFTW's planner is not re-entrant; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// Owns an out-of-place real<->complex plan pair of one length.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        real_(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        spec_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    if (!real_ || !spec_) throw Error("fftw allocation failed");
    std::lock_guard lock(fftw_planner_mutex());
    const int len = static_cast<int>(n);
    forward_ = fftw_plan_dft_r2c_1d(len, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(len, spec_, real_, FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(forward_);
      fftw_destroy_plan(inverse_);
    }
    fftw_free(real_);
    fftw_free(spec_);
  }

  std::span<double> real() { return {real_, n_}; }
  std::span<fftw_complex> spectrum() { return {spec_, n_ / 2 + 1}; }
  void forward() { fftw_execute(forward_); }
  /// Unnormalised inverse (FFTW convention); caller divides by n.
  void inverse() { fftw_execute(inverse_); }

 private:
  std::size_t n_;
  double* real_;
  fftw_complex* spec_;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace detail

/// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

inline std::size_t stft_frame_count(std::size_t length, std::size_t window_len,
                                    std::size_t hop) {
  return (length - window_len) / hop + 1;
}

/// Magnitude short-time Fourier transform, Hann window, shape
/// (window_len/2 + 1) x frames. sample_rate only labels the axis and is
/// validated for positivity.
inline Tensor<float> stft_spectrogram(std::span<const float> series,
                                      double sample_rate, std::size_t window_len,
                                      std::size_t hop) {
  if (!(sample_rate > 0)) throw ArgumentError("sample_rate must be positive");
  if (window_len == 0 || hop == 0) throw ArgumentError("window and hop must be positive");
  if (window_len > series.size()) throw ArgumentError("window longer than series");
  const std::size_t frames = stft_frame_count(series.size(), window_len, hop);
  const std::size_t bins = window_len / 2 + 1;
  const auto window = hann_window(window_len);
  detail::RealFft fft(window_len);
  Tensor<float> out({bins, frames});
  for (std::size_t t = 0; t < frames; ++t) {
    auto buf = fft.real();
    for (std::size_t i = 0; i < window_len; ++i) {
      buf[i] = window[i] * series[t * hop + i];
    }
    fft.forward();
    auto spec = fft.spectrum();
    for (std::size_t f = 0; f < bins; ++f) {
      out.at(f, t) = static_cast<float>(std::hypot(spec[f][0], spec[f][1]));
    }
  }
  return out;
}

/// Frequency-domain band-pass: keeps rFFT bins whose centre lies in [lo, hi] Hz.
inline std::vector<double> bandpass(std::span<const double> series,
                                    double sample_rate, double lo_hz, double hi_hz) {
  if (!(lo_hz >= 0 && hi_hz > lo_hz)) throw ArgumentError("invalid pass band");
  const std::size_t n = series.size();
  if (n == 0) return {};
  detail::RealFft fft(n);
  std::copy(series.begin(), series.end(), fft.real().begin());
  fft.forward();
  auto spec = fft.spectrum();
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n);
    if (f < lo_hz || f > hi_hz) {
      spec[k][0] = 0.0;
      spec[k][1] = 0.0;
    }
  }
  fft.inverse();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fft.real()[i] / static_cast<double>(n);
  return out;
}

}  // namespace dgsense::sigproc

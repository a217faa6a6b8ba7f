#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::sigproc {

/// Half-sample symmetric reflection (d c b a | a b c d | d c b a).
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<std::ptrdiff_t>(n) ? m : period - 1 - m);
}

/// Sliding median over a reflect-padded window centred on each element.
inline std::vector<float> median_filter(std::span<const float> series,
                                        std::size_t window) {
  if (window == 0 || window % 2 == 0) {
    throw ArgumentError("median window must be odd and positive");
  }
  if (window > series.size()) {
    throw ArgumentError("median window exceeds series length");
  }
  const auto n = series.size();
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<float> out(n);
  std::vector<float> buf(window);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < window; ++k) {
      buf[k] = series[reflect_index(static_cast<std::ptrdiff_t>(i) - half +
                                        static_cast<std::ptrdiff_t>(k),
                                    n)];
    }
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[i] = buf[half];
  }
  return out;
}

/// Arithmetic mean over a reflect-padded window. An even window spans
/// [i - w/2, i + w/2 - 1].
inline std::vector<float> moving_average(std::span<const float> series,
                                         std::size_t window) {
  if (window == 0) throw ArgumentError("moving-average window must be positive");
  if (window > series.size()) {
    throw ArgumentError("moving-average window exceeds series length");
  }
  const auto n = series.size();
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < window; ++k) {
      sum += series[reflect_index(static_cast<std::ptrdiff_t>(i) - half +
                                      static_cast<std::ptrdiff_t>(k),
                                  n)];
    }
    out[i] = static_cast<float>(sum / static_cast<double>(window));
  }
  return out;
}

/// Zeroes entries whose magnitude falls below floor_ratio * max|image|.
inline Tensor<float> threshold_filter(const Tensor<float>& image,
                                      double floor_ratio) {
  if (!(floor_ratio >= 0.0 && floor_ratio < 1.0)) {
    throw ArgumentError("floor_ratio must lie in [0, 1)");
  }
  Tensor<float> out = image;
  float peak = 0.0f;
  for (float v : image.values()) peak = std::max(peak, std::abs(v));
  const double floor = floor_ratio * peak;
  for (float& v : out.values()) {
    if (std::abs(v) < floor) v = 0.0f;
  }
  return out;
}

}  // namespace dgsense::sigproc

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::sigproc {

/// Half-open index range [start, end).
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Locates the active part of a (channels x time) series: the smallest range
/// covering every sliding window whose channel-averaged variance exceeds
/// threshold_ratio times the largest window variance.
inline Segment variance_segment(const Tensor<float>& series, std::size_t window,
                                double threshold_ratio) {
  if (series.rank() != 2) throw ArgumentError("variance_segment expects channels x time");
  if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0)) {
    throw ArgumentError("threshold_ratio must lie in (0, 1)");
  }
  const std::size_t channels = series.dim(0);
  const std::size_t time = series.dim(1);
  if (window == 0 || window > time) {
    throw ArgumentError("variance window must be in [1, time length]");
  }
  const std::size_t count = time - window + 1;
  std::vector<double> var(count, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const float* row = series.data() + c * time;
    for (std::size_t s = 0; s < count; ++s) {
      double mean = 0.0;
      for (std::size_t k = 0; k < window; ++k) mean += row[s + k];
      mean /= static_cast<double>(window);
      double acc = 0.0;
      for (std::size_t k = 0; k < window; ++k) {
        const double d = row[s + k] - mean;
        acc += d * d;
      }
      var[s] += acc / static_cast<double>(window);
    }
  }
  for (double& v : var) v /= static_cast<double>(channels);
  const double peak = *std::max_element(var.begin(), var.end());
  if (!(peak > 0.0)) throw NoActivityError("series has no variance");
  const double threshold = threshold_ratio * peak;
  std::size_t first = count, last = 0;
  for (std::size_t s = 0; s < count; ++s) {
    if (var[s] > threshold) {
      first = std::min(first, s);
      last = s;
    }
  }
  return {first, last + window};
}

/// Power-burst-curve segmentation of a (freq x time) spectrogram restricted to
/// frequency rows [band.start, band.end).
inline Segment pbc_segment(const Tensor<float>& spectrogram, Segment band,
                           double threshold_ratio) {
  if (spectrogram.rank() != 2) throw ArgumentError("pbc_segment expects freq x time");
  if (!(threshold_ratio > 0.0 && threshold_ratio < 1.0)) {
    throw ArgumentError("threshold_ratio must lie in (0, 1)");
  }
  const std::size_t freqs = spectrogram.dim(0);
  const std::size_t frames = spectrogram.dim(1);
  if (band.start >= band.end || band.end > freqs) {
    throw ArgumentError("band outside the frequency axis");
  }
  std::vector<double> curve(frames, 0.0);
  for (std::size_t f = band.start; f < band.end; ++f) {
    for (std::size_t t = 0; t < frames; ++t) curve[t] += spectrogram.at(f, t);
  }
  const double peak = *std::max_element(curve.begin(), curve.end());
  if (!(peak > 0.0)) throw NoActivityError("no power inside the band");
  const double threshold = threshold_ratio * peak;
  std::size_t first = frames, last = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    if (curve[t] > threshold) {
      first = std::min(first, t);
      last = t;
    }
  }
  return {first, last + 1};
}

}  // namespace dgsense::sigproc

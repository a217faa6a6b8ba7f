#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::sigproc {

/// Removes 2*pi jumps between neighbours (jumps larger than pi are wrapped).
inline std::vector<double> unwrap(std::span<const float> phase) {
  std::vector<double> out(phase.begin(), phase.end());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double offset = 0.0;
  for (std::size_t k = 1; k < phase.size(); ++k) {
    double d = static_cast<double>(phase[k]) - static_cast<double>(phase[k - 1]);
    if (d > std::numbers::pi) {
      offset -= two_pi * std::ceil((d - std::numbers::pi) / two_pi);
    } else if (d < -std::numbers::pi) {
      offset += two_pi * std::ceil((-d - std::numbers::pi) / two_pi);
    }
    out[k] = phase[k] + offset;
  }
  return out;
}

/// Linear phase sanitisation of a (time x subcarrier) matrix: every row is
/// unwrapped along subcarriers and its least-squares line is subtracted,
/// cancelling timing offset (slope) and phase offset (intercept).
inline Tensor<float> sanitize_phase(const Tensor<float>& raw_phase) {
  if (raw_phase.rank() != 2) throw ArgumentError("phase must be time x subcarrier");
  const std::size_t rows = raw_phase.dim(0);
  const std::size_t cols = raw_phase.dim(1);
  if (cols < 2) throw ArgumentError("phase sanitisation needs >= 2 subcarriers");
  Tensor<float> out(raw_phase.shape());
  const double n = static_cast<double>(cols);
  const double mean_k = (n - 1.0) / 2.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < cols; ++k) {
    sxx += (k - mean_k) * (k - mean_k);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = unwrap(raw_phase.values().subspan(r * cols, cols));
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= n;
    double sxy = 0.0;
    for (std::size_t k = 0; k < cols; ++k) sxy += (k - mean_k) * (row[k] - mean);
    const double slope = sxy / sxx;
    for (std::size_t k = 0; k < cols; ++k) {
      out.at(r, k) = static_cast<float>(row[k] - mean - slope * (k - mean_k));
    }
  }
  return out;
}

}  // namespace dgsense::sigproc

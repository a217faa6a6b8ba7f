#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::nn {

/// -log softmax(logits)[label], stabilised by the log-sum-exp shift.
template <typename T>
T cross_entropy(std::span<const T> logits, int label) {
  if (logits.empty()) throw ArgumentError("cross_entropy needs at least one logit");
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw ArgumentError("label " + std::to_string(label) + " outside [0, " +
                        std::to_string(logits.size()) + ")");
  }
  const T peak = *std::max_element(logits.begin(), logits.end());
  T acc = 0;
  for (T v : logits) acc += std::exp(v - peak);
  return std::log(acc) + peak - logits[static_cast<std::size_t>(label)];
}

/// Argmax with the lowest index winning ties.
template <typename T>
int argmax(std::span<const T> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return static_cast<int>(best);
}

template <typename T>
struct BatchLoss {
  T mean = 0;
  std::vector<T> per_sample;
  /// d(scale * mean) / d(logits).
  Tensor<T> grad;
};

/// Batch-mean cross entropy over (B, K) logits; `scale` multiplies the
/// returned gradient only.
template <typename T>
BatchLoss<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels,
                                   T scale = T{1}) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ArgumentError("logits " + shape_string(logits.shape()) + " do not match " +
                        std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  BatchLoss<T> out;
  out.per_sample.resize(B);
  out.grad = Tensor<T>(logits.shape());
  T total = 0;
  for (std::size_t b = 0; b < B; ++b) {
    std::span<const T> row(logits.data() + b * K, K);
    out.per_sample[b] = cross_entropy(row, labels[b]);
    total += out.per_sample[b];
    const T peak = *std::max_element(row.begin(), row.end());
    T z = 0;
    for (T v : row) z += std::exp(v - peak);
    for (std::size_t k = 0; k < K; ++k) {
      T p = std::exp(row[k] - peak) / z;
      if (static_cast<int>(k) == labels[b]) p -= T{1};
      out.grad[b * K + k] = scale * p / static_cast<T>(B);
    }
  }
  out.mean = total / static_cast<T>(B);
  return out;
}

/// Mean squared error over all elements of two equally shaped tensors.
template <typename T>
T mse(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) throw ArgumentError("mse operands differ in size");
  T acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<T>(a.size());
}

}  // namespace dgsense::nn

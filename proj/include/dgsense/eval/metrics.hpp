#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/error.hpp"

namespace dgsense::eval {

/// Classification metrics. Precision and recall are for `positive_class` when
/// one is given, otherwise macro-averaged over classes. A ratio with a zero
/// denominator is reported as 0 and flagged.
struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  std::string averaging = "macro";
  std::optional<int> positive_class;
  /// confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : confusion) {
      for (auto v : row) n += v;
    }
    return n;
  }
};

namespace detail {

inline double ratio(std::size_t num, std::size_t den, bool& undefined) {
  if (den == 0) {
    undefined = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace detail

/// Fills accuracy, precision and recall from a confusion matrix.
inline Metrics metrics_from_confusion(std::vector<std::vector<std::size_t>> confusion,
                                      std::optional<int> positive_class = std::nullopt) {
  const std::size_t K = confusion.size();
  for (const auto& row : confusion) {
    if (row.size() != K) throw ArgumentError("confusion matrix must be square");
  }
  Metrics m;
  m.confusion = std::move(confusion);
  m.positive_class = positive_class;
  std::size_t diag = 0;
  for (std::size_t k = 0; k < K; ++k) diag += m.confusion[k][k];
  const std::size_t n = m.total();
  if (n == 0) throw ArgumentError("metrics need at least one prediction");
  m.accuracy = static_cast<double>(diag) / static_cast<double>(n);

  auto class_scores = [&](std::size_t c, bool& p_undef, bool& r_undef) {
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < K; ++k) {
      predicted += m.confusion[k][c];
      actual += m.confusion[c][k];
    }
    const std::size_t tp = m.confusion[c][c];
    return std::pair{detail::ratio(tp, predicted, p_undef), detail::ratio(tp, actual, r_undef)};
  };

  if (positive_class) {
    if (*positive_class < 0 || static_cast<std::size_t>(*positive_class) >= K) {
      throw ArgumentError("positive class outside the label range");
    }
    m.averaging = "binary";
    const auto [p, r] = class_scores(static_cast<std::size_t>(*positive_class), m.precision_undefined,
                                     m.recall_undefined);
    m.precision = p;
    m.recall = r;
  } else {
    m.averaging = "macro";
    double ps = 0, rs = 0;
    for (std::size_t c = 0; c < K; ++c) {
      const auto [p, r] = class_scores(c, m.precision_undefined, m.recall_undefined);
      ps += p;
      rs += r;
    }
    m.precision = ps / static_cast<double>(K);
    m.recall = rs / static_cast<double>(K);
  }
  return m;
}

/// `num_classes` defaults to one more than the largest label seen.
inline Metrics compute_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                               std::optional<int> positive_class = std::nullopt, std::size_t num_classes = 0) {
  if (y_true.size() != y_pred.size()) throw ArgumentError("label and prediction counts differ");
  if (y_true.empty()) throw ArgumentError("metrics need at least one prediction");
  int top = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_pred[i] < 0) throw ArgumentError("labels must be non-negative");
    top = std::max({top, y_true[i], y_pred[i]});
  }
  if (positive_class) top = std::max(top, *positive_class);
  const std::size_t K = std::max(num_classes, static_cast<std::size_t>(top) + 1);
  std::vector<std::vector<std::size_t>> confusion(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    confusion[static_cast<std::size_t>(y_true[i])][static_cast<std::size_t>(y_pred[i])] += 1;
  }
  return metrics_from_confusion(std::move(confusion), positive_class);
}

/// Element-wise sum of equally sized confusion matrices.
inline std::vector<std::vector<std::size_t>> add_confusion(const std::vector<std::vector<std::size_t>>& a,
                                                           const std::vector<std::vector<std::size_t>>& b) {
  if (a.empty()) return b;
  if (a.size() != b.size()) throw ArgumentError("confusion matrices differ in size");
  auto out = a;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) out[i][j] += b[i][j];
  }
  return out;
}

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["precision_undefined"] = m.precision_undefined;
  j["recall_undefined"] = m.recall_undefined;
  j["averaging"] = m.averaging;
  j["positive_class"] = m.positive_class ? nlohmann::json(*m.positive_class) : nlohmann::json(nullptr);
  j["confusion"] = m.confusion;
  return j;
}

}  // namespace dgsense::eval

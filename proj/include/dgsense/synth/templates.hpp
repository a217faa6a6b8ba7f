#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/rng.hpp"

namespace dgsense::synth {

/// Curve on the unit interval, stored on a uniform grid and read back with
/// linear interpolation. Values outside [0, 1] are zero.
class Curve {
 public:
  Curve() = default;
  explicit Curve(std::vector<double> knots) : knots_(std::move(knots)) {
    if (knots_.size() < 2) throw ArgumentError("a curve needs at least two knots");
  }

  double operator()(double u) const {
    if (!(u >= 0.0) || !(u <= 1.0)) return 0.0;
    const double pos = u * static_cast<double>(knots_.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), knots_.size() - 2);
    const double frac = pos - static_cast<double>(i);
    return knots_[i] * (1.0 - frac) + knots_[i + 1] * frac;
  }

  const std::vector<double>& knots() const { return knots_; }

 private:
  std::vector<double> knots_;
};

/// Tapered, smoothed random walk with unit peak magnitude. It is zero at both
/// ends so a rendered motion has a clear onset and end.
inline Curve smooth_walk(Rng& rng, std::size_t knots = 33, std::size_t smooth = 5) {
  std::vector<double> walk(knots);
  double acc = 0;
  for (auto& v : walk) {
    acc += rng.normal();
    v = acc;
  }
  std::vector<double> smoothed(knots);
  const auto half = static_cast<std::ptrdiff_t>(smooth / 2);
  for (std::size_t i = 0; i < knots; ++i) {
    double s = 0;
    int count = 0;
    for (std::ptrdiff_t d = -half; d <= half; ++d) {
      const auto j = static_cast<std::ptrdiff_t>(i) + d;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(knots)) continue;
      s += walk[static_cast<std::size_t>(j)];
      ++count;
    }
    smoothed[i] = s / count;
  }
  double mean = 0;
  for (double v : smoothed) mean += v;
  mean /= static_cast<double>(knots);
  double peak = 0;
  for (std::size_t i = 0; i < knots; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(knots - 1);
    smoothed[i] = (smoothed[i] - mean) * std::sin(std::numbers::pi * u);
    peak = std::max(peak, std::abs(smoothed[i]));
  }
  if (peak > 0) {
    for (auto& v : smoothed) v /= peak;
  }
  return Curve(std::move(smoothed));
}

/// Class motif: independent row curves for series and phase images, a ridge
/// trajectory in [0, 1] for spectrograms, and a (range, velocity) track for
/// range-Doppler frames (range in [0, 1], velocity in [-1, 1]).
struct ClassTemplate {
  int class_id = 0;
  std::vector<Curve> rows;
  Curve ridge;
  Curve track_range;
  Curve track_velocity;
  /// Temporal envelope of the motion energy.
  double envelope(double u) const {
    if (!(u >= 0.0) || !(u <= 1.0)) return 0.0;
    return std::sin(std::numbers::pi * u);
  }
};

inline double curve_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(a.size());
  mb /= static_cast<double>(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0;
  return sab / std::sqrt(saa * sbb);
}

/// Concatenated knot values of every curve of a template.
inline std::vector<double> template_signature(const ClassTemplate& t) {
  std::vector<double> sig;
  for (const auto& r : t.rows) sig.insert(sig.end(), r.knots().begin(), r.knots().end());
  sig.insert(sig.end(), t.ridge.knots().begin(), t.ridge.knots().end());
  sig.insert(sig.end(), t.track_velocity.knots().begin(), t.track_velocity.knots().end());
  return sig;
}

inline ClassTemplate make_class_template(int class_id, std::size_t num_rows, Rng& rng) {
  ClassTemplate t;
  t.class_id = class_id;
  for (std::size_t r = 0; r < num_rows; ++r) t.rows.push_back(smooth_walk(rng));
  auto centred = [](const Curve& c, double mid, double spread) {
    std::vector<double> k = c.knots();
    for (auto& v : k) v = mid + spread * v;
    return Curve(std::move(k));
  };
  t.ridge = centred(smooth_walk(rng), 0.5, 0.35);
  t.track_range = centred(smooth_walk(rng), 0.5, 0.3);
  t.track_velocity = smooth_walk(rng);
  return t;
}

/// Per-domain variant of a class motif: every curve is blended with a fresh
/// smooth walk, `strength` in [0, 1] being the weight of the new walk.
inline ClassTemplate personalize_template(const ClassTemplate& base, double strength, Rng& rng) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw ArgumentError("style strength must lie in [0, 1]");
  auto blend = [&](const Curve& c, double spread) {
    const Curve walk = smooth_walk(rng, c.knots().size());
    std::vector<double> k = c.knots();
    for (std::size_t i = 0; i < k.size(); ++i) k[i] += strength * spread * walk.knots()[i];
    return Curve(std::move(k));
  };
  ClassTemplate t = base;
  for (auto& r : t.rows) r = blend(r, 1.0);
  t.ridge = blend(base.ridge, 0.35);
  t.track_range = blend(base.track_range, 0.3);
  t.track_velocity = blend(base.track_velocity, 1.0);
  return t;
}

/// One template per class; a candidate is redrawn until its signature has
/// correlation below `max_correlation` with every earlier class.
inline std::vector<ClassTemplate> make_class_templates(std::size_t num_classes, std::size_t num_rows, Rng& rng,
                                                       double max_correlation = 0.9) {
  std::vector<ClassTemplate> out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw ArgumentError("could not draw sufficiently distinct class templates");
      auto t = make_class_template(static_cast<int>(c), num_rows, rng);
      const auto sig = template_signature(t);
      bool ok = true;
      for (const auto& prev : out) {
        if (std::abs(curve_correlation(sig, template_signature(prev))) >= max_correlation) ok = false;
      }
      if (ok) {
        out.push_back(std::move(t));
        break;
      }
    }
  }
  return out;
}

}  // namespace dgsense::synth

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense::sigproc {

/// Range-Doppler frames, each (range x velocity-bin) of non-negative power.
/// velocity_axis[v] is the radial velocity (m/s) of bin v.
struct RdmSequence {
  std::vector<Tensor<float>> frames;
  double frame_rate = 10.0;
  std::vector<float> velocity_axis;

  void validate() const {
    if (frames.empty()) throw ArgumentError("RDM sequence has no frames");
    const Shape& shape = frames.front().shape();
    if (shape.size() != 2) throw ArgumentError("RDM frames must be range x velocity");
    if (velocity_axis.size() != shape[1]) {
      throw ArgumentError("velocity axis length must match the velocity bins");
    }
    for (const auto& f : frames) {
      if (f.shape() != shape) throw ArgumentError("RDM frames differ in shape");
      for (float p : f.values()) {
        if (!(p >= 0.0f) || !std::isfinite(p)) {
          throw DataError("RDM power must be finite and non-negative");
        }
      }
    }
  }
};

/// Compressed Doppler map (time x range): for every frame and range cell the
/// velocity of the strongest Doppler bin. Ties prefer the smallest |v|, then
/// the negative velocity.
inline Tensor<float> compress_rdm(const RdmSequence& seq) {
  seq.validate();
  const std::size_t t = seq.frames.size();
  const std::size_t ranges = seq.frames.front().dim(0);
  const std::size_t vbins = seq.frames.front().dim(1);
  Tensor<float> cdm({t, ranges});
  for (std::size_t i = 0; i < t; ++i) {
    const auto& frame = seq.frames[i];
    for (std::size_t r = 0; r < ranges; ++r) {
      std::size_t best = 0;
      for (std::size_t v = 1; v < vbins; ++v) {
        const float p = frame.at(r, v);
        const float pb = frame.at(r, best);
        if (p > pb) {
          best = v;
        } else if (p == pb) {
          const float av = std::abs(seq.velocity_axis[v]);
          const float ab = std::abs(seq.velocity_axis[best]);
          if (av < ab || (av == ab && seq.velocity_axis[v] < seq.velocity_axis[best])) {
            best = v;
          }
        }
      }
      cdm.at(i, r) = seq.velocity_axis[best];
    }
  }
  return cdm;
}

/// Evenly spaced velocity axis centred on zero: bin v has (v - (n-1)/2) * step.
inline std::vector<float> symmetric_velocity_axis(std::size_t n, double step) {
  std::vector<float> axis(n);
  const double centre = (static_cast<double>(n) - 1.0) / 2.0;
  for (std::size_t v = 0; v < n; ++v) {
    axis[v] = static_cast<float>((static_cast<double>(v) - centre) * step);
  }
  return axis;
}

}  // namespace dgsense::sigproc

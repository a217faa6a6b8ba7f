#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/rng.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/sigproc/acoustic.hpp"
#include "dgsense/sigproc/rdm.hpp"
#include "dgsense/synth/templates.hpp"

namespace dgsense::synth {

/// Perturbation applied to every sample of one domain.
struct DomainShift {
  std::string domain_id;
  /// >1 stretches the motion in time.
  double time_scale = 1.0;
  double amplitude_gain = 1.0;
  /// Onset delay in samples of the rendered time axis.
  double delay = 0.0;
  double noise_sigma = 0.0;
  /// Gains across channels (series) or rows (images), interpolated to the
  /// rendered extent. Empty means all ones.
  std::vector<double> channel_tint;

  static DomainShift identity(std::string id) {
    DomainShift s;
    s.domain_id = std::move(id);
    return s;
  }

  void validate() const {
    const bool finite = std::isfinite(time_scale) && std::isfinite(amplitude_gain) && std::isfinite(delay) &&
                        std::isfinite(noise_sigma);
    if (!finite) throw ArgumentError("domain shift parameters must be finite");
    if (time_scale < 0.5 || time_scale > 2.0) throw ArgumentError("time_scale must lie in [0.5, 2]");
    if (!(amplitude_gain > 0)) throw ArgumentError("amplitude_gain must be positive");
    if (delay < 0) throw ArgumentError("delay must be non-negative");
    if (noise_sigma < 0) throw ArgumentError("noise_sigma must be non-negative");
    for (double g : channel_tint) {
      if (!std::isfinite(g)) throw ArgumentError("channel tint must be finite");
    }
  }

  double tint(std::size_t index, std::size_t extent) const {
    if (channel_tint.empty()) return 1.0;
    const std::size_t k = index * channel_tint.size() / std::max<std::size_t>(extent, 1);
    return channel_tint[std::min(k, channel_tint.size() - 1)];
  }
};

/// Per-sample random variation on top of the domain shift (standard deviations).
struct SampleJitter {
  double time_scale = 0.0;  // relative
  double delay = 0.0;       // fraction of the time axis
  double gain = 0.0;        // relative
};

/// Effective time warp and gain for one rendered sample. Time positions are
/// fractions of the axis; u = (t - 0.5 - delay) / scale + 0.5 is the motif
/// coordinate.
struct Warp {
  double scale = 1.0;
  double delay = 0.0;
  double gain = 1.0;

  double motif_coordinate(std::size_t t, std::size_t length) const {
    const double pos = (static_cast<double>(t) + 0.5) / static_cast<double>(length);
    return (pos - 0.5 - delay) / scale + 0.5;
  }
};

namespace detail {

/// Which axis of a rank-2 modality layout runs along time.
inline bool time_is_first_axis(ModalityKind kind) {
  return kind == ModalityKind::phase_map || kind == ModalityKind::compressed_doppler_map;
}

inline double gaussian(double x, double width) { return std::exp(-0.5 * (x / width) * (x / width)); }

}  // namespace detail

/// Noise-free rendering of a class motif for one modality.
inline Tensor<float> render_motif(const ClassTemplate& tpl, const Modality& modality, const Warp& warp,
                                  const DomainShift& shift) {
  modality.validate();
  Tensor<float> out(modality.shape);
  const Shape chw = modality.chw();
  switch (modality.kind) {
    case ModalityKind::amplitude_series: {
      const std::size_t C = chw[0], T = chw[2];
      for (std::size_t c = 0; c < C; ++c) {
        const Curve& row = tpl.rows[c % tpl.rows.size()];
        const double g = warp.gain * shift.tint(c, C);
        for (std::size_t t = 0; t < T; ++t) out[c * T + t] = static_cast<float>(g * row(warp.motif_coordinate(t, T)));
      }
      break;
    }
    case ModalityKind::phase_map: {
      // (time x subcarrier): smooth cosine profiles across subcarriers,
      // weighted by the row curves over time.
      const std::size_t C = chw[0], H = chw[1], W = chw[2];
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < H; ++t) {
          const double u = warp.motif_coordinate(t, H);
          for (std::size_t s = 0; s < W; ++s) {
            double v = 0;
            for (std::size_t j = 0; j < tpl.rows.size(); ++j) {
              const double basis = std::cos(std::numbers::pi * static_cast<double>(j + 1) *
                                            (static_cast<double>(s) + 0.5) / static_cast<double>(W));
              v += basis * tpl.rows[j](u);
            }
            out[(c * H + t) * W + s] = static_cast<float>(warp.gain * shift.tint(s, W) * v);
          }
        }
      }
      break;
    }
    case ModalityKind::spectrogram:
    case ModalityKind::audio_spectrogram: {
      // (frequency x time): a Gaussian ridge following the template
      // trajectory, modulated by the motion envelope.
      const std::size_t C = chw[0], F = chw[1], T = chw[2];
      const double width = 1.5 / static_cast<double>(F);
      for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t t = 0; t < T; ++t) {
          const double u = warp.motif_coordinate(t, T);
          const double env = tpl.envelope(u);
          const double centre = tpl.ridge(u);
          for (std::size_t f = 0; f < F; ++f) {
            const double pos = (static_cast<double>(f) + 0.5) / static_cast<double>(F);
            out[(c * F + f) * T + t] =
                static_cast<float>(warp.gain * shift.tint(f, F) * env * detail::gaussian(pos - centre, width));
          }
        }
      }
      break;
    }
    case ModalityKind::compressed_doppler_map:
      throw ArgumentError("compressed Doppler maps are rendered through range-Doppler frames");
  }
  return out;
}

/// Draws the per-sample warp for a domain shift and jitter. `length` is the
/// rendered time extent used to convert the delay in samples.
inline Warp draw_warp(const DomainShift& shift, const SampleJitter& jitter, std::size_t length, Rng& rng) {
  Warp w;
  w.scale = shift.time_scale * std::exp(jitter.time_scale * rng.normal());
  w.delay = shift.delay / static_cast<double>(length) + jitter.delay * rng.normal();
  w.gain = shift.amplitude_gain * std::exp(jitter.gain * rng.normal());
  return w;
}

inline void add_noise(Tensor<float>& t, double sigma, Rng& rng) {
  if (sigma <= 0) return;
  for (auto& v : t.values()) v += static_cast<float>(sigma * rng.normal());
}

inline std::string sample_name(const std::string& domain, const std::string& label, std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%03zu", index);
  return domain + "-" + label + "-" + buf;
}

inline std::vector<std::string> default_labels(std::size_t num_classes) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < num_classes; ++c) out.push_back("c" + std::to_string(c));
  return out;
}

inline void check_counts(std::size_t num_domains, std::size_t num_classes, std::size_t per_class,
                         const std::vector<DomainShift>& shifts) {
  if (num_domains == 0 || num_classes == 0 || per_class == 0) {
    throw ArgumentError("domain, class and per-class counts must be positive");
  }
  if (shifts.size() != num_domains) {
    throw ArgumentError("expected " + std::to_string(num_domains) + " domain shifts, got " +
                        std::to_string(shifts.size()));
  }
  for (const auto& s : shifts) s.validate();
}

/// Time length used to convert a shift's delay for a modality.
inline std::size_t time_length(const Modality& m) {
  const Shape chw = m.chw();
  return detail::time_is_first_axis(m.kind) ? chw[1] : chw[2];
}

/// Each sample is its class motif under the domain shift (plus jitter) with
/// additive Gaussian noise of the domain's noise_sigma.
inline SourceSet synth_series_dataset(std::size_t num_domains, std::size_t num_classes, std::size_t per_class,
                                      const Modality& modality, const std::vector<DomainShift>& shifts, Rng& rng,
                                      const SampleJitter& jitter = {}) {
  check_counts(num_domains, num_classes, per_class, shifts);
  modality.validate();
  const std::size_t rows = std::max<std::size_t>(4, modality.chw()[0]);
  const auto templates = make_class_templates(num_classes, rows, rng);
  SourceSet set;
  set.label_names = default_labels(num_classes);
  set.modalities = {modality};
  for (std::size_t d = 0; d < num_domains; ++d) {
    DomainDataset dom{shifts[d].domain_id, {}};
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (std::size_t j = 0; j < per_class; ++j) {
        const Warp w = draw_warp(shifts[d], jitter, time_length(modality), rng);
        Tensor<float> x = render_motif(templates[c], modality, w, shifts[d]);
        add_noise(x, shifts[d].noise_sigma, rng);
        Sample s{sample_name(dom.domain_id, set.label_names[c], j), dom.domain_id, static_cast<int>(c), {}};
        s.tensors.emplace(modality.kind, std::move(x));
        dom.samples.push_back(std::move(s));
      }
    }
    set.domains.push_back(std::move(dom));
  }
  set.validate();
  return set;
}

/// Range-Doppler geometry for synthetic radar sequences.
struct RdmGeometry {
  std::size_t frames = 16;
  std::size_t ranges = 16;
  std::size_t vbins = 17;
  double velocity_step = 0.25;
  double max_speed = 1.75;
  /// Static clutter power at zero velocity in every cell.
  double clutter = 0.05;
};

/// Radar frames whose peak follows the template's (range, velocity) track.
/// The warp shifts and stretches time and scales power, the tint varies power
/// across range cells, and folded Gaussian noise is added to every cell.
inline sigproc::RdmSequence render_rdm(const ClassTemplate& tpl, const RdmGeometry& g, const Warp& w,
                                       const DomainShift& shift, Rng& rng) {
  sigproc::RdmSequence seq;
  seq.frame_rate = 10.0;
  seq.velocity_axis = sigproc::symmetric_velocity_axis(g.vbins, g.velocity_step);
  const double range_width = 1.2, vel_width = 0.6;
  for (std::size_t i = 0; i < g.frames; ++i) {
    const double u = w.motif_coordinate(i, g.frames);
    const double env = tpl.envelope(u);
    const double r0 = tpl.track_range(u) * static_cast<double>(g.ranges);
    const double v0 = tpl.track_velocity(u) * g.max_speed;
    Tensor<float> frame({g.ranges, g.vbins});
    for (std::size_t r = 0; r < g.ranges; ++r) {
      const double tint = shift.tint(r, g.ranges);
      for (std::size_t v = 0; v < g.vbins; ++v) {
        const double vel = seq.velocity_axis[v];
        double p = w.gain * tint * env * detail::gaussian(static_cast<double>(r) + 0.5 - r0, range_width) *
                   detail::gaussian((vel - v0) / g.velocity_step, vel_width);
        if (vel == 0.0f) p += g.clutter;
        p += shift.noise_sigma * std::abs(rng.normal());
        frame.at(r, v) = static_cast<float>(std::max(0.0, p));
      }
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

/// Radar benchmark emitting the compressed Doppler map of each sequence.
inline SourceSet synth_rdm_dataset(std::size_t num_domains, std::size_t num_classes, std::size_t per_class,
                                   const RdmGeometry& geometry, const std::vector<DomainShift>& shifts, Rng& rng,
                                   const SampleJitter& jitter = {}) {
  check_counts(num_domains, num_classes, per_class, shifts);
  const auto templates = make_class_templates(num_classes, 4, rng);
  const Modality cdm{ModalityKind::compressed_doppler_map, {geometry.frames, geometry.ranges}};
  SourceSet set;
  set.label_names = default_labels(num_classes);
  set.modalities = {cdm};
  for (std::size_t d = 0; d < num_domains; ++d) {
    DomainDataset dom{shifts[d].domain_id, {}};
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (std::size_t j = 0; j < per_class; ++j) {
        const Warp w = draw_warp(shifts[d], jitter, geometry.frames, rng);
        const auto seq = render_rdm(templates[c], geometry, w, shifts[d], rng);
        Sample s{sample_name(dom.domain_id, set.label_names[c], j), dom.domain_id, static_cast<int>(c), {}};
        s.tensors.emplace(cdm.kind, sigproc::compress_rdm(seq));
        dom.samples.push_back(std::move(s));
      }
    }
    set.domains.push_back(std::move(dom));
  }
  set.validate();
  return set;
}

/// Piecewise-constant radial velocity over time.
struct MotionSegment {
  double velocity = 0.0;  // m/s, positive towards the microphone
  double duration = 0.0;  // s
};

/// Carrier tone plus a reflected component whose instantaneous frequency is
/// the Doppler-shifted carrier for the current velocity. Phase is continuous
/// across segments.
inline sigproc::AudioCapture synth_acoustic_wave(const std::vector<MotionSegment>& profile, double carrier_hz,
                                                 double sample_rate, double reflect_gain, Rng& rng,
                                                 double noise_sigma = 0.0) {
  sigproc::AudioCapture cap;
  cap.sample_rate = sample_rate;
  cap.carrier_hz = carrier_hz;
  if (!(sample_rate > 2.0 * carrier_hz)) throw ArgumentError("sample rate must exceed twice the carrier");
  for (const auto& seg : profile) {
    if (!(std::abs(seg.velocity) < sigproc::kSpeedOfSound)) {
      throw DomainError("segment speed must be below the speed of sound");
    }
    if (!(seg.duration >= 0)) throw ArgumentError("segment duration must be non-negative");
  }
  const double dt = 1.0 / sample_rate;
  double carrier_phase = 0, echo_phase = 0;
  std::size_t n = 0;
  for (const auto& seg : profile) {
    const auto count = static_cast<std::size_t>(std::llround(seg.duration * sample_rate));
    const double f_echo = sigproc::doppler_shift(carrier_hz, seg.velocity, 0.0);
    for (std::size_t i = 0; i < count; ++i, ++n) {
      const double v = std::sin(carrier_phase) + reflect_gain * std::sin(echo_phase) + noise_sigma * rng.normal();
      cap.waveform.push_back(static_cast<float>(v));
      carrier_phase = std::fmod(carrier_phase + 2.0 * std::numbers::pi * carrier_hz * dt, 2.0 * std::numbers::pi);
      echo_phase = std::fmod(echo_phase + 2.0 * std::numbers::pi * f_echo * dt, 2.0 * std::numbers::pi);
    }
  }
  return cap;
}

}  // namespace dgsense::synth

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dgsense/core/rng.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/sigproc/acoustic.hpp"
#include "dgsense/synth/datasets.hpp"

namespace dgsense::synth {

/// Shapes of the WiFi gesture benchmark modalities.
inline std::vector<Modality> gesture_modalities() {
  return {{ModalityKind::amplitude_series, {4, 64}},
          {ModalityKind::phase_map, {16, 16}},
          {ModalityKind::spectrogram, {16, 16}}};
}

/// Random per-domain shifts: log-uniform time scale, gain and tint, uniform
/// delay (in samples of a `length`-long axis) and noise level.
inline std::vector<DomainShift> draw_shifts(const std::vector<std::string>& ids, std::size_t length, Rng& rng) {
  std::vector<DomainShift> out;
  for (const auto& id : ids) {
    DomainShift s;
    s.domain_id = id;
    s.time_scale = std::exp(rng.uniform(std::log(0.7), std::log(1.4)));
    s.amplitude_gain = std::exp(rng.uniform(std::log(0.6), std::log(1.6)));
    s.delay = rng.uniform(0.0, 0.15) * static_cast<double>(length);
    s.noise_sigma = rng.uniform(0.05, 0.2);
    for (int k = 0; k < 4; ++k) s.channel_tint.push_back(std::exp(rng.uniform(std::log(0.5), std::log(1.5))));
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<std::string> domain_ids(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

/// How far each gesture6 user's motion templates drift from the shared ones.
inline constexpr double kGestureStyle = 0.6;

namespace detail {

inline SourceSet make_gesture6(Rng& templates_rng, Rng& shift_rng, Rng& sample_rng, double style = 0.0,
                               SampleJitter jitter = {0.05, 0.02, 0.08}) {
  const auto modalities = gesture_modalities();
  const std::size_t series_length = modalities[0].shape[1];
  const auto templates = make_class_templates(6, 4, templates_rng);
  const auto shifts = draw_shifts(domain_ids("P", 6), series_length, shift_rng);
  SourceSet set;
  set.label_names = {"L", "O", "V", "S", "W", "Z"};
  set.modalities = modalities;
  for (const auto& shift : shifts) {
    DomainDataset dom{shift.domain_id, {}};
    std::vector<ClassTemplate> personal;
    for (const auto& t : templates) personal.push_back(personalize_template(t, style, templates_rng));
    for (std::size_t c = 0; c < 6; ++c) {
      for (std::size_t j = 0; j < 20; ++j) {
        // One warp per sample, shared by all modalities.
        const Warp w = draw_warp(shift, jitter, series_length, sample_rng);
        Sample s{sample_name(dom.domain_id, set.label_names[c], j), dom.domain_id, static_cast<int>(c), {}};
        for (const auto& m : modalities) {
          Tensor<float> x = render_motif(personal[c], m, w, shift);
          add_noise(x, shift.noise_sigma, sample_rng);
          s.tensors.emplace(m.kind, std::move(x));
        }
        dom.samples.push_back(std::move(s));
      }
    }
    set.domains.push_back(std::move(dom));
  }
  return set;
}

inline SourceSet make_activity6(Rng& shift_rng, Rng& sample_rng) {
  const RdmGeometry geometry;
  auto shifts = draw_shifts(domain_ids("U", 6), geometry.frames, shift_rng);
  for (auto& s : shifts) s.noise_sigma *= 0.25;
  auto set = synth_rdm_dataset(6, 6, 20, geometry, shifts, sample_rng, SampleJitter{0.05, 0.02, 0.08});
  set.label_names = {"walk", "run", "jump", "squat", "wave", "sit"};
  for (auto& d : set.domains) {
    for (auto& s : d.samples) {
      const auto tail = s.sample_id.substr(s.sample_id.rfind('-') + 1);
      s.sample_id = d.domain_id + "-" + set.label_names[static_cast<std::size_t>(s.label)] + "-" + tail;
    }
  }
  return set;
}

/// Ridge trajectory (fraction of the frequency axis) of the Doppler shift
/// produced by a velocity curve, for a band of `rows` bins centred on the
/// carrier with `bin_hz` spacing.
inline Curve doppler_ridge(const Curve& velocity, double max_speed, std::size_t rows, double bin_hz) {
  std::vector<double> knots;
  const double carrier = 20000.0;
  for (double v : velocity.knots()) {
    const double offset = (sigproc::doppler_shift(carrier, v * max_speed, 0.0) - carrier) / bin_hz;
    knots.push_back((static_cast<double>(rows) / 2.0 + offset) / static_cast<double>(rows));
  }
  return Curve(std::move(knots));
}

inline SourceSet make_fall2(Rng& templates_rng, Rng& shift_rng, Rng& sample_rng) {
  const Modality m{ModalityKind::audio_spectrogram, {17, 16}};
  const std::size_t rows = m.shape[0];
  const double bin_hz = 300.0 / 8.0;
  // Template 0 is the fall: a fast, one-directional surge. The other four are
  // slower everyday motions.
  auto templates = make_class_templates(5, 4, templates_rng);
  {
    std::vector<double> knots(33);
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const double u = static_cast<double>(i) / 32.0;
      knots[i] = u < 0.7 ? std::pow(u / 0.7, 2.0) : std::max(0.0, 1.0 - (u - 0.7) / 0.1);
    }
    templates[0].ridge = doppler_ridge(Curve(knots), 2.5, rows, bin_hz);
  }
  for (std::size_t k = 1; k < templates.size(); ++k) {
    templates[k].ridge = doppler_ridge(templates[k].track_velocity, 1.0, rows, bin_hz);
  }
  const auto shifts = draw_shifts(domain_ids("E", 4), m.shape[1], shift_rng);
  const SampleJitter jitter{0.05, 0.02, 0.08};
  SourceSet set;
  set.label_names = {"nonfall", "fall"};
  set.modalities = {m};
  for (const auto& shift : shifts) {
    DomainDataset dom{shift.domain_id, {}};
    auto emit = [&](const ClassTemplate& tpl, int label, std::size_t index) {
      const Warp w = draw_warp(shift, jitter, m.shape[1], sample_rng);
      Tensor<float> x = render_motif(tpl, m, w, shift);
      add_noise(x, shift.noise_sigma, sample_rng);
      Sample s{sample_name(dom.domain_id, set.label_names[static_cast<std::size_t>(label)], index), dom.domain_id,
               label, {}};
      s.tensors.emplace(m.kind, std::move(x));
      dom.samples.push_back(std::move(s));
    };
    for (std::size_t j = 0; j < 40; ++j) emit(templates[0], 1, j);
    for (std::size_t k = 1; k < templates.size(); ++k) {
      for (std::size_t j = 0; j < 20; ++j) emit(templates[k], 0, (k - 1) * 20 + j);
    }
    set.domains.push_back(std::move(dom));
  }
  return set;
}

}  // namespace detail

inline const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names{"gesture6", "activity6", "fall2"};
  return names;
}

/// Fixed-size synthetic benchmark. gesture6: 6 users x 6 gestures x 20 with
/// three WiFi modalities; activity6: 6 users x 6 activities x 20 compressed
/// Doppler maps; fall2: 4 environments x (40 falls + 80 other motions).
inline SourceSet make_benchmark(const std::string& name, std::uint64_t seed) {
  Rng templates_rng = seeded_rng(seed, "benchmark/" + name + "/templates");
  Rng shift_rng = seeded_rng(seed, "benchmark/" + name + "/shifts");
  Rng sample_rng = seeded_rng(seed, "benchmark/" + name + "/samples");
  SourceSet set;
  if (name == "gesture6") {
    set = detail::make_gesture6(templates_rng, shift_rng, sample_rng, kGestureStyle);
  } else if (name == "activity6") {
    set = detail::make_activity6(shift_rng, sample_rng);
  } else if (name == "fall2") {
    set = detail::make_fall2(templates_rng, shift_rng, sample_rng);
  } else {
    throw ArgumentError("unknown benchmark '" + name + "' (expected gesture6, activity6 or fall2)");
  }
  set.validate();
  return set;
}

}  // namespace dgsense::synth

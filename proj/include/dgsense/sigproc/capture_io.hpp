#pragma once

#include <complex>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/binary_io.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/error.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/sigproc/acoustic.hpp"
#include "dgsense/sigproc/csi.hpp"
#include "dgsense/sigproc/filters.hpp"
#include "dgsense/sigproc/phase.hpp"
#include "dgsense/sigproc/rdm.hpp"

namespace dgsense::sigproc {

namespace fs = std::filesystem;

/// CSI capture: raw interleaved (re, im) float32, shape [T, tx, rx, subcarriers].
inline CsiRecord read_csi(const fs::path& file, const Shape& shape, double sample_rate) {
  if (shape.size() != 4) throw FormatError("CSI shape must be [T, tx, rx, subcarriers]");
  const auto values = decode_f32_le(read_file_bytes(file));
  const std::size_t expected = 2 * shape_size(shape);
  if (values.size() != expected) {
    throw CorruptionError(file.string() + ": expected " + std::to_string(expected) +
                          " floats for complex shape " + shape_string(shape) + ", found " +
                          std::to_string(values.size()));
  }
  CsiRecord rec;
  rec.num_tx = shape[1];
  rec.num_rx = shape[2];
  rec.num_subcarriers = shape[3];
  rec.sample_rate = sample_rate;
  rec.timestamps.resize(shape[0]);
  for (std::size_t t = 0; t < shape[0]; ++t) rec.timestamps[t] = static_cast<double>(t) / sample_rate;
  rec.csi.resize(shape_size(shape));
  for (std::size_t i = 0; i < rec.csi.size(); ++i) rec.csi[i] = {values[2 * i], values[2 * i + 1]};
  rec.validate();
  return rec;
}

inline void write_csi(const CsiRecord& rec, const fs::path& file) {
  std::vector<float> inter(2 * rec.csi.size());
  for (std::size_t i = 0; i < rec.csi.size(); ++i) {
    inter[2 * i] = rec.csi[i].real();
    inter[2 * i + 1] = rec.csi[i].imag();
  }
  std::string bytes;
  append_f32_le(bytes, inter);
  write_file_bytes(file, bytes);
}

/// RDM capture: frame-major float32, shape [frames, ranges, velocity bins].
inline RdmSequence read_rdm(const fs::path& file, const Shape& shape, double frame_rate,
                            std::vector<float> velocity_axis) {
  if (shape.size() != 3) throw FormatError("RDM shape must be [frames, ranges, vbins]");
  const auto values = decode_f32_le(read_file_bytes(file));
  if (values.size() != shape_size(shape)) {
    throw CorruptionError(file.string() + ": expected " + std::to_string(shape_size(shape)) +
                          " floats, found " + std::to_string(values.size()));
  }
  RdmSequence seq;
  seq.frame_rate = frame_rate;
  seq.velocity_axis = std::move(velocity_axis);
  const std::size_t per = shape[1] * shape[2];
  for (std::size_t f = 0; f < shape[0]; ++f) {
    seq.frames.emplace_back(Shape{shape[1], shape[2]},
                            std::vector<float>(values.begin() + f * per, values.begin() + (f + 1) * per));
  }
  seq.validate();
  return seq;
}

/// Settings for turning one raw capture into model-ready tensors.
struct PreprocessOptions {
  std::size_t median_window = 5;
  Band dfs_band{};
  std::size_t csi_window = 256;
  std::size_t csi_hop = 64;
  std::size_t audio_window = 4096;
  std::size_t audio_hop = 1024;
  double audio_half_band = 300.0;
  double image_floor_ratio = 0.05;
};

/// Runs the modality-specific front end described by a capture descriptor:
///   {"kind": "csi", "file": ..., "shape": [T, tx, rx, sub], "sample_rate": Hz}
///   {"kind": "rdm", "file": ..., "shape": [t, r, v], "frame_rate": Hz, "velocity_step": m/s}
///   {"kind": "audio", "file": ..., "carrier_hz": Hz}
/// Relative file paths resolve against the descriptor's directory.
inline TensorMap preprocess_capture(const fs::path& descriptor, const PreprocessOptions& opt) {
  const auto j = read_json_file(descriptor.string());
  TensorMap out;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    fs::path file = j.at("file").get<std::string>();
    if (file.is_relative()) file = descriptor.parent_path() / file;
    if (kind == "csi") {
      const auto rec = read_csi(file, j.at("shape").get<Shape>(), j.value("sample_rate", 1000.0));
      const std::size_t link = select_link(rec);
      const std::size_t T = rec.length();
      const std::size_t S = rec.num_subcarriers;
      Tensor<float> amp({S, T});
      Tensor<float> raw_phase({T, S});
      for (std::size_t s = 0; s < S; ++s) {
        std::vector<float> series(T);
        for (std::size_t t = 0; t < T; ++t) {
          series[t] = std::abs(rec.at(t, link, s));
          raw_phase.at(t, s) = std::arg(rec.at(t, link, s));
        }
        const auto smooth = median_filter(series, std::min(opt.median_window | 1, T - (T % 2 == 0)));
        for (std::size_t t = 0; t < T; ++t) amp.at(s, t) = smooth[t];
      }
      out.emplace(ModalityKind::amplitude_series, std::move(amp));
      out.emplace(ModalityKind::phase_map, sanitize_phase(raw_phase));
      out.emplace(ModalityKind::spectrogram,
                  csi_doppler_spectrogram(rec, opt.dfs_band, opt.csi_window, opt.csi_hop));
    } else if (kind == "rdm") {
      const auto shape = j.at("shape").get<Shape>();
      const auto axis = symmetric_velocity_axis(shape.at(2), j.value("velocity_step", 0.25));
      const auto seq = read_rdm(file, shape, j.value("frame_rate", 10.0), axis);
      out.emplace(ModalityKind::compressed_doppler_map, compress_rdm(seq));
    } else if (kind == "audio") {
      const auto cap = read_wav(file, j.value("carrier_hz", 20000.0));
      out.emplace(ModalityKind::audio_spectrogram,
                  threshold_filter(acoustic_doppler_spectrogram(cap, opt.audio_half_band,
                                                                opt.audio_window, opt.audio_hop),
                                   opt.image_floor_ratio));
    } else {
      throw FormatError("unknown capture kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed capture descriptor " + descriptor.string() + ": " + e.what());
  }
  return out;
}

}  // namespace dgsense::sigproc

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dgsense/core/binary_io.hpp"
#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"
#include "dgsense/sigproc/spectral.hpp"

namespace dgsense::sigproc {

inline constexpr double kSpeedOfSound = 343.0;

struct AudioCapture {
  std::vector<float> waveform;
  double sample_rate = 48000.0;
  double carrier_hz = 20000.0;

  void validate() const {
    if (!(sample_rate > 2.0 * carrier_hz)) {
      throw ArgumentError("sample rate must exceed twice the carrier frequency");
    }
    for (float v : waveform) {
      if (!std::isfinite(v)) throw DataError("waveform contains non-finite samples");
    }
  }
};

/// Received frequency of a tone f_t reflected by a body moving at v (m/s)
/// at angle theta to the beam.
inline double doppler_shift(double f_t, double v, double theta,
                            double c = kSpeedOfSound) {
  const double radial = v * std::cos(theta);
  const double denom = c - radial;
  if (!(denom > 0.0) || !(c + radial > 0.0)) {
    throw DomainError("|v cos(theta)| must be below the propagation speed");
  }
  return f_t * (c + radial) / denom;
}

/// Index of the STFT bin nearest to `hz`.
inline std::size_t frequency_bin(double hz, double sample_rate, std::size_t window_len) {
  return static_cast<std::size_t>(std::llround(hz * static_cast<double>(window_len) / sample_rate));
}

/// Doppler spectrogram around the carrier: rows cover
/// [carrier - half_band, carrier + half_band] with the carrier bin in the
/// middle row; row offsets are in units of sample_rate / window_len.
inline Tensor<float> acoustic_doppler_spectrogram(const AudioCapture& cap, double half_band,
                                                  std::size_t window_len, std::size_t hop) {
  cap.validate();
  if (!(half_band > 0.0) || !(cap.carrier_hz - half_band > 0.0) ||
      !(cap.carrier_hz + half_band < cap.sample_rate / 2.0)) {
    throw ArgumentError("carrier +/- half_band must lie inside (0, sample_rate/2)");
  }
  const auto full = stft_spectrogram(cap.waveform, cap.sample_rate, window_len, hop);
  const std::size_t centre = frequency_bin(cap.carrier_hz, cap.sample_rate, window_len);
  const auto half_bins = static_cast<std::size_t>(
      std::floor(half_band * static_cast<double>(window_len) / cap.sample_rate));
  if (centre < half_bins || centre + half_bins >= full.dim(0)) {
    throw ArgumentError("Doppler band exceeds the spectrogram");
  }
  const std::size_t rows = 2 * half_bins + 1;
  const std::size_t frames = full.dim(1);
  Tensor<float> out({rows, frames});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < frames; ++t) {
      out.at(r, t) = full.at(centre - half_bins + r, t);
    }
  }
  return out;
}

/// Reads a mono 16-bit PCM WAV file into [-1, 1) floats.
inline AudioCapture read_wav(const std::filesystem::path& path, double carrier_hz) {
  const std::string bytes = read_file_bytes(path);
  auto u32 = [&](std::size_t off) {
    if (off + 4 > bytes.size()) throw FormatError("truncated WAV " + path.string());
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + b])) << (8 * b);
    return v;
  };
  auto u16 = [&](std::size_t off) {
    if (off + 2 > bytes.size()) throw FormatError("truncated WAV " + path.string());
    return static_cast<std::uint16_t>(static_cast<unsigned char>(bytes[off]) |
                                      (static_cast<unsigned char>(bytes[off + 1]) << 8));
  };
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw FormatError(path.string() + " is not a RIFF/WAVE file");
  }
  std::size_t off = 12;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (off + 8 <= bytes.size()) {
    const std::string id = bytes.substr(off, 4);
    const std::uint32_t len = u32(off + 4);
    const std::size_t body = off + 8;
    if (id == "fmt ") {
      if (u16(body) != 1) throw FormatError("only PCM WAV is supported");
      if (u16(body + 2) != 1) throw FormatError("only mono WAV is supported");
      rate = u32(body + 4);
      if (u16(body + 14) != 16) throw FormatError("only 16-bit WAV is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("WAV data chunk precedes fmt chunk");
      if (body + len > bytes.size()) throw CorruptionError("WAV data chunk truncated");
      AudioCapture cap;
      cap.sample_rate = rate;
      cap.carrier_hz = carrier_hz;
      cap.waveform.resize(len / 2);
      for (std::size_t i = 0; i < cap.waveform.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(u16(body + 2 * i));
        cap.waveform[i] = static_cast<float>(raw) / 32768.0f;
      }
      return cap;
    }
    off = body + len + (len & 1u);
  }
  throw FormatError(path.string() + " has no data chunk");
}

inline void write_wav(const AudioCapture& cap, const std::filesystem::path& path) {
  std::string out;
  auto put32 = [&](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  };
  auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
  };
  const auto n = static_cast<std::uint32_t>(cap.waveform.size());
  const auto rate = static_cast<std::uint32_t>(std::llround(cap.sample_rate));
  out += "RIFF";
  put32(36 + 2 * n);
  out += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(rate);
  put32(rate * 2);
  put16(2);
  put16(16);
  out += "data";
  put32(2 * n);
  for (float v : cap.waveform) {
    const double clipped = std::clamp(static_cast<double>(v), -1.0, 32767.0 / 32768.0);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(clipped * 32768.0))));
  }
  write_file_bytes(path, out);
}

}  // namespace dgsense::sigproc

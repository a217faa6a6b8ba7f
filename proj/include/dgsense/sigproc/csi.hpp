#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"
#include "dgsense/sigproc/spectral.hpp"

namespace dgsense::sigproc {

/// Complex channel estimates laid out as time x (tx * rx * subcarrier),
/// subcarrier fastest.
struct CsiRecord {
  std::vector<double> timestamps;
  std::vector<std::complex<float>> csi;
  std::size_t num_tx = 1;
  std::size_t num_rx = 1;
  std::size_t num_subcarriers = 1;
  double sample_rate = 1000.0;

  std::size_t num_links() const noexcept { return num_tx * num_rx; }
  std::size_t width() const noexcept { return num_links() * num_subcarriers; }
  std::size_t length() const noexcept { return timestamps.size(); }

  const std::complex<float>& at(std::size_t t, std::size_t link, std::size_t sub) const {
    return csi[t * width() + link * num_subcarriers + sub];
  }

  void validate() const {
    if (!(sample_rate > 0)) throw ArgumentError("CSI sample_rate must be positive");
    if (num_tx == 0 || num_rx == 0 || num_subcarriers == 0) {
      throw ArgumentError("CSI link layout must be non-empty");
    }
    if (csi.size() != length() * width()) {
      throw ArgumentError("CSI matrix size does not match timestamps x links x subcarriers");
    }
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      if (!(timestamps[i] > timestamps[i - 1])) {
        throw ArgumentError("CSI timestamps must be strictly increasing");
      }
    }
    for (const auto& h : csi) {
      if (!std::isfinite(h.real()) || !std::isfinite(h.imag())) {
        throw DataError("CSI contains non-finite entries");
      }
    }
  }
};

struct Band {
  double lo_hz = 2.0;
  double hi_hz = 80.0;
};

enum class Reduction { principal_component, mean };

/// Amplitude matrix (time x subcarrier) of one link.
inline Eigen::MatrixXd link_amplitudes(const CsiRecord& rec, std::size_t link) {
  Eigen::MatrixXd amp(rec.length(), rec.num_subcarriers);
  for (std::size_t t = 0; t < rec.length(); ++t) {
    for (std::size_t s = 0; s < rec.num_subcarriers; ++s) {
      amp(t, s) = std::abs(rec.at(t, link, s));
    }
  }
  return amp;
}

/// Link whose subcarrier amplitudes vary most over time (mean temporal
/// variance across subcarriers); ties resolve to the lowest link index.
inline std::size_t select_link(const CsiRecord& rec) {
  std::size_t best = 0;
  double best_var = -1.0;
  for (std::size_t l = 0; l < rec.num_links(); ++l) {
    const auto amp = link_amplitudes(rec, l);
    const Eigen::RowVectorXd mean = amp.colwise().mean();
    const double var = (amp.rowwise() - mean).array().square().mean();
    if (var > best_var) {
      best_var = var;
      best = l;
    }
  }
  return best;
}

/// Doppler spectrogram from CSI amplitudes: link selection, band-pass,
/// reduction of subcarriers to one series, magnitude STFT.
inline Tensor<float> csi_doppler_spectrogram(const CsiRecord& rec, Band band,
                                             std::size_t window_len, std::size_t hop,
                                             Reduction reduction = Reduction::principal_component) {
  rec.validate();
  const std::size_t link = select_link(rec);
  const auto amp = link_amplitudes(rec, link);
  const std::size_t T = rec.length();
  const std::size_t S = rec.num_subcarriers;
  Eigen::MatrixXd filtered(T, S);
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> col(T);
    for (std::size_t t = 0; t < T; ++t) col[t] = amp(t, s);
    const auto bp = bandpass(col, rec.sample_rate, band.lo_hz, band.hi_hz);
    for (std::size_t t = 0; t < T; ++t) filtered(t, s) = bp[t];
  }
  const Eigen::RowVectorXd mean = filtered.colwise().mean();
  Eigen::MatrixXd centered = filtered.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(T);
  const double scale = amp.cwiseAbs().maxCoeff();
  if (!(cov.trace() > 1e-12 * std::max(1.0, scale * scale))) {
    throw NoActivityError("CSI amplitudes carry no in-band variation");
  }
  Eigen::VectorXd projected;
  if (reduction == Reduction::principal_component) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd pc = eig.eigenvectors().col(S - 1);
    projected = centered * pc;
  } else {
    projected = centered.rowwise().mean();
  }
  std::vector<float> series(T);
  for (std::size_t t = 0; t < T; ++t) series[t] = static_cast<float>(projected(t));
  return stft_spectrogram(series, rec.sample_rate, window_len, hop);
}

}  // namespace dgsense::sigproc

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense {

enum class ModalityKind {
  amplitude_series,
  phase_map,
  spectrogram,
  compressed_doppler_map,
  audio_spectrogram,
};

inline constexpr std::array<ModalityKind, 5> kAllModalityKinds = {
    ModalityKind::amplitude_series, ModalityKind::phase_map,
    ModalityKind::spectrogram, ModalityKind::compressed_doppler_map,
    ModalityKind::audio_spectrogram};

inline std::string_view to_string(ModalityKind kind) {
  switch (kind) {
    case ModalityKind::amplitude_series: return "amplitude_series";
    case ModalityKind::phase_map: return "phase_map";
    case ModalityKind::spectrogram: return "spectrogram";
    case ModalityKind::compressed_doppler_map: return "compressed_doppler_map";
    case ModalityKind::audio_spectrogram: return "audio_spectrogram";
  }
  return "unknown";
}

inline ModalityKind modality_from_string(std::string_view name) {
  for (auto kind : kAllModalityKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw ArgumentError("unknown modality kind '" + std::string(name) + "'");
}

/// Time-series kinds are convolved along time only; the rest are images.
inline bool is_time_series(ModalityKind kind) {
  return kind == ModalityKind::amplitude_series;
}

struct Modality {
  ModalityKind kind{};
  Shape shape;

  void validate() const {
    if (shape.empty()) {
      throw ArgumentError("modality " + std::string(to_string(kind)) +
                          " has an empty shape");
    }
    for (auto extent : shape) {
      if (extent == 0) {
        throw ArgumentError("modality " + std::string(to_string(kind)) +
                            " has a zero extent");
      }
    }
    if (is_time_series(kind) && shape.size() != 2) {
      throw ArgumentError("amplitude_series must be rank 2 (channels x time)");
    }
    if (!is_time_series(kind) && shape.size() != 2 && shape.size() != 3) {
      throw ArgumentError(std::string(to_string(kind)) +
                          " must be rank 2 or 3");
    }
  }

  /// Image modalities are handled as (channels, height, width).
  Shape chw() const {
    if (is_time_series(kind)) return {shape[0], 1, shape[1]};
    if (shape.size() == 2) return {1, shape[0], shape[1]};
    return shape;
  }

  friend bool operator==(const Modality&, const Modality&) = default;
};

using TensorMap = std::map<ModalityKind, Tensor<float>>;

struct Sample {
  std::string sample_id;
  std::string domain_id;
  int label = 0;
  TensorMap tensors;

  const Tensor<float>& tensor(ModalityKind kind) const {
    auto it = tensors.find(kind);
    if (it == tensors.end()) {
      throw ArgumentError("sample " + sample_id + " lacks modality " +
                          std::string(to_string(kind)));
    }
    return it->second;
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct DomainDataset {
  std::string domain_id;
  std::vector<Sample> samples;

  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    if (samples.empty()) {
      throw DataError("domain '" + domain_id + "' has no samples");
    }
    std::set<std::string> ids;
    for (const auto& s : samples) {
      if (s.domain_id != domain_id) {
        throw DataError("sample " + s.sample_id + " carries domain '" +
                        s.domain_id + "' inside domain '" + domain_id + "'");
      }
      if (!ids.insert(s.sample_id).second) {
        throw DataError("duplicate sample id '" + s.sample_id +
                        "' in domain '" + domain_id + "'");
      }
    }
  }

  friend bool operator==(const DomainDataset&, const DomainDataset&) = default;
};

/// Identifiers become path components on disk.
inline void validate_identifier(const std::string& id, std::string_view what) {
  if (id.empty() || id == "." || id == "..") {
    throw ArgumentError(std::string(what) + " identifier is empty or reserved");
  }
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-';
    if (!ok) {
      throw ArgumentError(std::string(what) + " identifier '" + id +
                          "' may only contain [A-Za-z0-9_-]");
    }
  }
}

struct SourceSet {
  std::vector<DomainDataset> domains;
  std::vector<std::string> label_names;
  std::vector<Modality> modalities;

  std::size_t num_domains() const noexcept { return domains.size(); }
  std::size_t num_classes() const noexcept { return label_names.size(); }

  std::size_t total_samples() const noexcept {
    std::size_t n = 0;
    for (const auto& d : domains) n += d.size();
    return n;
  }

  const DomainDataset& domain(const std::string& id) const {
    for (const auto& d : domains) {
      if (d.domain_id == id) return d;
    }
    throw ArgumentError("unknown domain '" + id + "'");
  }

  bool has_domain(const std::string& id) const {
    return std::any_of(domains.begin(), domains.end(),
                       [&](const auto& d) { return d.domain_id == id; });
  }

  const Modality& modality(ModalityKind kind) const {
    for (const auto& m : modalities) {
      if (m.kind == kind) return m;
    }
    throw ArgumentError("source set has no modality " +
                        std::string(to_string(kind)));
  }

  /// Throws on the first violated invariant.
  void validate() const {
    if (domains.empty()) throw DataError("source set has no domains");
    if (label_names.empty()) throw DataError("source set has no labels");
    if (modalities.empty()) throw DataError("source set has no modalities");
    std::set<ModalityKind> kinds;
    for (const auto& m : modalities) {
      m.validate();
      if (!kinds.insert(m.kind).second) {
        throw DataError("duplicate modality " + std::string(to_string(m.kind)));
      }
    }
    std::set<std::string> labels;
    for (const auto& l : label_names) {
      validate_identifier(l, "label");
      if (!labels.insert(l).second) throw DataError("duplicate label " + l);
    }
    std::set<std::string> ids;
    for (const auto& d : domains) {
      validate_identifier(d.domain_id, "domain");
      if (!ids.insert(d.domain_id).second) {
        throw DataError("duplicate domain id '" + d.domain_id + "'");
      }
      d.validate();
      for (const auto& s : d.samples) {
        validate_identifier(s.sample_id, "sample");
        validate_sample(s);
      }
    }
  }

  void validate_sample(const Sample& s) const {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= label_names.size()) {
      throw DataError("sample " + s.sample_id + " has label " +
                      std::to_string(s.label) + " outside [0, " +
                      std::to_string(label_names.size()) + ")");
    }
    if (s.tensors.size() != modalities.size()) {
      throw DataError("sample " + s.sample_id +
                      " does not provide exactly the declared modalities");
    }
    for (const auto& m : modalities) {
      const auto& t = s.tensor(m.kind);
      if (t.shape() != m.shape) {
        throw DataError("sample " + s.sample_id + " modality " +
                        std::string(to_string(m.kind)) + " has shape " +
                        shape_string(t.shape()) + ", declared " +
                        shape_string(m.shape));
      }
      if (!t.all_finite()) {
        throw DataError("sample " + s.sample_id + " modality " +
                        std::string(to_string(m.kind)) +
                        " contains non-finite values");
      }
    }
  }

  friend bool operator==(const SourceSet&, const SourceSet&) = default;
};

enum class SplitMode { leave_one_domain_out, k_fold_in_domain };

struct SplitSpec {
  SplitMode mode = SplitMode::leave_one_domain_out;
  /// Empty in leave-one-domain-out mode means "every domain in turn".
  std::vector<std::string> target_domains;
  std::size_t k = 5;
};

}  // namespace dgsense

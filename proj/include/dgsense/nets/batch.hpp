#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "dgsense/core/types.hpp"

namespace dgsense::nets {

/// Per-modality batched inputs, each (B, C, H, W); time series use H = 1.
template <typename T>
using ModalBatch = std::map<ModalityKind, Tensor<T>>;

template <typename T>
struct LabeledBatch {
  ModalBatch<T> inputs;
  std::vector<int> labels;
  std::size_t size() const noexcept { return labels.size(); }
};

/// Stacks the selected samples into one batch per declared modality.
template <typename T>
LabeledBatch<T> make_batch(std::span<const Sample* const> samples,
                           const std::vector<Modality>& modalities) {
  LabeledBatch<T> batch;
  const std::size_t B = samples.size();
  for (const auto& m : modalities) {
    const Shape chw = m.chw();
    const std::size_t per = shape_size(chw);
    Tensor<T> t({B, chw[0], chw[1], chw[2]});
    for (std::size_t b = 0; b < B; ++b) {
      const auto& src = samples[b]->tensor(m.kind);
      if (src.size() != per) {
        throw ArgumentError("sample " + samples[b]->sample_id + " modality " +
                            std::string(to_string(m.kind)) + " has shape " +
                            shape_string(src.shape()) + ", expected " + shape_string(m.shape));
      }
      std::copy(src.values().begin(), src.values().end(), t.data() + b * per);
    }
    batch.inputs.emplace(m.kind, std::move(t));
  }
  batch.labels.reserve(B);
  for (const auto* s : samples) batch.labels.push_back(s->label);
  return batch;
}

template <typename T>
LabeledBatch<T> make_batch(const std::vector<Sample>& samples, std::span<const std::size_t> indices,
                           const std::vector<Modality>& modalities) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(indices.size());
  for (auto i : indices) ptrs.push_back(&samples.at(i));
  return make_batch<T>(std::span<const Sample* const>(ptrs), modalities);
}

}  // namespace dgsense::nets

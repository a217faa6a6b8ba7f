#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/binary_io.hpp"
#include "dgsense/core/checkpoint.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/nets/batch.hpp"
#include "dgsense/nn/layers.hpp"
#include "dgsense/nn/loss.hpp"
#include "dgsense/nn/residual.hpp"

namespace dgsense::nets {

using nn::Sequential;

/// Architecture shared by every network of one training run.
struct NetworkSpec {
  std::vector<Modality> modalities;
  std::string preset = "small";
  std::size_t feature_dim = 128;
  std::size_t num_classes = 2;
  std::array<double, 3> alpha{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["preset"] = preset;
    j["feature_dim"] = feature_dim;
    j["num_classes"] = num_classes;
    j["alpha"] = alpha;
    j["modalities"] = nlohmann::json::array();
    for (const auto& m : modalities) {
      j["modalities"].push_back({{"kind", to_string(m.kind)}, {"shape", m.shape}});
    }
    return j;
  }

  static NetworkSpec from_json(const nlohmann::json& j) {
    NetworkSpec s;
    s.preset = j.at("preset").get<std::string>();
    s.feature_dim = j.at("feature_dim").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.alpha = j.at("alpha").get<std::array<double, 3>>();
    for (const auto& m : j.at("modalities")) {
      s.modalities.push_back({modality_from_string(m.at("kind").get<std::string>()),
                              m.at("shape").get<Shape>()});
    }
    return s;
  }
};

namespace detail {

struct Widths {
  std::vector<std::size_t> stages;
  std::size_t blocks_per_stage;
  std::size_t reduction;
  std::size_t spatial_kernel;
  std::vector<std::size_t> hidden;
};

inline Widths preset_widths(const std::string& preset) {
  if (preset == "small") return {{8, 16}, 1, 4, 3, {64, 32}};
  if (preset == "resnet18") return {{64, 128, 256, 512}, 2, 16, 7, {256, 128}};
  throw ArgumentError("unknown network preset '" + preset + "'");
}

}  // namespace detail

/// 1-D convolutional extractor over (C, 1, T): conv -> relu -> pool blocks,
/// global average pooling and a linear projection to the feature size.
template <typename T>
Sequential<T> make_temporal_extractor(const Shape& chw, std::size_t feature_dim,
                                      const std::string& preset, Rng& rng) {
  const auto w = detail::preset_widths(preset);
  Sequential<T> net;
  std::size_t in = chw[0];
  std::size_t length = chw[2];
  std::vector<std::size_t> widths = w.stages;
  widths.push_back(w.stages.back());
  for (std::size_t i = 0; i < widths.size(); ++i) {
    net.add(nn::Conv2d<T>({in, widths[i], 1, 5, 1, 1, 0, 2}, rng));
    net.add(nn::ReLU<T>());
    if (i + 1 < widths.size() && length >= 4) {
      net.add(nn::MaxPool2d<T>(1, 2));
      length /= 2;
    }
    in = widths[i];
  }
  net.add(nn::GlobalAvgPool<T>());
  net.add(nn::Linear<T>(in, feature_dim, rng));
  return net;
}

/// Residual extractor over (C, H, W) with channel+spatial attention in every
/// block, global average pooling and a linear projection.
template <typename T>
Sequential<T> make_spatial_extractor(const Shape& chw, std::size_t feature_dim,
                                     const std::string& preset, Rng& rng) {
  const auto w = detail::preset_widths(preset);
  Sequential<T> net;
  net.add(nn::Conv2d<T>({chw[0], w.stages.front(), 3, 3, 1, 1, 1, 1}, rng));
  net.add(nn::ReLU<T>());
  std::size_t h = chw[1], wd = chw[2];
  if (h >= 8 && wd >= 8) {
    net.add(nn::MaxPool2d<T>(2, 2));
    h /= 2;
    wd /= 2;
  }
  std::size_t in = w.stages.front();
  for (std::size_t s = 0; s < w.stages.size(); ++s) {
    for (std::size_t b = 0; b < w.blocks_per_stage; ++b) {
      const bool downsample = s > 0 && b == 0 && h >= 2 && wd >= 2;
      const std::size_t stride = downsample ? 2 : 1;
      net.add(nn::ResidualBlock<T>(
          {in, w.stages[s], stride, true, w.reduction, std::min(w.spatial_kernel, 2 * (h / stride) - 1), false},
          rng));
      if (downsample) {
        h = (h - 1) / 2 + 1;
        wd = (wd - 1) / 2 + 1;
      }
      in = w.stages[s];
    }
  }
  net.add(nn::GlobalAvgPool<T>());
  net.add(nn::Linear<T>(in, feature_dim, rng));
  return net;
}

/// Three fully connected layers from features to class logits.
template <typename T>
Sequential<T> make_classifier(std::size_t feature_dim, std::size_t num_classes,
                              const std::string& preset, Rng& rng) {
  const auto w = detail::preset_widths(preset);
  Sequential<T> net;
  net.add(nn::Linear<T>(feature_dim, w.hidden[0], rng));
  net.add(nn::ReLU<T>());
  net.add(nn::Linear<T>(w.hidden[0], w.hidden[1], rng));
  net.add(nn::ReLU<T>());
  net.add(nn::Linear<T>(w.hidden[1], num_classes, rng));
  return net;
}

/// f = sum_k alpha_k * f_k over equally shaped feature tensors.
template <typename T>
Tensor<T> fuse_features(std::span<const Tensor<T>> features, std::span<const double> alpha) {
  if (features.empty() || features.size() != alpha.size()) {
    throw ArgumentError("fusion needs one weight per feature tensor");
  }
  Tensor<T> out(features.front().shape());
  for (std::size_t k = 0; k < features.size(); ++k) {
    if (features[k].shape() != out.shape()) throw ArgumentError("fused features differ in dimension");
    const T a = static_cast<T>(alpha[k]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * features[k][i];
  }
  return out;
}

template <typename T>
Tensor<T> fuse_features(const Tensor<T>& f_am, const Tensor<T>& f_ph, const Tensor<T>& f_sp,
                        const std::array<double, 3>& alpha) {
  const std::array<Tensor<T>, 3> fs{f_am, f_ph, f_sp};
  return fuse_features<T>(std::span<const Tensor<T>>(fs), std::span<const double>(alpha));
}

/// One extractor branch per modality (temporal for time series, spatial for
/// images), fused by weighted sum. A single-modality extractor has weight 1.
template <typename T>
class Extractor {
 public:
  struct Branch {
    Modality modality;
    Sequential<T> net;
    double alpha = 1.0;
  };

  Extractor() = default;
  Extractor(const NetworkSpec& spec, Rng& rng) {
    if (spec.modalities.empty()) throw ArgumentError("extractor needs at least one modality");
    if (spec.modalities.size() > 3) throw ArgumentError("at most three fused modalities are supported");
    for (std::size_t i = 0; i < spec.modalities.size(); ++i) {
      const auto& m = spec.modalities[i];
      m.validate();
      Branch b{m,
               is_time_series(m.kind) ? make_temporal_extractor<T>(m.chw(), spec.feature_dim, spec.preset, rng)
                                      : make_spatial_extractor<T>(m.chw(), spec.feature_dim, spec.preset, rng),
               spec.modalities.size() == 1 ? 1.0 : spec.alpha[i]};
      branches_.push_back(std::move(b));
    }
  }

  Tensor<T> forward(const ModalBatch<T>& x) {
    std::vector<Tensor<T>> feats;
    std::vector<double> alpha;
    for (auto& b : branches_) {
      auto it = x.find(b.modality.kind);
      if (it == x.end()) {
        throw ArgumentError("batch lacks modality " + std::string(to_string(b.modality.kind)));
      }
      const Shape chw = b.modality.chw();
      const auto& s = it->second.shape();
      if (s.size() != 4 || s[1] != chw[0] || s[2] != chw[1] || s[3] != chw[2]) {
        throw ArgumentError("modality " + std::string(to_string(b.modality.kind)) + " batch has shape " +
                            shape_string(s) + ", expected per-sample " + shape_string(chw));
      }
      feats.push_back(b.net.forward(it->second));
      alpha.push_back(b.alpha);
    }
    return fuse_features<T>(feats, alpha);
  }

  void backward(const Tensor<T>& grad) {
    for (auto& b : branches_) {
      Tensor<T> g = grad;
      const T a = static_cast<T>(b.alpha);
      for (auto& v : g.values()) v *= a;
      b.net.backward(g);
    }
  }

  void collect(const std::string& prefix, nn::ParamList<T>& out) {
    for (auto& b : branches_) b.net.collect(nn::join_name(prefix, std::string(to_string(b.modality.kind))), out);
  }

  void set_frozen(bool frozen) {
    for (auto& b : branches_) b.net.set_frozen(frozen);
  }

  std::vector<Branch>& branches() { return branches_; }

 private:
  std::vector<Branch> branches_;
};

/// Feature extractor followed by a classifier.
template <typename T>
class Network {
 public:
  Network() = default;
  Network(const NetworkSpec& spec, Rng& rng)
      : spec_(spec),
        extractor_(spec, rng),
        classifier_(make_classifier<T>(spec.feature_dim, spec.num_classes, spec.preset, rng)) {}

  const NetworkSpec& spec() const { return spec_; }
  Extractor<T>& extractor() { return extractor_; }
  Sequential<T>& classifier() { return classifier_; }

  Tensor<T> features(const ModalBatch<T>& x) { return extractor_.forward(x); }
  Tensor<T> classify(const Tensor<T>& features) { return classifier_.forward(features); }
  Tensor<T> logits(const ModalBatch<T>& x) { return classify(features(x)); }

  std::vector<int> predict(const ModalBatch<T>& x) {
    const auto l = logits(x);
    std::vector<int> out(l.dim(0));
    const std::size_t K = l.dim(1);
    for (std::size_t b = 0; b < out.size(); ++b) {
      out[b] = nn::argmax<T>(std::span<const T>(l.data() + b * K, K));
    }
    return out;
  }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> out;
    extractor_.collect("extractor", out);
    classifier_.collect("classifier", out);
    return out;
  }

  void set_frozen(bool frozen) {
    extractor_.set_frozen(frozen);
    classifier_.set_frozen(frozen);
  }

  void zero_grad() {
    for (auto& p : parameters()) p.param->zero_grad();
  }

  /// SHA-256 over parameter names and float32 values in collection order.
  std::string digest() {
    std::string bytes;
    for (auto& p : parameters()) {
      bytes += p.name;
      const auto f = p.param->value.template cast<float>();
      append_f32_le(bytes, f.values());
    }
    return sha256_hex(bytes);
  }

  void copy_parameters_from(Network& other) {
    auto dst = parameters();
    auto src = other.parameters();
    if (dst.size() != src.size()) throw ArgumentError("networks differ in structure");
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i].name != src[i].name || dst[i].param->value.shape() != src[i].param->value.shape()) {
        throw ArgumentError("networks differ at parameter " + dst[i].name);
      }
      dst[i].param->value = src[i].param->value;
    }
  }

  bool all_finite() {
    for (auto& p : parameters()) {
      if (!p.param->value.all_finite()) return false;
    }
    return true;
  }

  Checkpoint to_checkpoint(const std::string& module, const nlohmann::json& config) {
    Checkpoint ck;
    ck.module = module;
    ck.config = config;
    ck.extra["network"] = spec_.to_json();
    for (auto& p : parameters()) ck.params.push_back({p.name, p.param->value.template cast<float>()});
    return ck;
  }

  void load_checkpoint(const Checkpoint& ck) {
    for (auto& p : parameters()) {
      const auto& src = ck.param(p.name);
      if (src.shape() != p.param->value.shape()) {
        throw FormatError("checkpoint parameter " + p.name + " has shape " + shape_string(src.shape()));
      }
      p.param->value = src.template cast<T>();
    }
  }

 private:
  NetworkSpec spec_;
  Extractor<T> extractor_;
  Sequential<T> classifier_;
};

}  // namespace dgsense::nets

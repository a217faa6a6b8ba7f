#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/checkpoint.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/nets/batch.hpp"
#include "dgsense/nn/layers.hpp"
#include "dgsense/nn/optim.hpp"
#include "dgsense/vae/loss.hpp"

namespace dgsense::vae {

using nn::Sequential;

/// Channel widths of the strided convolution stages and the latent size.
struct VaeArch {
  std::vector<std::size_t> widths{16, 32, 32};
  std::size_t latent_dim = 32;

  nlohmann::json to_json() const { return {{"widths", widths}, {"latent_dim", latent_dim}}; }
  static VaeArch from_json(const nlohmann::json& j) {
    return {j.at("widths").get<std::vector<std::size_t>>(), j.at("latent_dim").get<std::size_t>()};
  }
};

namespace detail {

/// How many stride-2 stages a (C, H, W) input supports, up to `wanted`.
/// Time series (H = 1) are only halved along W.
inline std::size_t halvings(const Shape& chw, std::size_t wanted) {
  std::size_t h = chw[1], w = chw[2], n = 0;
  const bool temporal = h == 1;
  while (n < wanted && w % 2 == 0 && w >= 4 && (temporal || (h % 2 == 0 && h >= 4))) {
    w /= 2;
    if (!temporal) h /= 2;
    ++n;
  }
  return n;
}

inline Shape bottom_shape(const Shape& chw, std::size_t steps, std::size_t width) {
  const bool temporal = chw[1] == 1;
  const std::size_t scale = std::size_t{1} << steps;
  return {width, temporal ? 1 : chw[1] / scale, chw[2] / scale};
}

template <typename T>
typename nn::Conv2d<T>::Options down_conv(std::size_t in, std::size_t out, bool temporal) {
  if (temporal) return {in, out, 1, 4, 1, 2, 0, 1};
  return {in, out, 4, 4, 2, 2, 1, 1};
}

template <typename T>
typename nn::ConvTranspose2d<T>::Options up_conv(std::size_t in, std::size_t out, bool temporal) {
  if (temporal) return {in, out, 1, 4, 1, 2, 0, 1};
  return {in, out, 4, 4, 2, 2, 1, 1};
}

}  // namespace detail

/// Convolutional encoder producing the posterior mean and log standard deviation.
template <typename T>
class Encoder {
 public:
  struct Output {
    Tensor<T> mu;
    Tensor<T> log_sigma;
  };

  Encoder() = default;
  Encoder(const Shape& chw, const VaeArch& arch, Rng& rng) : chw_(chw) {
    if (arch.widths.empty()) throw ArgumentError("generator needs at least one convolution width");
    const bool temporal = chw[1] == 1;
    const std::size_t steps = detail::halvings(chw, arch.widths.size());
    std::size_t in = chw[0];
    std::size_t flat = 0;
    if (steps == 0) {
      trunk_.add(nn::Conv2d<T>({in, arch.widths[0], temporal ? 1u : 3u, 3, 1, 1, temporal ? 0u : 1u, 1}, rng));
      trunk_.add(nn::ReLU<T>());
      flat = arch.widths[0] * chw[1] * chw[2];
    } else {
      for (std::size_t s = 0; s < steps; ++s) {
        trunk_.add(nn::Conv2d<T>(detail::down_conv<T>(in, arch.widths[s], temporal), rng));
        trunk_.add(nn::ReLU<T>());
        in = arch.widths[s];
      }
      flat = shape_size(detail::bottom_shape(chw, steps, in));
    }
    mu_head_.emplace(flat, arch.latent_dim, rng);
    log_sigma_head_.emplace(flat, arch.latent_dim, rng);
    // Start near the prior: small posterior means and unit deviations.
    for (auto& v : mu_head_->weight().value.values()) v *= T(0.1);
    log_sigma_head_->weight().value.fill(T{0});
  }

  const Shape& chw() const { return chw_; }

  Output forward(const Tensor<T>& x) {
    const Tensor<T> h = trunk_.forward(x);
    return {mu_head_->forward(h), log_sigma_head_->forward(h)};
  }

  Tensor<T> backward(const Tensor<T>& d_mu, const Tensor<T>& d_log_sigma) {
    Tensor<T> dh = mu_head_->backward(d_mu);
    const Tensor<T> dh2 = log_sigma_head_->backward(d_log_sigma);
    for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
    return trunk_.backward(dh);
  }

  void collect(const std::string& prefix, nn::ParamList<T>& out) {
    trunk_.collect(nn::join_name(prefix, "trunk"), out);
    mu_head_->collect(nn::join_name(prefix, "mu"), out);
    log_sigma_head_->collect(nn::join_name(prefix, "log_sigma"), out);
  }

 private:
  Shape chw_;
  Sequential<T> trunk_;
  std::optional<nn::Linear<T>> mu_head_, log_sigma_head_;
};

/// Linear projection from the latent followed by transposed convolutions
/// back to the modality layout.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const Shape& chw, const VaeArch& arch, Rng& rng) : chw_(chw) {
    if (arch.widths.empty()) throw ArgumentError("generator needs at least one convolution width");
    const bool temporal = chw[1] == 1;
    const std::size_t steps = detail::halvings(chw, arch.widths.size());
    if (steps == 0) {
      const Shape hidden{arch.widths[0], chw[1], chw[2]};
      net_.add(nn::Linear<T>(arch.latent_dim, shape_size(hidden), rng));
      net_.add(nn::ReLU<T>());
      net_.add(nn::Reshape<T>(hidden));
      net_.add(nn::Conv2d<T>({arch.widths[0], chw[0], temporal ? 1u : 3u, 3, 1, 1, temporal ? 0u : 1u, 1}, rng));
      return;
    }
    const Shape bottom = detail::bottom_shape(chw, steps, arch.widths[steps - 1]);
    net_.add(nn::Linear<T>(arch.latent_dim, shape_size(bottom), rng));
    net_.add(nn::ReLU<T>());
    net_.add(nn::Reshape<T>(bottom));
    for (std::size_t s = steps; s-- > 0;) {
      const std::size_t out = s == 0 ? chw[0] : arch.widths[s - 1];
      net_.add(nn::ConvTranspose2d<T>(detail::up_conv<T>(arch.widths[s], out, temporal), rng));
      if (s != 0) net_.add(nn::ReLU<T>());
    }
  }

  const Shape& chw() const { return chw_; }
  Tensor<T> forward(const Tensor<T>& z) { return net_.forward(z); }
  Tensor<T> backward(const Tensor<T>& g) { return net_.backward(g); }
  void collect(const std::string& prefix, nn::ParamList<T>& out) { net_.collect(prefix, out); }

 private:
  Shape chw_;
  Sequential<T> net_;
};

/// Per-sample latent statistics of a batch.
template <typename T>
struct Posterior {
  Tensor<T> mu;
  Tensor<T> sigma;
};

/// One encoder over a base modality and one decoder per reconstructed
/// modality. A single-modal generator is the case where the decoder set is
/// just the base modality.
template <typename T>
class EncoderDecoders {
 public:
  EncoderDecoders() = default;
  EncoderDecoders(const Modality& base, const std::vector<Modality>& outputs, const VaeArch& arch, Rng& rng)
      : base_(base), arch_(arch), encoder_(base.chw(), arch, rng) {
    base.validate();
    if (outputs.empty()) throw ArgumentError("generator needs at least one decoder");
    for (const auto& m : outputs) {
      m.validate();
      if (!decoders_.emplace(m.kind, Decoder<T>(m.chw(), arch, rng)).second) {
        throw ArgumentError("duplicate decoder modality " + std::string(to_string(m.kind)));
      }
      outputs_.push_back(m);
    }
  }

  const Modality& base() const { return base_; }
  const std::vector<Modality>& outputs() const { return outputs_; }
  const VaeArch& arch() const { return arch_; }
  std::size_t latent_dim() const { return arch_.latent_dim; }
  Encoder<T>& encoder() { return encoder_; }
  Decoder<T>& decoder(ModalityKind kind) {
    auto it = decoders_.find(kind);
    if (it == decoders_.end()) throw ArgumentError("no decoder for " + std::string(to_string(kind)));
    return it->second;
  }

  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }
  const std::vector<double>& history() const { return history_; }
  std::vector<double>& history() { return history_; }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> out;
    encoder_.collect("encoder", out);
    for (auto& [kind, dec] : decoders_) dec.collect(nn::join_name("decoder", std::string(to_string(kind))), out);
    return out;
  }

  bool all_finite() {
    for (auto& p : parameters()) {
      if (!p.param->value.all_finite()) return false;
    }
    return true;
  }

  /// x is (B, C, H, W) in the base modality layout.
  Posterior<T> encode(const Tensor<T>& x) {
    auto out = encoder_.forward(x);
    Posterior<T> post{std::move(out.mu), std::move(out.log_sigma)};
    for (auto& v : post.sigma.values()) v = std::exp(v);
    return post;
  }

  nets::ModalBatch<T> decode(const Tensor<T>& z) {
    nets::ModalBatch<T> out;
    for (auto& [kind, dec] : decoders_) out.emplace(kind, dec.forward(z));
    return out;
  }

  /// Reconstruction from the posterior mean (no sampling).
  nets::ModalBatch<T> reconstruct(const Tensor<T>& x) { return decode(encode(x).mu); }

  /// One optimisation step on a batch that carries the base modality and every
  /// decoded modality. Returns the batch objective before the update.
  double train_step(const nets::ModalBatch<T>& batch, double lambda_kl, Rng& rng, nn::Optimizer<T>& opt) {
    const auto base_it = batch.find(base_.kind);
    if (base_it == batch.end()) throw ArgumentError("batch lacks the base modality");
    const Tensor<T>& x = base_it->second;
    opt.zero_grad();
    auto enc = encoder_.forward(x);
    const std::size_t B = x.dim(0), L = arch_.latent_dim;
    Tensor<T> sigma = enc.log_sigma;
    for (auto& v : sigma.values()) v = std::exp(v);
    Tensor<T> eps(enc.mu.shape());
    for (auto& v : eps.values()) v = static_cast<T>(rng.normal());
    Tensor<T> z(enc.mu.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = enc.mu[i] + sigma[i] * eps[i];

    nets::ModalBatch<T> targets, recs;
    Tensor<T> dz(z.shape());
    for (auto& [kind, dec] : decoders_) {
      const auto it = batch.find(kind);
      if (it == batch.end()) throw ArgumentError("batch lacks modality " + std::string(to_string(kind)));
      Tensor<T> rec = dec.forward(z);
      const Tensor<T>& target = it->second;
      if (rec.shape() != target.shape()) throw ArgumentError("decoder output does not match modality shape");
      Tensor<T> drec(rec.shape());
      const T scale = T(2) / static_cast<T>(rec.size());
      for (std::size_t i = 0; i < rec.size(); ++i) drec[i] = scale * (rec[i] - target[i]);
      const Tensor<T> dzk = dec.backward(drec);
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += dzk[i];
      targets.emplace(kind, target);
      recs.emplace(kind, std::move(rec));
    }
    const double loss = crossmodal_loss(targets, recs, enc.mu, sigma, lambda_kl);

    const T kl_scale = static_cast<T>(lambda_kl * static_cast<double>(decoders_.size()) / static_cast<double>(B));
    Tensor<T> d_mu(enc.mu.shape()), d_log_sigma(enc.mu.shape());
    for (std::size_t i = 0; i < B * L; ++i) {
      d_mu[i] = dz[i] + kl_scale * enc.mu[i];
      d_log_sigma[i] = dz[i] * eps[i] * sigma[i] + kl_scale * (sigma[i] * sigma[i] - T{1});
    }
    encoder_.backward(d_mu, d_log_sigma);
    opt.step();
    return loss;
  }

  /// z~ = omega_signal * z + omega_noise * eta, decoded by every decoder.
  /// z is the posterior mean unless `sample_latent`. One eta per sample,
  /// shared by all decoders.
  nets::ModalBatch<T> generate(const Tensor<T>& x, double omega_signal, double omega_noise, Rng& rng,
                               bool sample_latent = false) {
    if (!trained_) throw StateError("generator has not been trained");
    if (!all_finite()) throw StateError("generator parameters are not finite");
    const auto post = encode(x);
    Tensor<T> z = post.mu;
    if (sample_latent) {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += post.sigma[i] * static_cast<T>(rng.normal());
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
      z[i] = static_cast<T>(omega_signal) * z[i] + static_cast<T>(omega_noise) * static_cast<T>(rng.normal());
    }
    last_latent_ = z;
    return decode(z);
  }

  /// Latent fed to the decoders by the most recent generate() call.
  const Tensor<T>& last_latent() const { return last_latent_; }

  Checkpoint to_checkpoint(const std::string& module, const nlohmann::json& config) {
    Checkpoint ck;
    ck.module = module;
    ck.config = config;
    ck.extra["arch"] = arch_.to_json();
    ck.extra["base"] = {{"kind", to_string(base_.kind)}, {"shape", base_.shape}};
    ck.extra["outputs"] = nlohmann::json::array();
    for (const auto& m : outputs_) ck.extra["outputs"].push_back({{"kind", to_string(m.kind)}, {"shape", m.shape}});
    ck.extra["trained"] = trained_;
    ck.extra["history"] = history_;
    for (auto& p : parameters()) ck.params.push_back({p.name, p.param->value.template cast<float>()});
    return ck;
  }

  static EncoderDecoders from_checkpoint(const Checkpoint& ck) {
    auto modality = [](const nlohmann::json& j) {
      return Modality{modality_from_string(j.at("kind").get<std::string>()), j.at("shape").get<Shape>()};
    };
    std::vector<Modality> outputs;
    for (const auto& m : ck.extra.at("outputs")) outputs.push_back(modality(m));
    Rng rng(0);
    EncoderDecoders g(modality(ck.extra.at("base")), outputs, VaeArch::from_json(ck.extra.at("arch")), rng);
    for (auto& p : g.parameters()) {
      const auto& src = ck.param(p.name);
      if (src.shape() != p.param->value.shape()) {
        throw FormatError("checkpoint parameter " + p.name + " has shape " + shape_string(src.shape()));
      }
      p.param->value = src.template cast<T>();
    }
    g.trained_ = ck.extra.value("trained", false);
    g.history_ = ck.extra.value("history", std::vector<double>{});
    return g;
  }

 private:
  Modality base_;
  std::vector<Modality> outputs_;
  VaeArch arch_;
  Encoder<T> encoder_;
  std::map<ModalityKind, Decoder<T>> decoders_;
  bool trained_ = false;
  std::vector<double> history_;
  Tensor<T> last_latent_;
};

/// Encoder and decoder over the same modality.
template <typename T>
class GeneratorModel : public EncoderDecoders<T> {
 public:
  GeneratorModel() = default;
  GeneratorModel(const Modality& modality, const VaeArch& arch, Rng& rng)
      : EncoderDecoders<T>(modality, {modality}, arch, rng) {}
  explicit GeneratorModel(EncoderDecoders<T> core) : EncoderDecoders<T>(std::move(core)) {
    if (this->outputs().size() != 1 || this->outputs()[0] != this->base()) {
      throw FormatError("checkpoint does not hold a single-modal generator");
    }
  }

  const Modality& modality() const { return this->base(); }
};

/// One encoder over the base modality and one decoder per modality (at least two).
template <typename T>
class CrossModalGenerator : public EncoderDecoders<T> {
 public:
  CrossModalGenerator() = default;
  CrossModalGenerator(const Modality& base, const std::vector<Modality>& modalities, const VaeArch& arch, Rng& rng)
      : EncoderDecoders<T>(base, modalities, arch, rng) {
    check();
  }
  explicit CrossModalGenerator(EncoderDecoders<T> core) : EncoderDecoders<T>(std::move(core)) { check(); }

 private:
  void check() const {
    if (this->outputs().size() < 2) throw ArgumentError("cross-modal generator needs at least two modalities");
    bool has_base = false;
    for (const auto& m : this->outputs()) has_base = has_base || m == this->base();
    if (!has_base) throw ArgumentError("cross-modal generator must decode its base modality");
  }
};

namespace detail {

/// Mini-batch training shared by every generator flavour. `data` holds
/// samples carrying the base and decoded modalities.
template <typename T>
std::vector<double> train_generator(EncoderDecoders<T>& gen, const std::vector<const Sample*>& data,
                                    const TrainConfig& cfg, Rng& rng) {
  if (data.empty()) throw ArgumentError("generator training needs at least one sample");
  std::vector<Modality> needed = gen.outputs();
  bool has_base = false;
  for (const auto& m : needed) has_base = has_base || m.kind == gen.base().kind;
  if (!has_base) needed.push_back(gen.base());

  auto opt = nn::make_optimizer<T>(cfg.optimizer, gen.parameters(), cfg.learning_rate);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs_vae; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<const Sample*> picked;
      for (std::size_t i = start; i < end; ++i) picked.push_back(data[order[i]]);
      const auto batch = nets::make_batch<T>(std::span<const Sample* const>(picked), needed);
      total += gen.train_step(batch.inputs, cfg.lambda_kl, rng, *opt) * static_cast<double>(end - start);
    }
    const double mean = total / static_cast<double>(data.size());
    if (!std::isfinite(mean) || !gen.all_finite()) {
      throw TrainingError("generator training diverged at epoch " + std::to_string(epoch + 1));
    }
    history.push_back(mean);
  }
  gen.history().insert(gen.history().end(), history.begin(), history.end());
  gen.mark_trained();
  return history;
}

inline Sample wrap_tensor(const Modality& m, const Tensor<float>& t, std::size_t index) {
  if (t.shape() != m.shape) {
    throw ArgumentError("training tensor " + std::to_string(index) + " has shape " + shape_string(t.shape()) +
                        ", expected " + shape_string(m.shape));
  }
  Sample s;
  s.sample_id = "s" + std::to_string(index);
  s.tensors.emplace(m.kind, t);
  return s;
}

}  // namespace detail

/// Trains a single-modal generator on tensors of its modality shape and
/// returns the per-epoch mean objective.
template <typename T>
std::vector<double> train_single_modal(GeneratorModel<T>& model, const std::vector<Tensor<float>>& data,
                                       const TrainConfig& cfg, Rng& rng) {
  std::vector<Sample> wrapped;
  wrapped.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) wrapped.push_back(detail::wrap_tensor(model.modality(), data[i], i));
  std::vector<const Sample*> ptrs;
  for (const auto& s : wrapped) ptrs.push_back(&s);
  return detail::train_generator<T>(model, ptrs, cfg, rng);
}

template <typename T>
std::vector<double> train_single_modal(GeneratorModel<T>& model, const std::vector<const Sample*>& data,
                                       const TrainConfig& cfg, Rng& rng) {
  return detail::train_generator<T>(model, data, cfg, rng);
}

/// The encoder sees only the base modality; each decoder learns its own
/// modality from the shared latent.
template <typename T>
std::vector<double> train_cross_modal(CrossModalGenerator<T>& gen, const std::vector<const Sample*>& data,
                                      const TrainConfig& cfg, Rng& rng) {
  return detail::train_generator<T>(gen, data, cfg, rng);
}

/// Reshapes one sample tensor to a batch of one in (1, C, H, W) layout.
template <typename T>
Tensor<T> as_batch(const Modality& m, const Tensor<float>& x) {
  if (x.shape() != m.shape) {
    throw ArgumentError("input of shape " + shape_string(x.shape()) + " does not match modality " +
                        std::string(to_string(m.kind)) + " " + shape_string(m.shape));
  }
  Shape s{1};
  const Shape chw = m.chw();
  s.insert(s.end(), chw.begin(), chw.end());
  return x.template cast<T>().reshaped(s);
}

/// Virtual sample for one real input: decoder(omega1 * mu(x) + omega2 * eta).
template <typename T>
Tensor<float> generate_single(GeneratorModel<T>& model, const Tensor<float>& x_real, double omega1, double omega2,
                              Rng& rng, bool sample_latent = false) {
  const auto out = model.generate(as_batch<T>(model.modality(), x_real), omega1, omega2, rng, sample_latent);
  return out.begin()->second.template cast<float>().reshaped(model.modality().shape);
}

/// All modalities decoded from one shared latent of the base input.
template <typename T>
TensorMap generate_cross(CrossModalGenerator<T>& gen, const Tensor<float>& x_base, double omega1, double omega2,
                         Rng& rng, bool sample_latent = false) {
  const auto out = gen.generate(as_batch<T>(gen.base(), x_base), omega1, omega2, rng, sample_latent);
  TensorMap result;
  for (const auto& m : gen.outputs()) result.emplace(m.kind, out.at(m.kind).template cast<float>().reshaped(m.shape));
  return result;
}

/// Independent single-modal generators, one per modality.
template <typename T>
class MultiModalGenerator {
 public:
  MultiModalGenerator() = default;
  MultiModalGenerator(const std::vector<Modality>& modalities, const VaeArch& arch, Rng& rng) {
    if (modalities.empty()) throw ArgumentError("multi-modal generator needs at least one modality");
    for (const auto& m : modalities) models_.emplace_back(m, arch, rng);
  }

  std::vector<GeneratorModel<T>>& models() { return models_; }

  GeneratorModel<T>& model(ModalityKind kind) {
    for (auto& m : models_) {
      if (m.modality().kind == kind) return m;
    }
    throw ArgumentError("no generator for " + std::string(to_string(kind)));
  }

 private:
  std::vector<GeneratorModel<T>> models_;
};

/// Each modality's generator trains on its own stream split from `rng`.
template <typename T>
std::vector<std::vector<double>> train_multi_modal(MultiModalGenerator<T>& gen,
                                                   const std::vector<const Sample*>& data, const TrainConfig& cfg,
                                                   Rng& rng) {
  std::vector<std::vector<double>> out;
  for (auto& model : gen.models()) {
    Rng stream(rng());
    out.push_back(detail::train_generator<T>(model, data, cfg, stream));
  }
  return out;
}

/// Each modality is generated from its own latent with independent noise.
template <typename T>
TensorMap generate_multi(MultiModalGenerator<T>& gen, const Sample& real, double omega1, double omega2, Rng& rng,
                         bool sample_latent = false) {
  TensorMap out;
  for (auto& model : gen.models()) {
    const auto& m = model.modality();
    out.emplace(m.kind, generate_single(model, real.tensor(m.kind), omega1, omega2, rng, sample_latent));
  }
  return out;
}

}  // namespace dgsense::vae

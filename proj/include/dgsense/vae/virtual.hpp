#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "dgsense/core/checkpoint.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/vae/generator.hpp"

namespace dgsense::vae {

/// Whichever generator flavour a run uses, behind one interface.
/// Single-modality data always uses the single-modal generator.
class VirtualGenerator {
 public:
  VirtualGenerator() = default;

  VirtualGenerator(const std::vector<Modality>& modalities, const TrainConfig& cfg, Rng& rng) {
    if (modalities.empty()) throw ArgumentError("virtual generator needs at least one modality");
    const VaeArch arch{{16, 32, 32}, static_cast<std::size_t>(cfg.latent_dim)};
    variant_ = modalities.size() == 1 ? "single_modal" : cfg.generator;
    if (variant_ == "single_modal") {
      if (modalities.size() != 1) throw ArgumentError("single_modal generator needs exactly one modality");
      single_.emplace(modalities[0], arch, rng);
    } else if (variant_ == "multi_modal") {
      multi_.emplace(modalities, arch, rng);
    } else if (variant_ == "cross_modal") {
      const auto base_kind = modality_from_string(cfg.base_modality);
      const Modality* base = nullptr;
      for (const auto& m : modalities) {
        if (m.kind == base_kind) base = &m;
      }
      if (!base) throw ArgumentError("base modality " + cfg.base_modality + " is not part of the dataset");
      cross_.emplace(*base, modalities, arch, rng);
    } else {
      throw ArgumentError("unknown generator '" + variant_ + "'");
    }
  }

  const std::string& variant() const { return variant_; }

  std::vector<double> train(const std::vector<const Sample*>& data, const TrainConfig& cfg, Rng& rng) {
    if (single_) return train_single_modal(*single_, data, cfg, rng);
    if (cross_) return train_cross_modal(*cross_, data, cfg, rng);
    if (multi_) {
      const auto per_model = train_multi_modal(*multi_, data, cfg, rng);
      std::vector<double> summed(per_model.front().size(), 0.0);
      for (const auto& h : per_model) {
        for (std::size_t e = 0; e < h.size(); ++e) summed[e] += h[e];
      }
      return summed;
    }
    throw StateError("virtual generator is empty");
  }

  TensorMap generate(const Sample& real, const TrainConfig& cfg, Rng& rng) {
    const bool sample_latent = cfg.generation_latent == "sample";
    if (single_) {
      TensorMap out;
      out.emplace(single_->modality().kind,
                  generate_single(*single_, real.tensor(single_->modality().kind), cfg.omega_signal,
                                  cfg.omega_noise, rng, sample_latent));
      return out;
    }
    if (cross_) {
      return generate_cross(*cross_, real.tensor(cross_->base().kind), cfg.omega_signal, cfg.omega_noise, rng,
                            sample_latent);
    }
    if (multi_) return generate_multi(*multi_, real, cfg.omega_signal, cfg.omega_noise, rng, sample_latent);
    throw StateError("virtual generator is empty");
  }

  Checkpoint to_checkpoint(const nlohmann::json& config) {
    std::vector<EncoderDecoders<float>*> parts = cores();
    Checkpoint ck;
    ck.module = "generator";
    ck.config = config;
    ck.extra["variant"] = variant_;
    ck.extra["parts"] = nlohmann::json::array();
    for (std::size_t i = 0; i < parts.size(); ++i) {
      auto sub = parts[i]->to_checkpoint("generator", config);
      ck.extra["parts"].push_back(sub.extra);
      for (auto& p : sub.params) ck.params.push_back({"part" + std::to_string(i) + "." + p.name, std::move(p.value)});
    }
    return ck;
  }

  static VirtualGenerator from_checkpoint(const Checkpoint& ck) {
    if (ck.module != "generator") throw FormatError("checkpoint holds a '" + ck.module + "', not a generator");
    VirtualGenerator g;
    g.variant_ = ck.extra.at("variant").get<std::string>();
    const auto& parts = ck.extra.at("parts");
    std::vector<EncoderDecoders<float>> cores;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      Checkpoint sub;
      sub.extra = parts[i];
      const std::string prefix = "part" + std::to_string(i) + ".";
      for (const auto& p : ck.params) {
        if (p.name.rfind(prefix, 0) == 0) sub.params.push_back({p.name.substr(prefix.size()), p.value});
      }
      cores.push_back(EncoderDecoders<float>::from_checkpoint(sub));
    }
    if (cores.empty()) throw FormatError("generator checkpoint has no parts");
    if (g.variant_ == "single_modal") {
      g.single_.emplace(std::move(cores.front()));
    } else if (g.variant_ == "cross_modal") {
      g.cross_.emplace(std::move(cores.front()));
    } else if (g.variant_ == "multi_modal") {
      g.multi_.emplace();
      for (auto& c : cores) g.multi_->models().emplace_back(std::move(c));
    } else {
      throw FormatError("unknown generator variant '" + g.variant_ + "'");
    }
    return g;
  }

  bool trained() {
    const auto parts = cores();
    return !parts.empty() && std::all_of(parts.begin(), parts.end(), [](auto* p) { return p->trained(); });
  }

  std::vector<EncoderDecoders<float>*> cores() {
    std::vector<EncoderDecoders<float>*> out;
    if (single_) out.push_back(&*single_);
    if (cross_) out.push_back(&*cross_);
    if (multi_) {
      for (auto& m : multi_->models()) out.push_back(&m);
    }
    return out;
  }

 private:
  std::string variant_;
  std::optional<GeneratorModel<float>> single_;
  std::optional<CrossModalGenerator<float>> cross_;
  std::optional<MultiModalGenerator<float>> multi_;
};

/// round(ratio * n) virtual samples for a domain, cycling through its real
/// samples in order; each copies the label and domain of its source.
inline std::vector<Sample> make_virtual_samples(VirtualGenerator& gen, const DomainDataset& domain, double ratio,
                                                const TrainConfig& cfg, Rng& rng) {
  if (!(ratio >= 0) || !std::isfinite(ratio)) throw ArgumentError("virtual ratio must be finite and >= 0");
  const std::size_t n = domain.size();
  const auto count = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t j = 0; j < count; ++j) {
    const Sample& real = domain.samples[j % n];
    Sample v;
    v.sample_id = real.sample_id + "-v" + std::to_string(j / n);
    v.domain_id = real.domain_id;
    v.label = real.label;
    v.tensors = gen.generate(real, cfg, rng);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace dgsense::vae

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dgsense/core/batch_log.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/rng.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/episodic/trainer.hpp"
#include "dgsense/vae/virtual.hpp"

namespace dgsense::episodic {

enum class Variant { dgsense, no_dg, no_virtual, multi_modal_gen, cross_modal_gen };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::dgsense: return "dgsense";
    case Variant::no_dg: return "no_dg";
    case Variant::no_virtual: return "no_virtual";
    case Variant::multi_modal_gen: return "multi_modal_gen";
    case Variant::cross_modal_gen: return "cross_modal_gen";
  }
  return "unknown";
}

inline Variant variant_from_string(const std::string& s) {
  for (auto v : {Variant::dgsense, Variant::no_dg, Variant::no_virtual, Variant::multi_modal_gen,
                 Variant::cross_modal_gen}) {
    if (to_string(v) == s) return v;
  }
  throw ArgumentError("unknown variant '" + s + "'");
}

/// Settings a variant overrides on top of the base configuration.
struct VariantPlan {
  bool episodic = true;
  bool use_virtual = true;
  TrainConfig cfg;
};

inline VariantPlan plan_for(Variant v, const TrainConfig& base) {
  VariantPlan p{true, true, base};
  switch (v) {
    case Variant::dgsense: break;
    case Variant::no_dg:
      p.episodic = false;
      p.use_virtual = false;
      break;
    case Variant::no_virtual: p.use_virtual = false; break;
    case Variant::multi_modal_gen: p.cfg.generator = "multi_modal"; break;
    case Variant::cross_modal_gen: p.cfg.generator = "cross_modal"; break;
  }
  if (p.cfg.virtual_ratio == 0.0) p.use_virtual = false;
  return p;
}

inline nets::NetworkSpec network_spec(const SourceSet& set, const TrainConfig& cfg) {
  nets::NetworkSpec spec;
  spec.modalities = set.modalities;
  spec.preset = cfg.preset;
  spec.feature_dim = static_cast<std::size_t>(cfg.feature_dim);
  spec.num_classes = set.num_classes();
  spec.alpha = cfg.alpha;
  return spec;
}

struct TrainedModel {
  Net main;
  std::optional<EpisodicState> state;
  std::optional<vae::VirtualGenerator> generator;
  std::vector<double> generator_history;
  History history;
  std::size_t num_virtual = 0;
};

/// Full training on source domains: optional generator and virtual data,
/// then either episodic training (domain networks, then the main network)
/// or pooled training. Every stage draws from its own named stream, so
/// disabling one stage leaves the others' randomness untouched.
inline TrainedModel train_pipeline(const SourceSet& sources, Variant variant, const TrainConfig& base_cfg,
                                   BatchLog* log = nullptr) {
  base_cfg.validate();
  sources.validate();
  const VariantPlan plan = plan_for(variant, base_cfg);
  const TrainConfig& cfg = plan.cfg;
  const auto spec = network_spec(sources, cfg);

  std::vector<DomainDataset> augmented = sources.domains;
  TrainedModel out;
  if (plan.use_virtual) {
    Rng init = seeded_rng(cfg.seed, "init/generator");
    vae::VirtualGenerator gen(sources.modalities, cfg, init);
    std::vector<const Sample*> real;
    for (const auto& d : sources.domains) {
      for (const auto& s : d.samples) real.push_back(&s);
    }
    if (log) log->record("generator", real);
    Rng train_rng = seeded_rng(cfg.seed, "vae");
    out.generator_history = gen.train(real, cfg, train_rng);
    for (std::size_t i = 0; i < augmented.size(); ++i) {
      Rng gen_rng = seeded_rng(cfg.seed, "virtual/" + sources.domains[i].domain_id);
      auto virt = vae::make_virtual_samples(gen, sources.domains[i], cfg.virtual_ratio, cfg, gen_rng);
      out.num_virtual += virt.size();
      for (auto& v : virt) augmented[i].samples.push_back(std::move(v));
    }
    out.generator = std::move(gen);
  }

  Rng main_init = seeded_rng(cfg.seed, "init/main");
  if (!plan.episodic) {
    out.main = Net(spec, main_init);
    Rng rng = seeded_rng(cfg.seed, "main");
    out.history.epochs = train_pooled(out.main, augmented, cfg, rng, log);
    return out;
  }

  EpisodicState state{Net(spec, main_init), {}, {}, {}};
  for (std::size_t i = 0; i < augmented.size(); ++i) {
    const auto& id = sources.domains[i].domain_id;
    Rng init = seeded_rng(cfg.seed, "init/domain/" + id);
    state.domains.push_back({id, Net(spec, init)});
    DomainDataset train_set = cfg.virtual_in_domain_nets ? augmented[i] : sources.domains[i];
    Rng rng = seeded_rng(cfg.seed, "domain/" + id);
    auto records = train_domain_network(state.domains.back(), train_set, cfg, rng, log);
    state.history.epochs.insert(state.history.epochs.end(), records.begin(), records.end());
  }
  freeze_domains(state);
  Rng rng = seeded_rng(cfg.seed, "main");
  train_main(state, augmented, cfg, rng, log);
  out.main = state.main;
  out.history = state.history;
  out.state = std::move(state);
  return out;
}

}  // namespace dgsense::episodic

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/batch_log.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/dataset_io.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/episodic/pipeline.hpp"
#include "dgsense/eval/metrics.hpp"
#include "dgsense/eval/parallel.hpp"

namespace dgsense::eval {

using episodic::Variant;

struct ExperimentSpec {
  std::string dataset;
  SplitSpec split;
  TrainConfig config;
  Variant variant = Variant::dgsense;
  std::vector<std::uint64_t> seeds{7};
  /// Positive class for binary precision/recall; macro averaging otherwise.
  std::optional<int> positive_class;

  void validate() const {
    if (seeds.empty()) throw ArgumentError("an experiment needs at least one seed");
    config.validate();
  }
};

inline std::string to_string(SplitMode m) {
  return m == SplitMode::leave_one_domain_out ? "leave_one_domain_out" : "k_fold_in_domain";
}

inline nlohmann::json to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["dataset"] = s.dataset;
  j["split"] = {{"mode", to_string(s.split.mode)}, {"target_domains", s.split.target_domains}, {"k", s.split.k}};
  j["config"] = to_json(s.config);
  j["variant"] = episodic::to_string(s.variant);
  j["seeds"] = s.seeds;
  j["positive_class"] = s.positive_class ? nlohmann::json(*s.positive_class) : nlohmann::json(nullptr);
  return j;
}

/// Outcome of training once and testing on one held-out set.
struct FoldReport {
  std::string target;  // held-out domain, or "fold<k>"
  std::uint64_t seed = 0;
  Metrics metrics;
  std::map<std::string, Metrics> per_domain;
  std::size_t train_samples = 0;
  std::size_t virtual_samples = 0;
  std::size_t test_samples = 0;
  /// Held-out sample digests found in any training batch.
  std::size_t leaked_samples = 0;
  double runtime_s = 0;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<FoldReport> folds;
  Metrics aggregate;
  double runtime_s = 0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Trains on `train`, evaluates on `test`, and audits the batch log.
inline FoldReport run_fold(const SourceSet& train, const std::vector<const Sample*>& test, const ExperimentSpec& spec,
                           std::uint64_t seed, const std::string& target, std::size_t num_classes) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg = spec.config;
  cfg.seed = seed;
  BatchLog log;
  auto model = episodic::train_pipeline(train, spec.variant, cfg, &log);

  FoldReport r;
  r.target = target;
  r.seed = seed;
  r.train_samples = train.total_samples();
  r.virtual_samples = model.num_virtual;
  r.test_samples = test.size();
  const auto pred = episodic::predict_samples(model.main, test);
  std::vector<int> truth;
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> by_domain;
  std::set<std::string> held_out;
  for (std::size_t i = 0; i < test.size(); ++i) {
    truth.push_back(test[i]->label);
    by_domain[test[i]->domain_id].first.push_back(test[i]->label);
    by_domain[test[i]->domain_id].second.push_back(pred[i]);
    held_out.insert(sample_digest(*test[i]));
  }
  r.metrics = compute_metrics(truth, pred, spec.positive_class, num_classes);
  for (const auto& [id, tp] : by_domain) {
    r.per_domain[id] = compute_metrics(tp.first, tp.second, spec.positive_class, num_classes);
  }
  r.leaked_samples = log.count_present(held_out);
  r.runtime_s = seconds_since(t0);
  return r;
}

/// Mean of per-fold scores; the confusion matrix is the sum over folds.
inline Metrics mean_metrics(const std::vector<FoldReport>& folds) {
  Metrics m;
  std::vector<std::vector<std::size_t>> confusion;
  for (const auto& f : folds) {
    m.accuracy += f.metrics.accuracy;
    m.precision += f.metrics.precision;
    m.recall += f.metrics.recall;
    m.precision_undefined = m.precision_undefined || f.metrics.precision_undefined;
    m.recall_undefined = m.recall_undefined || f.metrics.recall_undefined;
    m.averaging = f.metrics.averaging;
    m.positive_class = f.metrics.positive_class;
    confusion = add_confusion(confusion, f.metrics.confusion);
  }
  const auto n = static_cast<double>(folds.size());
  m.accuracy /= n;
  m.precision /= n;
  m.recall /= n;
  m.confusion = std::move(confusion);
  return m;
}

}  // namespace detail

/// Source set without the listed domains.
inline SourceSet without_domains(const SourceSet& set, const std::vector<std::string>& excluded) {
  SourceSet out{{}, set.label_names, set.modalities};
  for (const auto& d : set.domains) {
    if (std::find(excluded.begin(), excluded.end(), d.domain_id) == excluded.end()) out.domains.push_back(d);
  }
  return out;
}

/// Targets for leave-one-domain-out: the listed ones, or every domain.
inline std::vector<std::string> lodo_targets(const SourceSet& set, const SplitSpec& split) {
  if (set.num_domains() < 2) throw ArgumentError("leave-one-domain-out needs at least two domains");
  std::vector<std::string> targets = split.target_domains;
  if (targets.empty()) {
    for (const auto& d : set.domains) targets.push_back(d.domain_id);
  }
  for (const auto& t : targets) {
    if (!set.has_domain(t)) throw ArgumentError("unknown target domain '" + t + "'");
  }
  return targets;
}

/// One training run per (target, seed): fit on all other domains, test on
/// the target. `prepare` may reshape the source set of each fold (used by
/// ablations). The aggregate is the mean over folds.
inline ExperimentReport leave_one_domain_out(
    const SourceSet& set, const ExperimentSpec& spec,
    const std::function<SourceSet(const SourceSet&, const std::string&, std::uint64_t)>& prepare = {}) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const auto targets = lodo_targets(set, spec.split);
  std::vector<std::pair<std::string, std::uint64_t>> jobs;
  for (const auto& t : targets) {
    for (auto s : spec.seeds) jobs.emplace_back(t, s);
  }
  ExperimentReport report;
  report.spec = spec;
  report.folds.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& [target, seed] = jobs[i];
    SourceSet train = without_domains(set, {target});
    if (prepare) train = prepare(train, target, seed);
    std::vector<const Sample*> test;
    for (const auto& s : set.domain(target).samples) test.push_back(&s);
    report.folds[i] = detail::run_fold(train, test, spec, seed, target, set.num_classes());
  });
  report.aggregate = detail::mean_metrics(report.folds);
  report.runtime_s = detail::seconds_since(t0);
  return report;
}

/// Fold index of every sample (in the given order) for a stratified k-way
/// split: within each label, a seeded shuffle is dealt round-robin.
inline std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t k, Rng& rng) {
  if (k < 2) throw ArgumentError("k-fold needs k >= 2");
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t offset = 0;
  for (auto& [label, idx] : by_label) {
    if (idx.size() < k) {
      throw ArgumentError("label " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                          " samples, fewer than k = " + std::to_string(k));
    }
    rng.shuffle(std::span<std::size_t>(idx));
    // Rotating the starting fold per label keeps fold sizes within one.
    for (std::size_t j = 0; j < idx.size(); ++j) fold[idx[j]] = (offset + j) % k;
    offset = (offset + idx.size()) % k;
  }
  return fold;
}

/// Stratified k-fold over all samples of all domains. Each training split
/// keeps its samples' domain structure. The aggregate is computed from the
/// pooled confusion matrix, which equals the sample-weighted fold mean.
inline ExperimentReport k_fold_in_domain(const SourceSet& set, std::size_t k, const ExperimentSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<const Sample*> all;
  std::vector<int> labels;
  for (const auto& d : set.domains) {
    for (const auto& s : d.samples) {
      all.push_back(&s);
      labels.push_back(s.label);
    }
  }
  std::vector<std::pair<std::size_t, std::uint64_t>> jobs;
  for (auto seed : spec.seeds) {
    for (std::size_t f = 0; f < k; ++f) jobs.emplace_back(f, seed);
  }
  std::map<std::uint64_t, std::vector<std::size_t>> assignment;
  for (auto seed : spec.seeds) {
    Rng rng = seeded_rng(seed, "kfold");
    assignment[seed] = stratified_folds(labels, k, rng);
  }
  ExperimentReport report;
  report.spec = spec;
  report.folds.resize(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t i) {
    const auto& [fold, seed] = jobs[i];
    const auto& assign = assignment.at(seed);
    SourceSet train{{}, set.label_names, set.modalities};
    std::vector<const Sample*> test;
    std::size_t idx = 0;
    for (const auto& d : set.domains) {
      DomainDataset part{d.domain_id, {}};
      for (const auto& s : d.samples) {
        if (assign[idx++] == fold) {
          test.push_back(&s);
        } else {
          part.samples.push_back(s);
        }
      }
      if (!part.samples.empty()) train.domains.push_back(std::move(part));
    }
    report.folds[i] = detail::run_fold(train, test, spec, seed, "fold" + std::to_string(fold), set.num_classes());
  });
  std::vector<std::vector<std::size_t>> pooled;
  for (const auto& f : report.folds) pooled = add_confusion(pooled, f.metrics.confusion);
  report.aggregate = metrics_from_confusion(pooled, spec.positive_class);
  report.runtime_s = detail::seconds_since(t0);
  return report;
}

inline ExperimentReport run_experiment(const SourceSet& set, const ExperimentSpec& spec) {
  if (spec.split.mode == SplitMode::k_fold_in_domain) return k_fold_in_domain(set, spec.split.k, spec);
  return leave_one_domain_out(set, spec);
}

enum class Sweep { num_domains, num_real, num_virtual, generator_variant };

inline std::string to_string(Sweep s) {
  switch (s) {
    case Sweep::num_domains: return "num_domains";
    case Sweep::num_real: return "num_real";
    case Sweep::num_virtual: return "num_virtual";
    case Sweep::generator_variant: return "generator_variant";
  }
  return "unknown";
}

inline Sweep sweep_from_string(const std::string& s) {
  for (auto v : {Sweep::num_domains, Sweep::num_real, Sweep::num_virtual, Sweep::generator_variant}) {
    if (to_string(v) == s) return v;
  }
  throw ArgumentError("unknown sweep '" + s + "'");
}

struct AblationRow {
  std::string value;
  double mean_accuracy = 0;
  /// Mean over targets, one entry per seed.
  std::vector<double> seed_accuracy;
  double runtime_s = 0;
};

struct AblationTable {
  Sweep sweep = Sweep::num_domains;
  ExperimentSpec spec;
  std::vector<AblationRow> rows;
};

/// First `per_class` samples of every label in every domain.
inline SourceSet keep_per_class(const SourceSet& set, std::size_t per_class) {
  SourceSet out{{}, set.label_names, set.modalities};
  for (const auto& d : set.domains) {
    DomainDataset part{d.domain_id, {}};
    std::map<int, std::size_t> seen;
    for (const auto& s : d.samples) {
      if (seen[s.label]++ < per_class) part.samples.push_back(s);
    }
    out.domains.push_back(std::move(part));
  }
  return out;
}

namespace detail {

inline std::size_t parse_count(const std::string& v) {
  std::size_t used = 0;
  long n = -1;
  try {
    n = std::stol(v, &used);
  } catch (const std::exception&) {
  }
  if (used != v.size() || n < 1) throw ArgumentError("grid value '" + v + "' is not a positive integer");
  return static_cast<std::size_t>(n);
}

inline double parse_ratio(const std::string& v) {
  std::size_t used = 0;
  double r = -1;
  try {
    r = std::stod(v, &used);
  } catch (const std::exception&) {
  }
  if (used != v.size() || !(r >= 0) || !std::isfinite(r)) {
    throw ArgumentError("grid value '" + v + "' is not a finite ratio >= 0");
  }
  return r;
}

inline std::size_t min_per_class(const SourceSet& set) {
  std::size_t least = std::numeric_limits<std::size_t>::max();
  for (const auto& d : set.domains) {
    std::map<int, std::size_t> counts;
    for (const auto& s : d.samples) counts[s.label] += 1;
    for (std::size_t c = 0; c < set.num_classes(); ++c) least = std::min(least, counts[static_cast<int>(c)]);
  }
  return least;
}

}  // namespace detail

/// Leave-one-domain-out per grid point with fixed seeds. Grid values are
/// source-domain counts (the first k non-target domains are kept), real
/// samples per class, virtual-to-real ratios, or generator names. Every grid
/// value is checked before any training starts.
inline AblationTable run_ablation(const SourceSet& set, Sweep sweep, const std::vector<std::string>& grid,
                                  const ExperimentSpec& spec) {
  spec.validate();
  if (grid.empty()) throw ArgumentError("ablation grid is empty");
  lodo_targets(set, spec.split);
  const std::size_t sources = set.num_domains() - 1;
  const std::size_t per_class = detail::min_per_class(set);
  for (const auto& v : grid) {
    switch (sweep) {
      case Sweep::num_domains:
        if (detail::parse_count(v) > sources) {
          throw ArgumentError("num_domains " + v + " exceeds the " + std::to_string(sources) + " source domains");
        }
        break;
      case Sweep::num_real:
        if (detail::parse_count(v) > per_class) {
          throw ArgumentError("num_real " + v + " exceeds the " + std::to_string(per_class) +
                              " samples available per class");
        }
        break;
      case Sweep::num_virtual: detail::parse_ratio(v); break;
      case Sweep::generator_variant:
        if (v != "cross_modal" && v != "multi_modal" && v != "single_modal") {
          throw ArgumentError("unknown generator '" + v + "'");
        }
        break;
    }
  }

  AblationTable table{sweep, spec, {}};
  for (const auto& v : grid) {
    ExperimentSpec point = spec;
    std::function<SourceSet(const SourceSet&, const std::string&, std::uint64_t)> prepare;
    switch (sweep) {
      case Sweep::num_domains: {
        const std::size_t k = detail::parse_count(v);
        prepare = [k](const SourceSet& train, const std::string&, std::uint64_t) {
          SourceSet out{{}, train.label_names, train.modalities};
          out.domains.assign(train.domains.begin(), train.domains.begin() + static_cast<std::ptrdiff_t>(k));
          return out;
        };
        break;
      }
      case Sweep::num_real: {
        const std::size_t n = detail::parse_count(v);
        prepare = [n](const SourceSet& train, const std::string&, std::uint64_t) { return keep_per_class(train, n); };
        break;
      }
      case Sweep::num_virtual: point.config.virtual_ratio = detail::parse_ratio(v); break;
      case Sweep::generator_variant: point.config.generator = v; break;
    }
    const auto report = leave_one_domain_out(set, point, prepare);
    AblationRow row;
    row.value = v;
    row.mean_accuracy = report.aggregate.accuracy;
    for (auto seed : spec.seeds) {
      double sum = 0;
      std::size_t count = 0;
      for (const auto& f : report.folds) {
        if (f.seed == seed) {
          sum += f.metrics.accuracy;
          ++count;
        }
      }
      row.seed_accuracy.push_back(sum / static_cast<double>(count));
    }
    row.runtime_s = report.runtime_s;
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct VirtualQuality {
  double acc_real_to_virtual = 0;
  double acc_virtual_to_real = 0;
};

/// Two-way check that virtual data follows the real distribution: one
/// classifier is trained on the real samples and tested on their virtual
/// counterparts (one per real sample), and another the other way round.
inline VirtualQuality quality_check_virtual(vae::VirtualGenerator& gen, const SourceSet& real, const TrainConfig& cfg) {
  if (!gen.trained()) throw StateError("quality check needs a trained generator");
  cfg.validate();
  real.validate();
  std::vector<DomainDataset> virt;
  for (const auto& d : real.domains) {
    Rng rng = seeded_rng(cfg.seed, "quality/virtual/" + d.domain_id);
    virt.push_back({d.domain_id, vae::make_virtual_samples(gen, d, 1.0, cfg, rng)});
  }
  const auto spec = episodic::network_spec(real, cfg);
  auto fit_and_score = [&](const std::vector<DomainDataset>& train, const std::vector<DomainDataset>& test,
                           const std::string& tag) {
    Rng init = seeded_rng(cfg.seed, "quality/init/" + tag);
    episodic::Net net(spec, init);
    Rng rng = seeded_rng(cfg.seed, "quality/" + tag);
    episodic::train_pooled(net, train, cfg, rng, nullptr);
    std::vector<const Sample*> samples;
    std::vector<int> truth;
    for (const auto& d : test) {
      for (const auto& s : d.samples) {
        samples.push_back(&s);
        truth.push_back(s.label);
      }
    }
    return compute_metrics(truth, episodic::predict_samples(net, samples), std::nullopt, real.num_classes()).accuracy;
  };
  return {fit_and_score(real.domains, virt, "real"), fit_and_score(virt, real.domains, "virtual")};
}

}  // namespace dgsense::eval

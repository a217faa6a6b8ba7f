#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/batch_log.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/types.hpp"
#include "dgsense/nets/network.hpp"
#include "dgsense/nn/loss.hpp"
#include "dgsense/nn/optim.hpp"

namespace dgsense::episodic {

using Net = nets::Network<float>;

struct DomainNetwork {
  std::string domain_id;
  Net net;
};

/// Mean loss and accuracy of one training epoch.
struct EpochRecord {
  std::string stage;
  int epoch = 0;
  double loss = 0;
  double accuracy = 0;
};

/// Batch-mean losses of one main-network update.
struct StepRecord {
  int epoch = 0;
  std::string domain;
  double loss1 = 0, loss2 = 0, loss3 = 0, total = 0;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::vector<StepRecord> steps;
};

struct EpisodicState {
  Net main;
  std::vector<DomainNetwork> domains;
  /// Parameter digests taken when the domain networks were frozen.
  std::vector<std::string> frozen_hashes;
  History history;

  DomainNetwork& domain(const std::string& id) {
    for (auto& d : domains) {
      if (d.domain_id == id) return d;
    }
    throw ArgumentError("no domain network for '" + id + "'");
  }
};

namespace detail {

inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return out;
}

inline std::vector<const Sample*> pick(const std::vector<const Sample*>& data, const std::vector<std::size_t>& idx) {
  std::vector<const Sample*> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

inline void check_finite(double loss, Net& net, const std::string& stage, int epoch) {
  if (!std::isfinite(loss) || !net.all_finite()) {
    throw TrainingError(stage + " training diverged (non-finite loss) at epoch " + std::to_string(epoch));
  }
}

inline std::size_t count_correct(const Tensor<float>& logits, std::span<const int> labels) {
  const std::size_t K = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < labels.size(); ++b) {
    correct += nn::argmax<float>(std::span<const float>(logits.data() + b * K, K)) == labels[b];
  }
  return correct;
}

/// Plain cross-entropy training of one network on a list of samples.
inline std::vector<EpochRecord> train_classifier(Net& net, const std::vector<const Sample*>& data, int epochs,
                                                 const TrainConfig& cfg, Rng& rng, const std::string& stage,
                                                 BatchLog* log) {
  if (data.empty()) throw ArgumentError(stage + ": no training samples");
  auto opt = nn::make_optimizer<float>(cfg.optimizer, net.parameters(), cfg.learning_rate);
  const auto& modalities = net.spec().modalities;
  std::vector<EpochRecord> records;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    double total = 0;
    std::size_t correct = 0;
    for (const auto& idx : make_batches(data.size(), static_cast<std::size_t>(cfg.batch_size), rng)) {
      const auto samples = pick(data, idx);
      if (log) log->record(stage, samples);
      const auto batch = nets::make_batch<float>(std::span<const Sample* const>(samples), modalities);
      opt->zero_grad();
      const auto logits = net.logits(batch.inputs);
      const auto loss = nn::softmax_cross_entropy<float>(logits, batch.labels);
      net.extractor().backward(net.classifier().backward(loss.grad));
      opt->step();
      total += static_cast<double>(loss.mean) * static_cast<double>(idx.size());
      correct += count_correct(logits, batch.labels);
    }
    const double mean = total / static_cast<double>(data.size());
    check_finite(mean, net, stage, epoch);
    records.push_back({stage, epoch, mean, static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  return records;
}

}  // namespace detail

/// Trains a domain network on its own domain (real plus any virtual samples).
inline std::vector<EpochRecord> train_domain_network(DomainNetwork& dn, const DomainDataset& data,
                                                     const TrainConfig& cfg, Rng& rng, BatchLog* log = nullptr) {
  if (data.domain_id != dn.domain_id) {
    throw ArgumentError("domain network '" + dn.domain_id + "' cannot train on domain '" + data.domain_id + "'");
  }
  std::vector<const Sample*> ptrs;
  for (const auto& s : data.samples) ptrs.push_back(&s);
  dn.net.set_frozen(false);
  return detail::train_classifier(dn.net, ptrs, cfg.epochs_domain, cfg, rng, "domain/" + dn.domain_id, log);
}

/// Source-only training of a single network on all domains pooled
/// (the baseline without episodic training).
inline std::vector<EpochRecord> train_pooled(Net& net, const std::vector<DomainDataset>& domains,
                                             const TrainConfig& cfg, Rng& rng, BatchLog* log = nullptr) {
  std::vector<const Sample*> ptrs;
  for (const auto& d : domains) {
    for (const auto& s : d.samples) ptrs.push_back(&s);
  }
  return detail::train_classifier(net, ptrs, cfg.epochs_main, cfg, rng, "main", log);
}

/// Per-sample values of the three episodic losses on one batch.
struct EpisodicLosses {
  std::vector<double> loss1, loss2, loss3;
};

/// loss1 = CE(main classifier(main extractor x)), loss2 = CE(domain classifier(main extractor x)),
/// loss3 = CE(main classifier(domain extractor x)). With `backprop`, the
/// gradient of mean(loss1 + theta1 loss2 + theta2 loss3) is accumulated into
/// the main network only; the domain network must be frozen.
inline EpisodicLosses episodic_losses(Net& main, DomainNetwork& dn, const nets::LabeledBatch<float>& batch,
                                      const std::vector<std::string>& batch_domains, double theta1 = 1.0,
                                      double theta2 = 1.0, bool backprop = false) {
  for (const auto& d : batch_domains) {
    if (d != dn.domain_id) {
      throw ArgumentError("batch sample from domain '" + d + "' paired with domain network '" + dn.domain_id + "'");
    }
  }
  if (backprop && !dn.net.parameters().empty()) dn.net.set_frozen(true);
  EpisodicLosses out;
  auto to_double = [](const std::vector<float>& v) { return std::vector<double>(v.begin(), v.end()); };

  const Tensor<float> f = main.features(batch.inputs);
  const auto l1 = nn::softmax_cross_entropy<float>(main.classify(f), batch.labels);
  Tensor<float> df;
  if (backprop) df = main.classifier().backward(l1.grad);

  const auto l2 = nn::softmax_cross_entropy<float>(dn.net.classify(f), batch.labels, static_cast<float>(theta1));
  if (backprop) {
    if (theta1 != 0.0) {
      const Tensor<float> df2 = dn.net.classifier().backward(l2.grad);
      for (std::size_t i = 0; i < df.size(); ++i) df[i] += df2[i];
    }
    main.extractor().backward(df);
  }

  const Tensor<float> g = dn.net.features(batch.inputs);
  const auto l3 = nn::softmax_cross_entropy<float>(main.classify(g), batch.labels, static_cast<float>(theta2));
  if (backprop && theta2 != 0.0) main.classifier().backward(l3.grad);

  out.loss1 = to_double(l1.per_sample);
  out.loss2 = to_double(l2.per_sample);
  out.loss3 = to_double(l3.per_sample);
  return out;
}

/// (1/N) sum_i (1/n_i) sum_j (loss1 + theta1 loss2 + theta2 loss3), with
/// table[i][j] holding the three losses of sample j of domain i.
inline double main_loss(const std::vector<std::vector<std::array<double, 3>>>& table, double theta1,
                        double theta2) {
  if (table.empty()) throw ArgumentError("main loss needs at least one domain");
  double total = 0;
  for (const auto& domain : table) {
    if (domain.empty()) throw ArgumentError("main loss: a domain has no samples");
    double acc = 0;
    for (const auto& l : domain) acc += l[0] + theta1 * l[1] + theta2 * l[2];
    total += acc / static_cast<double>(domain.size());
  }
  return total / static_cast<double>(table.size());
}

/// Freezes every domain network and records its parameter digest.
inline void freeze_domains(EpisodicState& state) {
  state.frozen_hashes.clear();
  for (auto& d : state.domains) {
    d.net.set_frozen(true);
    state.frozen_hashes.push_back(d.net.digest());
  }
}

inline void verify_frozen(EpisodicState& state) {
  if (state.frozen_hashes.size() != state.domains.size()) {
    throw InvariantViolation("domain networks were not frozen before main training");
  }
  for (std::size_t i = 0; i < state.domains.size(); ++i) {
    if (state.domains[i].net.digest() != state.frozen_hashes[i]) {
      throw InvariantViolation("parameters of domain network '" + state.domains[i].domain_id +
                               "' changed during main training");
    }
  }
}

/// Episodic training of the main network against the frozen domain networks.
/// Domains take turns one mini-batch at a time; each update follows the
/// batch mean of loss1 + theta1 loss2 + theta2 loss3.
inline void train_main(EpisodicState& state, const std::vector<DomainDataset>& domains, const TrainConfig& cfg,
                       Rng& rng, BatchLog* log = nullptr) {
  if (domains.empty()) throw ArgumentError("main training needs at least one source domain");
  if (state.frozen_hashes.empty()) freeze_domains(state);
  verify_frozen(state);
  std::vector<std::vector<const Sample*>> data(domains.size());
  std::vector<DomainNetwork*> nets;
  for (std::size_t i = 0; i < domains.size(); ++i) {
    for (const auto& s : domains[i].samples) data[i].push_back(&s);
    if (data[i].empty()) throw ArgumentError("domain '" + domains[i].domain_id + "' has no samples");
    nets.push_back(&state.domain(domains[i].domain_id));
  }
  auto opt = nn::make_optimizer<float>(cfg.optimizer, state.main.parameters(), cfg.learning_rate);
  const auto& modalities = state.main.spec().modalities;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs_main; ++epoch) {
    std::vector<std::vector<std::vector<std::size_t>>> batches;
    for (const auto& d : data) batches.push_back(detail::make_batches(d.size(), bs, rng));
    std::vector<std::size_t> order(domains.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.domain_order == "shuffled") rng.shuffle(std::span<std::size_t>(order));

    std::vector<std::vector<std::array<double, 3>>> table(domains.size());
    std::size_t max_batches = 0;
    for (const auto& b : batches) max_batches = std::max(max_batches, b.size());
    for (std::size_t k = 0; k < max_batches; ++k) {
      for (std::size_t i : order) {
        if (k >= batches[i].size()) continue;
        const auto samples = detail::pick(data[i], batches[i][k]);
        if (log) log->record("main", samples);
        const auto batch = nets::make_batch<float>(std::span<const Sample* const>(samples), modalities);
        std::vector<std::string> batch_domains;
        for (const auto* s : samples) batch_domains.push_back(s->domain_id);
        opt->zero_grad();
        const auto losses = episodic_losses(state.main, *nets[i], batch, batch_domains, cfg.theta1, cfg.theta2, true);
        opt->step();

        StepRecord step{epoch, domains[i].domain_id, 0, 0, 0, 0};
        for (std::size_t j = 0; j < samples.size(); ++j) {
          table[i].push_back({losses.loss1[j], losses.loss2[j], losses.loss3[j]});
          step.loss1 += losses.loss1[j];
          step.loss2 += losses.loss2[j];
          step.loss3 += losses.loss3[j];
        }
        const double n = static_cast<double>(samples.size());
        step.loss1 /= n;
        step.loss2 /= n;
        step.loss3 /= n;
        step.total = step.loss1 + cfg.theta1 * step.loss2 + cfg.theta2 * step.loss3;
        state.history.steps.push_back(step);
      }
    }
    const double total = main_loss(table, cfg.theta1, cfg.theta2);
    detail::check_finite(total, state.main, "main", epoch);
    verify_frozen(state);
    state.history.epochs.push_back({"main", epoch, total, 0.0});
  }
}

/// Predictions of the main network (lowest class index wins ties).
struct Inference {
  std::vector<int> predictions;
  Tensor<float> logits;
};

inline Inference infer(Net& main, const nets::ModalBatch<float>& inputs) {
  Inference out;
  out.logits = main.logits(inputs);
  const std::size_t K = out.logits.dim(1);
  for (std::size_t b = 0; b < out.logits.dim(0); ++b) {
    out.predictions.push_back(nn::argmax<float>(std::span<const float>(out.logits.data() + b * K, K)));
  }
  return out;
}

/// Batched inference over a sample list.
inline std::vector<int> predict_samples(Net& main, const std::vector<const Sample*>& samples,
                                        std::size_t batch_size = 64) {
  std::vector<int> out;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + batch_size);
    std::vector<const Sample*> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                     samples.begin() + static_cast<std::ptrdiff_t>(end));
    const auto batch = nets::make_batch<float>(std::span<const Sample* const>(chunk), main.spec().modalities);
    const auto r = infer(main, batch.inputs);
    out.insert(out.end(), r.predictions.begin(), r.predictions.end());
  }
  return out;
}

inline nlohmann::json history_json(const History& h) {
  nlohmann::json j;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    j["epochs"].push_back({{"stage", e.stage}, {"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}});
  }
  j["steps"] = nlohmann::json::array();
  for (const auto& s : h.steps) {
    j["steps"].push_back({{"epoch", s.epoch},
                          {"domain", s.domain},
                          {"loss1", s.loss1},
                          {"loss2", s.loss2},
                          {"loss3", s.loss3},
                          {"total", s.total}});
  }
  return j;
}

}  // namespace dgsense::episodic

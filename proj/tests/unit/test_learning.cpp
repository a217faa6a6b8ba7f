#include <gtest/gtest.h>

#include <set>

#include "dgsense/episodic/pipeline.hpp"
#include "dgsense/eval/experiment.hpp"
#include "dgsense/eval/metrics.hpp"
#include "dgsense/synth/benchmark.hpp"
#include "dgsense/synth/datasets.hpp"
#include "dgsense/vae/loss.hpp"
#include "dgsense/vae/virtual.hpp"

using namespace dgsense;

namespace {

const Modality kSeries{ModalityKind::amplitude_series, {3, 32}};
const Modality kSpec{ModalityKind::spectrogram, {8, 8}};

/// Small three-domain, three-class series set.
SourceSet tiny_set(std::uint64_t seed, std::size_t domains = 3, std::size_t per_class = 6) {
  Rng rng(seed);
  std::vector<synth::DomainShift> shifts;
  for (std::size_t d = 0; d < domains; ++d) {
    auto s = synth::DomainShift::identity("D" + std::to_string(d + 1));
    s.noise_sigma = 0.05;
    s.amplitude_gain = 1.0 + 0.2 * static_cast<double>(d);
    shifts.push_back(s);
  }
  return synth::synth_series_dataset(domains, 3, per_class, kSeries, shifts, rng);
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.epochs_domain = 1;
  cfg.epochs_main = 1;
  cfg.epochs_vae = 1;
  cfg.batch_size = 8;
  cfg.feature_dim = 16;
  cfg.latent_dim = 4;
  cfg.seed = 3;
  return cfg;
}

std::vector<float> values_of(const Tensor<float>& t) { return {t.values().begin(), t.values().end()}; }

std::vector<const Sample*> pointers(const DomainDataset& d) {
  std::vector<const Sample*> out;
  for (const auto& s : d.samples) out.push_back(&s);
  return out;
}

}  // namespace

TEST(VaeLoss, KlIsZeroAtTheStandardNormal) {
  const std::vector<double> mu{0.0, 0.0}, sigma{1.0, 1.0};
  EXPECT_EQ(vae::kl_normal<double>(mu, sigma), 0.0);
}

TEST(VaeLoss, KlOfUnitMeanUnitSigmaIsOneHalf) {
  const std::vector<double> mu{1.0}, sigma{1.0};
  EXPECT_NEAR(vae::kl_normal<double>(mu, sigma), 0.5, 1e-9);
}

TEST(VaeLoss, KlRejectsNonPositiveSigma) {
  const std::vector<double> mu{0.0}, sigma{0.0};
  EXPECT_THROW(vae::kl_normal<double>(mu, sigma), ArgumentError);
}

TEST(VaeLoss, ReparameterizeShiftsAndScalesTheNoise) {
  const std::vector<double> mu{1.0, -2.0}, sigma{0.5, 3.0};
  Rng a(9), b(9);
  const auto z = vae::reparameterize<double>(mu, sigma, a);
  EXPECT_DOUBLE_EQ(z[0], 1.0 + 0.5 * b.normal());
  EXPECT_DOUBLE_EQ(z[1], -2.0 + 3.0 * b.normal());
}

TEST(VaeLoss, BatchObjectiveMatchesHandComputation) {
  Tensor<double> x({2, 2}, {1.0, 2.0, 0.0, 0.0});
  Tensor<double> rec({2, 2}, {1.0, 0.0, 1.0, 1.0});
  Tensor<double> mu({2, 1}, {1.0, 0.0});
  Tensor<double> sigma({2, 1}, {1.0, 1.0});
  // sample 0: mse 2, kl 0.5; sample 1: mse 1, kl 0.
  EXPECT_NEAR(vae::vae_loss(x, rec, mu, sigma, 2.0), ((2.0 + 1.0) + 1.0) / 2, 1e-12);
}

TEST(Generator, NoiselessGenerationEqualsReconstruction) {
  Rng rng(1);
  vae::GeneratorModel<float> model(kSeries, vae::VaeArch{{4, 8}, 4}, rng);
  model.mark_trained();
  Tensor<float> x(kSeries.shape);
  for (auto& v : x.values()) v = static_cast<float>(rng.normal());
  Rng noise(2);
  const auto gen = vae::generate_single(model, x, 1.0, 0.0, noise);
  const auto rec = model.reconstruct(vae::as_batch<float>(kSeries, x)).at(kSeries.kind).reshaped(kSeries.shape);
  ASSERT_EQ(gen.shape(), rec.shape());
  EXPECT_EQ(0, std::memcmp(gen.data(), rec.data(), gen.size() * sizeof(float)));
}

TEST(Generator, UntrainedGeneratorRefusesToGenerate) {
  Rng rng(3);
  vae::GeneratorModel<float> model(kSeries, vae::VaeArch{{4, 8}, 4}, rng);
  EXPECT_THROW(vae::generate_single(model, Tensor<float>(kSeries.shape), 0.8, 0.2, rng), StateError);
}

TEST(Generator, CrossModalOutputsShareOneLatent) {
  Rng rng(4);
  vae::CrossModalGenerator<float> gen(kSeries, {kSeries, kSpec}, vae::VaeArch{{4, 8}, 4}, rng);
  gen.mark_trained();
  const auto out = vae::generate_cross(gen, Tensor<float>(kSeries.shape), 0.8, 0.2, rng);
  EXPECT_EQ(out.at(kSeries.kind).shape(), kSeries.shape);
  EXPECT_EQ(out.at(kSpec.kind).shape(), kSpec.shape);
  const auto z = gen.last_latent();
  EXPECT_EQ(values_of(gen.decode(z).at(kSpec.kind)), values_of(out.at(kSpec.kind)));
}

TEST(Generator, SingleModalityFallsBackToTheSingleModalVariant) {
  TrainConfig cfg = quick_config();
  Rng rng(5);
  vae::VirtualGenerator gen({kSeries}, cfg, rng);
  EXPECT_EQ(gen.variant(), "single_modal");
  EXPECT_FALSE(gen.trained());
}

TEST(Generator, CheckpointRoundTripGeneratesIdentically) {
  const auto set = tiny_set(6);
  TrainConfig cfg = quick_config();
  Rng init(7), train(8);
  vae::VirtualGenerator gen(set.modalities, cfg, init);
  gen.train(pointers(set.domains[0]), cfg, train);
  ASSERT_TRUE(gen.trained());
  auto back = vae::VirtualGenerator::from_checkpoint(decode_checkpoint(encode_checkpoint(gen.to_checkpoint({}))));
  Rng a(9), b(9);
  const auto& s = set.domains[1].samples[0];
  EXPECT_EQ(values_of(gen.generate(s, cfg, a).at(kSeries.kind)), values_of(back.generate(s, cfg, b).at(kSeries.kind)));
}

TEST(Generator, VirtualSamplesKeepLabelAndDomain) {
  const auto set = tiny_set(10);
  TrainConfig cfg = quick_config();
  Rng init(1), train(2), gen_rng(3);
  vae::VirtualGenerator gen(set.modalities, cfg, init);
  gen.train(pointers(set.domains[0]), cfg, train);
  const auto& dom = set.domains[0];
  const auto virt = vae::make_virtual_samples(gen, dom, 0.5, cfg, gen_rng);
  ASSERT_EQ(virt.size(), dom.size() / 2);
  for (std::size_t j = 0; j < virt.size(); ++j) {
    EXPECT_EQ(virt[j].label, dom.samples[j].label);
    EXPECT_EQ(virt[j].domain_id, dom.domain_id);
  }
  EXPECT_THROW(vae::make_virtual_samples(gen, dom, -1.0, cfg, gen_rng), ArgumentError);
}

TEST(Episodic, IdenticalNetworksGiveEqualLosses) {
  const auto set = tiny_set(11);
  const auto cfg = quick_config();
  const auto spec = episodic::network_spec(set, cfg);
  Rng rng(12);
  episodic::Net main(spec, rng);
  episodic::DomainNetwork dn{"D1", main};
  const auto samples = pointers(set.domains[0]);
  const auto batch = nets::make_batch<float>(std::span<const Sample* const>(samples), set.modalities);
  const std::vector<std::string> doms(samples.size(), "D1");
  const auto l = episodic::episodic_losses(main, dn, batch, doms);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    EXPECT_NEAR(l.loss1[j], l.loss2[j], 1e-6);
    EXPECT_NEAR(l.loss1[j], l.loss3[j], 1e-6);
  }
}

TEST(Episodic, MixedDomainBatchIsRejected) {
  const auto set = tiny_set(13);
  const auto spec = episodic::network_spec(set, quick_config());
  Rng rng(14);
  episodic::Net main(spec, rng);
  episodic::DomainNetwork dn{"D1", main};
  std::vector<const Sample*> samples{&set.domains[0].samples[0], &set.domains[1].samples[0]};
  const auto batch = nets::make_batch<float>(std::span<const Sample* const>(samples), set.modalities);
  EXPECT_THROW(episodic::episodic_losses(main, dn, batch, {"D1", "D2"}), ArgumentError);
}

TEST(Episodic, MainLossWithZeroWeightsIsThePooledFirstLoss) {
  Rng rng(15);
  std::vector<std::vector<std::array<double, 3>>> table(3);
  double pooled = 0;
  for (auto& d : table) {
    for (int j = 0; j < 4; ++j) {
      d.push_back({rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)});
      pooled += d.back()[0];
    }
  }
  EXPECT_NEAR(episodic::main_loss(table, 0.0, 0.0), pooled / 12, 1e-12);
}

TEST(Episodic, MainLossAveragesDomainsThenSamples) {
  const std::vector<std::vector<std::array<double, 3>>> table{{{1, 0, 0}}, {{2, 1, 1}, {4, 1, 3}}};
  // domain 1: 1; domain 2: ((2+1+2) + (4+1+6)) / 2 with theta (1, 2) = 8.
  EXPECT_NEAR(episodic::main_loss(table, 1.0, 2.0), (1.0 + 8.0) / 2, 1e-12);
}

TEST(Episodic, DomainNetworksStayFrozenThroughMainTraining) {
  const auto set = tiny_set(16);
  const auto cfg = quick_config();
  const auto spec = episodic::network_spec(set, cfg);
  Rng rng(17);
  episodic::EpisodicState state{episodic::Net(spec, rng), {}, {}, {}};
  for (const auto& d : set.domains) {
    state.domains.push_back({d.domain_id, episodic::Net(spec, rng)});
    episodic::train_domain_network(state.domains.back(), d, cfg, rng);
  }
  episodic::freeze_domains(state);
  const auto before = state.frozen_hashes;
  const auto main_before = state.main.digest();
  episodic::train_main(state, set.domains, cfg, rng);
  for (std::size_t i = 0; i < state.domains.size(); ++i) EXPECT_EQ(state.domains[i].net.digest(), before[i]);
  EXPECT_NE(state.main.digest(), main_before);
  EXPECT_EQ(state.history.steps.size(), 3u * 3u);  // three domains, three batches of 8 from 18

  state.domains[0].net.parameters()[0].param->value[0] += 1.0f;
  EXPECT_THROW(episodic::verify_frozen(state), InvariantViolation);
}

TEST(Pipeline, ZeroVirtualRatioMatchesTheNoVirtualVariant) {
  const auto set = tiny_set(18);
  auto cfg = quick_config();
  cfg.virtual_ratio = 0.0;
  auto a = episodic::train_pipeline(set, episodic::Variant::dgsense, cfg);
  auto b = episodic::train_pipeline(set, episodic::Variant::no_virtual, cfg);
  EXPECT_EQ(a.num_virtual, 0u);
  EXPECT_EQ(a.main.digest(), b.main.digest());
}

TEST(Pipeline, SameSeedSameModel) {
  const auto set = tiny_set(19);
  const auto cfg = quick_config();
  auto a = episodic::train_pipeline(set, episodic::Variant::dgsense, cfg);
  auto b = episodic::train_pipeline(set, episodic::Variant::dgsense, cfg);
  EXPECT_EQ(a.main.digest(), b.main.digest());
  EXPECT_EQ(a.num_virtual, set.total_samples());
}

TEST(Pipeline, VariantNamesRoundTrip) {
  for (auto v : {episodic::Variant::dgsense, episodic::Variant::no_dg, episodic::Variant::no_virtual,
                 episodic::Variant::multi_modal_gen, episodic::Variant::cross_modal_gen}) {
    EXPECT_EQ(episodic::variant_from_string(episodic::to_string(v)), v);
  }
  EXPECT_THROW(episodic::variant_from_string("dg"), ArgumentError);
}

TEST(Metrics, HandCountedBinaryExample) {
  const std::vector<int> truth{1, 1, 1, 1, 0, 0}, pred{1, 1, 1, 0, 1, 0};
  const auto m = eval::compute_metrics(truth, pred, 1);
  EXPECT_EQ(m.precision, 3.0 / 4.0);
  EXPECT_EQ(m.recall, 3.0 / 4.0);
  EXPECT_EQ(m.accuracy, 4.0 / 6.0);
  EXPECT_EQ(m.confusion, (std::vector<std::vector<std::size_t>>{{1, 1}, {1, 3}}));
}

TEST(Metrics, EmptyPredictedClassIsFlaggedUndefined) {
  const auto m = eval::compute_metrics({0, 0, 1}, {0, 0, 0}, 1);
  EXPECT_TRUE(m.precision_undefined);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_FALSE(m.recall_undefined);
}

TEST(Metrics, MacroAveragesPerClassScores) {
  const auto m = eval::compute_metrics({0, 0, 1, 2}, {0, 1, 1, 2});
  EXPECT_NEAR(m.precision, (1.0 + 0.5 + 1.0) / 3, 1e-12);
  EXPECT_NEAR(m.recall, (0.5 + 1.0 + 1.0) / 3, 1e-12);
}

TEST(Folds, StratifiedPartitionIsDisjointExhaustiveAndBalanced) {
  Rng rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> labels;
    const std::size_t classes = 2 + rng.below(4);
    for (std::size_t c = 0; c < classes; ++c) {
      const std::size_t n = 5 + rng.below(20);
      for (std::size_t j = 0; j < n; ++j) labels.push_back(static_cast<int>(c));
    }
    const auto fold = eval::stratified_folds(labels, 5, rng);
    ASSERT_EQ(fold.size(), labels.size());  // every sample in exactly one fold
    std::vector<std::size_t> sizes(5, 0);
    for (auto f : fold) {
      ASSERT_LT(f, 5u);
      sizes[f]++;
    }
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1u);
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::size_t> per(5, 0);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == static_cast<int>(c)) per[fold[i]]++;
      }
      EXPECT_LE(*std::max_element(per.begin(), per.end()) - *std::min_element(per.begin(), per.end()), 1u);
    }
  }
}

TEST(Folds, TooFewSamplesPerClassIsRejected) {
  Rng rng(21);
  EXPECT_THROW(eval::stratified_folds({0, 0, 0, 1, 1, 1, 1, 1}, 5, rng), ArgumentError);
}

TEST(Experiment, LeaveOneDomainOutNeverTrainsOnTheTarget) {
  const auto set = tiny_set(22);
  eval::ExperimentSpec spec;
  spec.config = quick_config();
  spec.split.target_domains = {"D2"};
  spec.seeds = {1, 2};
  const auto report = eval::leave_one_domain_out(set, spec);
  ASSERT_EQ(report.folds.size(), 2u);
  for (const auto& f : report.folds) {
    EXPECT_EQ(f.target, "D2");
    EXPECT_EQ(f.leaked_samples, 0u);
    EXPECT_EQ(f.test_samples, set.domain("D2").size());
    EXPECT_EQ(f.train_samples, set.total_samples() - set.domain("D2").size());
  }
}

TEST(Experiment, LeaveOneDomainOutNeedsTwoDomains) {
  const auto set = tiny_set(23, 1);
  eval::ExperimentSpec spec;
  spec.config = quick_config();
  EXPECT_THROW(eval::leave_one_domain_out(set, spec), ArgumentError);
  const auto two = tiny_set(23, 2);
  spec.split.target_domains = {"D9"};
  EXPECT_THROW(eval::leave_one_domain_out(two, spec), ArgumentError);
}

TEST(Experiment, KFoldCoversEverySampleOnce) {
  const auto set = tiny_set(24, 2, 5);
  eval::ExperimentSpec spec;
  spec.config = quick_config();
  spec.variant = eval::Variant::no_dg;
  spec.split.mode = SplitMode::k_fold_in_domain;
  const auto report = eval::k_fold_in_domain(set, 5, spec);
  ASSERT_EQ(report.folds.size(), 5u);
  std::size_t tested = 0;
  for (const auto& f : report.folds) tested += f.test_samples;
  EXPECT_EQ(tested, set.total_samples());
  EXPECT_EQ(report.aggregate.total(), set.total_samples());
}

TEST(Ablation, UnknownGridValuesFailBeforeTraining) {
  const auto set = tiny_set(25);
  eval::ExperimentSpec spec;
  spec.config = quick_config();
  EXPECT_THROW(eval::run_ablation(set, eval::Sweep::num_domains, {"1", "x"}, spec), ArgumentError);
  EXPECT_THROW(eval::run_ablation(set, eval::Sweep::num_virtual, {"-0.5"}, spec), ArgumentError);
  EXPECT_THROW(eval::sweep_from_string("num_users"), ArgumentError);
}

TEST(Ablation, KeepPerClassTrimsEveryDomain) {
  const auto set = tiny_set(26);
  const auto kept = eval::keep_per_class(set, 2);
  for (const auto& d : kept.domains) EXPECT_EQ(d.size(), 6u);
}

TEST(Quality, UntrainedGeneratorIsAStateError) {
  const auto set = tiny_set(27);
  const auto cfg = quick_config();
  Rng rng(1);
  vae::VirtualGenerator gen(set.modalities, cfg, rng);
  EXPECT_THROW(eval::quality_check_virtual(gen, set, cfg), StateError);
}

TEST(Benchmarks, ShapesAndCountsMatchTheirDescriptions) {
  const auto g = synth::make_benchmark("gesture6", 1);
  EXPECT_EQ(g.num_domains(), 6u);
  EXPECT_EQ(g.num_classes(), 6u);
  EXPECT_EQ(g.total_samples(), 6u * 6u * 20u);
  EXPECT_EQ(g.modalities.size(), 3u);
  const auto a = synth::make_benchmark("activity6", 1);
  EXPECT_EQ(a.modalities.size(), 1u);
  EXPECT_EQ(a.modalities[0].kind, ModalityKind::compressed_doppler_map);
  const auto f = synth::make_benchmark("fall2", 1);
  EXPECT_EQ(f.num_classes(), 2u);
  EXPECT_EQ(f.num_domains(), 4u);
  EXPECT_THROW(synth::make_benchmark("gesture7", 1), ArgumentError);
}

TEST(Benchmarks, SameSeedSameData) {
  const auto a = synth::make_benchmark("gesture6", 5), b = synth::make_benchmark("gesture6", 5);
  for (std::size_t d = 0; d < a.num_domains(); ++d) {
    for (std::size_t i = 0; i < a.domains[d].size(); ++i) {
      EXPECT_EQ(sample_digest(a.domains[d].samples[i]), sample_digest(b.domains[d].samples[i]));
    }
  }
}

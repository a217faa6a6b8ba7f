#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "dgsense/core/batch_log.hpp"
#include "dgsense/core/checkpoint.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/dataset_io.hpp"
#include "dgsense/core/rng.hpp"

using namespace dgsense;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dgsense_core_" + name);
  fs::remove_all(p);
  return p;
}

/// Two domains, two labels, two modalities, arbitrary finite float32 values
/// including subnormals and extremes.
SourceSet random_set(Rng& rng) {
  SourceSet set;
  set.label_names = {"a", "b"};
  set.modalities = {{ModalityKind::amplitude_series, {2, 5}}, {ModalityKind::spectrogram, {3, 4}}};
  const float specials[] = {0.0f, -0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::max(),
                            std::numeric_limits<float>::lowest(), 1e-30f};
  for (const char* d : {"D1", "D2"}) {
    DomainDataset dom{d, {}};
    for (int i = 0; i < 4; ++i) {
      Sample s{"s" + std::to_string(i), d, i % 2, {}};
      for (const auto& m : set.modalities) {
        Tensor<float> t(m.shape);
        for (auto& v : t.values()) {
          const auto pick = rng.below(8);
          v = pick < 6 ? specials[pick] : static_cast<float>(rng.normal() * 1e3);
        }
        s.tensors.emplace(m.kind, std::move(t));
      }
      dom.samples.push_back(std::move(s));
    }
    set.domains.push_back(std::move(dom));
  }
  return set;
}

bool bit_equal(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Rng, NamedStreamsAreReproducibleAndDistinct) {
  Rng a = seeded_rng(7, "main"), b = seeded_rng(7, "main"), c = seeded_rng(7, "vae"), d = seeded_rng(8, "main");
  const auto va = a(), vb = b(), vc = c(), vd = d();
  EXPECT_EQ(va, vb);
  EXPECT_NE(va, vc);
  EXPECT_NE(va, vd);
}

TEST(Rng, NormalHasUnitMoments) {
  Rng rng(3);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsAPermutation) {
  Rng rng(4);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
  rng.shuffle(std::span<int>(v));
  auto sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
}

TEST(Tensor, ShapeMismatchIsRejected) {
  EXPECT_THROW(Tensor<float>({2, 3}, std::vector<float>(5)), ArgumentError);
  Tensor<float> t({2, 3});
  EXPECT_THROW(t.reshape({4, 2}), ArgumentError);
}

TEST(Config, DefaultsValidateAndRoundTrip) {
  const TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(cfg.lambda_kl, 1.0);
  EXPECT_DOUBLE_EQ(cfg.omega_signal, 0.8);
  EXPECT_DOUBLE_EQ(cfg.omega_noise, 0.2);
  EXPECT_DOUBLE_EQ(cfg.theta1, 1.0);
  EXPECT_DOUBLE_EQ(cfg.theta2, 1.0);
  EXPECT_DOUBLE_EQ(cfg.virtual_ratio, 1.0);
  for (double a : cfg.alpha) EXPECT_NEAR(a, 1.0 / 3.0, 1e-12);
  EXPECT_EQ(to_json(config_from_json(to_json(cfg))), to_json(cfg));
}

TEST(Config, UnknownKeysAndBadValuesAreRejected) {
  EXPECT_THROW(config_from_json({{"lamda_kl", 1.0}}), ArgumentError);
  EXPECT_THROW(config_from_json({{"theta1", -1.0}}), ArgumentError);
  EXPECT_THROW(config_from_json({{"batch_size", "16"}}), ArgumentError);
  EXPECT_THROW(config_from_json({{"optimizer", "rmsprop"}}), ArgumentError);
  EXPECT_EQ(config_from_json({{"theta2", 0.5}}).theta2, 0.5);
}

TEST(Dataset, RoundTripIsBitExact) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto set = random_set(rng);
    const auto dir = scratch("roundtrip");
    save_dataset(set, dir);
    const auto back = load_dataset(dir);
    ASSERT_EQ(back.label_names, set.label_names);
    ASSERT_EQ(back.modalities, set.modalities);
    ASSERT_EQ(back.num_domains(), set.num_domains());
    EXPECT_EQ(back.total_samples(), 8u);
    for (std::size_t d = 0; d < set.num_domains(); ++d) {
      for (const auto& s : set.domains[d].samples) {
        const auto it = std::find_if(back.domains[d].samples.begin(), back.domains[d].samples.end(),
                                     [&](const Sample& b) { return b.sample_id == s.sample_id; });
        ASSERT_NE(it, back.domains[d].samples.end());
        EXPECT_EQ(it->label, s.label);
        for (const auto& [kind, t] : s.tensors) EXPECT_TRUE(bit_equal(t, it->tensor(kind)));
        EXPECT_EQ(sample_digest(*it), sample_digest(s));
      }
    }
    fs::remove_all(dir);
  }
}

TEST(Dataset, ManifestCarriesDeclaredFields) {
  Rng rng(6);
  const auto set = random_set(rng);
  const auto dir = scratch("manifest");
  save_dataset(set, dir);
  const auto j = read_json_file((dir / "manifest.json").string());
  EXPECT_EQ(j.at("version"), 1);
  EXPECT_EQ(j.at("labels").size(), 2u);
  EXPECT_EQ(j.at("modalities")[0].at("kind"), "amplitude_series");
  EXPECT_EQ(j.at("domains")[1].at("id"), "D2");
  EXPECT_EQ(j.at("domains")[1].at("num_samples"), 4);
  EXPECT_TRUE(fs::exists(dir / "D1" / "b" / "s1.spectrogram.f32"));
  EXPECT_EQ(fs::file_size(dir / "D1" / "b" / "s1.spectrogram.f32"), 3u * 4u * 4u);
  fs::remove_all(dir);
}

TEST(Dataset, TruncatedSampleFileIsCorruption) {
  Rng rng(7);
  const auto set = random_set(rng);
  const auto dir = scratch("truncated");
  save_dataset(set, dir);
  fs::resize_file(dir / "D2" / "a" / "s0.amplitude_series.f32", 38);
  EXPECT_THROW(load_dataset(dir), CorruptionError);
  fs::remove_all(dir);
}

TEST(Dataset, NonFiniteValuesAreRejectedOnLoad) {
  Rng rng(8);
  const auto set = random_set(rng);
  const auto dir = scratch("nan");
  save_dataset(set, dir);
  std::string bytes;
  append_f32_le(bytes, std::vector<float>(10, std::numeric_limits<float>::quiet_NaN()));
  write_file_bytes(dir / "D1" / "a" / "s0.amplitude_series.f32", bytes);
  EXPECT_THROW(load_dataset(dir), DataError);
  fs::remove_all(dir);
}

TEST(Dataset, MissingManifestIsAFormatError) {
  const auto dir = scratch("empty");
  fs::create_directories(dir);
  EXPECT_THROW(load_dataset(dir), FormatError);
  fs::remove_all(dir);
}

TEST(SourceSet, TotalIsTheSumOfDomainSizes) {
  Rng rng(9);
  auto set = random_set(rng);
  set.domains[1].samples.pop_back();
  EXPECT_EQ(set.total_samples(), set.domains[0].size() + set.domains[1].size());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(10);
  Checkpoint ck;
  ck.module = "main";
  ck.config = {{"seed", 3}};
  ck.extra = {{"note", "x"}};
  for (int i = 0; i < 3; ++i) {
    Tensor<float> t({2, static_cast<std::size_t>(i + 1)});
    for (auto& v : t.values()) v = static_cast<float>(rng.normal());
    ck.params.push_back({"p" + std::to_string(i), t});
  }
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.module, "main");
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.extra, ck.extra);
  ASSERT_EQ(back.params.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.params[i].name, ck.params[i].name);
    EXPECT_TRUE(bit_equal(back.params[i].value, ck.params[i].value));
  }
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, SaveCreatesMissingDirectories) {
  const auto root = std::filesystem::temp_directory_path() / "dgsense_ckpt_dirs";
  std::filesystem::remove_all(root);
  Checkpoint ck;
  ck.module = "main";
  ck.params.push_back({"w", Tensor<float>({2}, 1.0f)});
  const auto path = root / "a" / "b" / "model.ckpt";
  save_checkpoint(ck, path);
  EXPECT_EQ(load_checkpoint(path).param("w").size(), 2u);
  std::filesystem::remove_all(root);
}

TEST(Checkpoint, TruncationAndTrailingBytesAreDetected) {
  Checkpoint ck;
  ck.module = "main";
  ck.params.push_back({"w", Tensor<float>({4})});
  const auto bytes = encode_checkpoint(ck);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CorruptionError);
  EXPECT_THROW(decode_checkpoint(bytes + "x"), CorruptionError);
  EXPECT_THROW(decode_checkpoint("{not json\n"), FormatError);
  EXPECT_THROW(decode_checkpoint("no newline"), FormatError);
}

TEST(BatchLog, CountsDigestsPerStage) {
  Rng rng(11);
  const auto set = random_set(rng);
  BatchLog log;
  std::vector<const Sample*> batch{&set.domains[0].samples[0], &set.domains[0].samples[1]};
  log.record("main", batch);
  EXPECT_EQ(log.batches("main"), 1u);
  EXPECT_EQ(log.batches("generator"), 0u);
  EXPECT_EQ(log.count_present({sample_digest(set.domains[0].samples[1])}), 1u);
  EXPECT_EQ(log.count_present({sample_digest(set.domains[1].samples[3])}), 0u);
}

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dgsense/core/dataset_io.hpp"
#include "dgsense/synth/datasets.hpp"

using namespace dgsense;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(DGSENSE_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dgsense_cli_" + name);
  fs::remove_all(p);
  return p;
}

/// Two-domain single-modality dataset small enough for one-epoch runs.
fs::path small_dataset(const std::string& name) {
  Rng rng(5);
  const Modality m{ModalityKind::amplitude_series, {2, 16}};
  std::vector<synth::DomainShift> shifts{synth::DomainShift::identity("A"), synth::DomainShift::identity("B")};
  for (auto& s : shifts) s.noise_sigma = 0.1;
  const auto set = synth::synth_series_dataset(2, 2, 5, m, shifts, rng);
  const auto dir = scratch(name);
  save_dataset(set, dir);
  return dir;
}

const std::string kQuick = " --epochs-domain 1 --epochs-main 1 --epochs-vae 1";

}  // namespace

TEST(Cli, UnknownFlagIsAUsageError) {
  const auto r = run_cli("train --bogus");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("Usage"), std::string::npos);
}

TEST(Cli, HelpListsEveryFlag) {
  const auto r = run_cli("train --help");
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--dataset", "--target-domain", "--out-checkpoint", "--no-dg", "--no-virtual", "--config",
                           "--seed", "--omega1", "--omega2", "--ratio", "--base-modality"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  const auto ab = run_cli("ablate --help");
  for (const char* flag : {"--sweep", "--grid"}) EXPECT_NE(ab.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, SynthThenInspectReportsCounts) {
  const auto dir = scratch("gesture");
  ASSERT_EQ(run_cli("synth --spec gesture6 --seed 7 --out " + dir.string()).code, 0);
  const auto r = run_cli("inspect " + dir.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("N=6"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("n=720"), std::string::npos) << r.out;
  for (const char* m : {"amplitude_series", "phase_map", "spectrogram"}) EXPECT_NE(r.out.find(m), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, TrainWritesCheckpointReportAndResolvedConfig) {
  const auto data = small_dataset("train_data");
  const auto out = scratch("train_out");
  const auto r = run_cli("train --dataset " + data.string() + " --target-domain B --no-dg --out " + out.string() +
                         kQuick);
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"main.ckpt", "report.json", "resolved_config.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto resolved = nlohmann::json::parse(slurp(out / "resolved_config.json"));
  EXPECT_EQ(resolved.at("train_config").at("epochs_main"), 1);
  EXPECT_EQ(resolved.at("train_config").at("seed"), 7);
  const auto report = nlohmann::json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report.at("leaked_samples"), 0);
  fs::remove_all(out);
  fs::remove_all(data);
}

TEST(Cli, RepeatingAResolvedConfigReproducesTheRun) {
  const auto data = small_dataset("repro_data");
  const auto a = scratch("repro_a"), b = scratch("repro_b");
  ASSERT_EQ(run_cli("train --dataset " + data.string() + " --target-domain B --out " + a.string() + kQuick).code, 0);
  ASSERT_EQ(run_cli("train --dataset " + data.string() + " --target-domain B --out " + b.string() + " --config " +
                    (a / "resolved_config.json").string())
                .code,
            0);
  EXPECT_EQ(slurp(a / "main.ckpt"), slurp(b / "main.ckpt"));
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  for (const auto& p : {a, b, data}) fs::remove_all(p);
}

TEST(Cli, CorruptDatasetIsADataError) {
  const auto data = small_dataset("corrupt");
  std::ofstream(data / "manifest.json") << "{\"version\": 1";
  const auto r = run_cli("train --dataset " + data.string() + " --target-domain B" + kQuick);
  EXPECT_EQ(r.code, 2) << r.out;
  fs::remove_all(data);
}

TEST(Cli, UnknownConfigKeyIsRejected) {
  const auto data = small_dataset("badcfg");
  const auto cfg = data / "cfg.json";
  std::ofstream(cfg) << "{\"lamda_kl\": 2}";
  const auto r = run_cli("train --dataset " + data.string() + " --config " + cfg.string());
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("lamda_kl"), std::string::npos);
  fs::remove_all(data);
}

TEST(Cli, UnknownTargetDomainIsADataError) {
  const auto data = small_dataset("badtarget");
  const auto r = run_cli("train --dataset " + data.string() + " --target-domain Z" + kQuick);
  EXPECT_EQ(r.code, 2) << r.out;
  fs::remove_all(data);
}

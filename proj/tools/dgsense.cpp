// Command-line entry point: synthesize or preprocess data, train generators
// and classifiers, evaluate, and run ablation sweeps.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dgsense/core/checkpoint.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/dataset_io.hpp"
#include "dgsense/episodic/pipeline.hpp"
#include "dgsense/eval/experiment.hpp"
#include "dgsense/eval/report.hpp"
#include "dgsense/sigproc/capture_io.hpp"
#include "dgsense/synth/benchmark.hpp"
#include "dgsense/vae/virtual.hpp"

namespace fs = std::filesystem;
using namespace dgsense;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kTraining = 3 };

/// Training settings shared by every command that trains something.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> omega1, omega2, ratio;
  std::optional<std::string> base_modality, generator, preset;
  std::optional<int> epochs_domain, epochs_main, epochs_vae;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config overlay, or a resolved_config.json of an earlier run")
        ->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Training seed");
    app->add_option("--omega1", omega1, "Weight of the encoded latent when generating");
    app->add_option("--omega2", omega2, "Weight of the added latent noise when generating");
    app->add_option("--ratio", ratio, "Virtual samples per real sample");
    app->add_option("--base-modality", base_modality, "Modality encoded by the cross-modal generator");
    app->add_option("--generator", generator, "cross_modal, multi_modal or single_modal");
    app->add_option("--preset", preset, "Network preset: small or resnet18");
    app->add_option("--epochs-domain", epochs_domain, "Epochs for each domain network");
    app->add_option("--epochs-main", epochs_main, "Epochs for the main network");
    app->add_option("--epochs-vae", epochs_vae, "Epochs for the generator");
  }

  /// Defaults, then the config file, then flags.
  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!config_path.empty()) {
      json j = read_json_file(config_path);
      if (j.is_object() && j.contains("train_config")) {
        for (const auto& [key, value] : j.items()) {
          if (key != "train_config" && key != "command" && key != "args") {
            throw ArgumentError("unknown key '" + key + "' in " + config_path);
          }
        }
        j = j.at("train_config");
      }
      cfg = overlay_config(cfg, j);
    }
    if (seed) cfg.seed = *seed;
    if (omega1) cfg.omega_signal = *omega1;
    if (omega2) cfg.omega_noise = *omega2;
    if (ratio) cfg.virtual_ratio = *ratio;
    if (base_modality) cfg.base_modality = *base_modality;
    if (generator) cfg.generator = *generator;
    if (preset) cfg.preset = *preset;
    if (epochs_domain) cfg.epochs_domain = *epochs_domain;
    if (epochs_main) cfg.epochs_main = *epochs_main;
    if (epochs_vae) cfg.epochs_vae = *epochs_vae;
    cfg.validate();
    return cfg;
  }
};

/// Records the command, its arguments and the merged config in the run
/// directory; `--config` accepts this file back.
void write_resolved(const fs::path& dir, const std::string& command, const json& args, const TrainConfig* cfg) {
  json j;
  j["command"] = command;
  j["args"] = args;
  if (cfg) j["train_config"] = to_json(*cfg);
  eval::write_json(dir / "resolved_config.json", j);
}

SourceSet sources_without(const SourceSet& set, const std::string& target) {
  if (target.empty()) return set;
  if (!set.has_domain(target)) throw ArgumentError("unknown target domain '" + target + "'");
  auto out = eval::without_domains(set, {target});
  if (out.domains.empty()) throw ArgumentError("no source domains left after excluding " + target);
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::vector<std::uint64_t>& given, const TrainConfig& cfg) {
  return given.empty() ? std::vector<std::uint64_t>{cfg.seed} : given;
}

int run_synth(const std::string& spec, std::uint64_t seed, const fs::path& out) {
  const auto set = synth::make_benchmark(spec, seed);
  save_dataset(set, out);
  write_resolved(out, "synth", {{"spec", spec}, {"seed", seed}}, nullptr);
  std::cout << "wrote " << spec << " (" << set.num_domains() << " domains, " << set.total_samples()
            << " samples) to " << out.string() << "\n";
  return kOk;
}

int run_inspect(const fs::path& dataset) {
  const auto set = load_dataset(dataset);
  std::cout << "N=" << set.num_domains() << "\n";
  std::cout << "n=" << set.total_samples() << "\n";
  std::cout << "labels:";
  for (const auto& l : set.label_names) std::cout << ' ' << l;
  std::cout << "\nmodalities:";
  for (const auto& m : set.modalities) std::cout << ' ' << to_string(m.kind) << shape_string(m.shape);
  std::cout << "\n";
  for (const auto& d : set.domains) std::cout << "  " << d.domain_id << ": " << d.size() << "\n";
  return kOk;
}

/// Capture list: {"labels": [...], "captures": [{"descriptor": path,
/// "domain": id, "label": name, "sample_id": id}, ...]}. Modalities and
/// shapes are taken from the first preprocessed capture.
int run_preprocess(const fs::path& list_path, const fs::path& out) {
  const json list = read_json_file(list_path.string());
  SourceSet set;
  std::map<std::string, std::size_t> domain_index;
  try {
    set.label_names = list.at("labels").get<std::vector<std::string>>();
    for (const auto& c : list.at("captures")) {
      fs::path descriptor = c.at("descriptor").get<std::string>();
      if (descriptor.is_relative()) descriptor = list_path.parent_path() / descriptor;
      TensorMap tensors = sigproc::preprocess_capture(descriptor, sigproc::PreprocessOptions{});
      if (set.modalities.empty()) {
        for (const auto& [kind, t] : tensors) set.modalities.push_back({kind, t.shape()});
      }
      const auto label_name = c.at("label").get<std::string>();
      const auto it = std::find(set.label_names.begin(), set.label_names.end(), label_name);
      if (it == set.label_names.end()) throw DataError("capture label '" + label_name + "' is not listed");
      const auto domain = c.at("domain").get<std::string>();
      if (!domain_index.count(domain)) {
        domain_index[domain] = set.domains.size();
        set.domains.push_back({domain, {}});
      }
      Sample s{c.at("sample_id").get<std::string>(), domain, static_cast<int>(it - set.label_names.begin()),
               std::move(tensors)};
      set.domains[domain_index[domain]].samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError("malformed capture list " + list_path.string() + ": " + e.what());
  }
  set.validate();
  save_dataset(set, out);
  write_resolved(out, "preprocess", {{"captures", list_path.string()}}, nullptr);
  std::cout << "preprocessed " << set.total_samples() << " captures into " << out.string() << "\n";
  return kOk;
}

int run_train_gen(const fs::path& dataset, const std::string& target, const TrainConfig& cfg,
                  const fs::path& checkpoint, const fs::path& out) {
  const auto set = sources_without(load_dataset(dataset), target);
  Rng init = seeded_rng(cfg.seed, "init/generator");
  vae::VirtualGenerator gen(set.modalities, cfg, init);
  std::vector<const Sample*> real;
  for (const auto& d : set.domains) {
    for (const auto& s : d.samples) real.push_back(&s);
  }
  Rng rng = seeded_rng(cfg.seed, "vae");
  const auto history = gen.train(real, cfg, rng);
  save_checkpoint(gen.to_checkpoint(to_json(cfg)), checkpoint);
  fs::create_directories(out);
  write_resolved(out, "train-gen",
                 {{"dataset", dataset.string()}, {"target_domain", target}, {"out_checkpoint", checkpoint.string()}},
                 &cfg);
  eval::write_json(out / "generator_history.json", {{"variant", gen.variant()}, {"loss", history}});
  std::cout << "trained " << gen.variant() << " generator on " << real.size() << " samples, final loss "
            << history.back() << "\n";
  return kOk;
}

int run_generate(const fs::path& dataset, const fs::path& checkpoint, const TrainConfig& cfg, const fs::path& out) {
  const auto set = load_dataset(dataset);
  auto gen = vae::VirtualGenerator::from_checkpoint(load_checkpoint(checkpoint));
  SourceSet virt{{}, set.label_names, set.modalities};
  for (const auto& d : set.domains) {
    Rng rng = seeded_rng(cfg.seed, "virtual/" + d.domain_id);
    virt.domains.push_back({d.domain_id, vae::make_virtual_samples(gen, d, cfg.virtual_ratio, cfg, rng)});
  }
  virt.validate();
  save_dataset(virt, out);
  write_resolved(out, "generate", {{"dataset", dataset.string()}, {"checkpoint", checkpoint.string()}}, &cfg);
  std::cout << "generated " << virt.total_samples() << " virtual samples into " << out.string() << "\n";
  return kOk;
}

int run_train(const fs::path& dataset, const std::string& target, episodic::Variant variant, const TrainConfig& cfg,
              const fs::path& checkpoint, const fs::path& out) {
  const auto all = load_dataset(dataset);
  const auto sources = sources_without(all, target);
  BatchLog log;
  auto model = episodic::train_pipeline(sources, variant, cfg, &log);
  fs::create_directories(out);
  save_checkpoint(model.main.to_checkpoint("main", to_json(cfg)), checkpoint);
  json args{{"dataset", dataset.string()},
            {"target_domain", target},
            {"variant", episodic::to_string(variant)},
            {"out_checkpoint", checkpoint.string()}};
  write_resolved(out, "train", args, &cfg);
  eval::write_json(out / "history.json", episodic::history_json(model.history));

  json report;
  report["version"] = eval::kReportVersion;
  report["variant"] = episodic::to_string(variant);
  report["source_domains"] = json::array();
  for (const auto& d : sources.domains) report["source_domains"].push_back(d.domain_id);
  report["virtual_samples"] = model.num_virtual;
  if (!target.empty()) {
    std::vector<const Sample*> test;
    std::vector<int> truth;
    std::set<std::string> digests;
    for (const auto& s : all.domain(target).samples) {
      test.push_back(&s);
      truth.push_back(s.label);
      digests.insert(sample_digest(s));
    }
    const auto metrics =
        eval::compute_metrics(truth, episodic::predict_samples(model.main, test), std::nullopt, all.num_classes());
    report["target_domain"] = target;
    report["target_metrics"] = eval::to_json(metrics);
    report["leaked_samples"] = log.count_present(digests);
    std::cout << "target " << target << " accuracy " << metrics.accuracy << "\n";
  }
  eval::write_json(out / "report.json", report);
  std::cout << "wrote " << checkpoint.string() << " and " << (out / "report.json").string() << "\n";
  return kOk;
}

int run_eval_checkpoint(const fs::path& dataset, const fs::path& checkpoint, const std::vector<std::string>& targets,
                        const fs::path& out) {
  const auto set = load_dataset(dataset);
  const auto ck = load_checkpoint(checkpoint);
  if (ck.module != "main") throw FormatError("checkpoint holds a '" + ck.module + "', not a main network");
  auto spec = nets::NetworkSpec::from_json(ck.extra.at("network"));
  Rng unused = seeded_rng(0, "init/eval");
  episodic::Net net(spec, unused);
  net.load_checkpoint(ck);
  json report;
  report["version"] = eval::kReportVersion;
  report["checkpoint"] = checkpoint.string();
  report["domains"] = json::object();
  std::vector<int> truth_all, pred_all;
  for (const auto& d : set.domains) {
    if (!targets.empty() && std::find(targets.begin(), targets.end(), d.domain_id) == targets.end()) continue;
    std::vector<const Sample*> test;
    std::vector<int> truth;
    for (const auto& s : d.samples) {
      test.push_back(&s);
      truth.push_back(s.label);
    }
    const auto pred = episodic::predict_samples(net, test);
    report["domains"][d.domain_id] = eval::to_json(eval::compute_metrics(truth, pred, std::nullopt, set.num_classes()));
    truth_all.insert(truth_all.end(), truth.begin(), truth.end());
    pred_all.insert(pred_all.end(), pred.begin(), pred.end());
  }
  if (truth_all.empty()) throw ArgumentError("no domain matched --target-domain");
  const auto aggregate = eval::compute_metrics(truth_all, pred_all, std::nullopt, set.num_classes());
  report["aggregate"] = eval::to_json(aggregate);
  eval::write_json(out / "report.json", report);
  write_resolved(out, "eval", {{"dataset", dataset.string()}, {"checkpoint", checkpoint.string()}, {"targets", targets}},
                 nullptr);
  std::cout << "accuracy " << aggregate.accuracy << "\n";
  return kOk;
}

int run_eval(const fs::path& dataset, const eval::ExperimentSpec& spec, const fs::path& out) {
  const auto set = load_dataset(dataset);
  const auto report = eval::run_experiment(set, spec);
  fs::create_directories(out);
  write_resolved(out, "eval", {{"experiment", eval::to_json(spec)}}, &spec.config);
  eval::write_json(out / "report.json", eval::report_json(report));
  eval::write_text(out / "report.csv", eval::report_csv(report));
  eval::write_json(out / "timing.json", eval::timing_json(report));
  std::size_t leaked = 0;
  for (const auto& f : report.folds) leaked += f.leaked_samples;
  std::cout << episodic::to_string(spec.variant) << " accuracy " << report.aggregate.accuracy << " over "
            << report.folds.size() << " folds, leaked samples " << leaked << "\n";
  return kOk;
}

int run_ablate(const fs::path& dataset, eval::Sweep sweep, const std::vector<std::string>& grid,
               const eval::ExperimentSpec& spec, const fs::path& out) {
  const auto set = load_dataset(dataset);
  const auto table = eval::run_ablation(set, sweep, grid, spec);
  fs::create_directories(out);
  write_resolved(out, "ablate", {{"sweep", eval::to_string(sweep)}, {"grid", grid}, {"experiment", eval::to_json(spec)}},
                 &spec.config);
  eval::write_json(out / "ablation.json", eval::ablation_json(table));
  eval::write_text(out / "ablation.csv", eval::ablation_csv(table));
  eval::write_json(out / "timing.json", eval::ablation_timing_json(table));
  for (const auto& r : table.rows) std::cout << eval::to_string(sweep) << "=" << r.value << " accuracy " << r.mean_accuracy << "\n";
  return kOk;
}

episodic::Variant pick_variant(const std::string& name, bool no_dg, bool no_virtual) {
  if (no_dg && no_virtual) throw ArgumentError("--no-dg and --no-virtual are mutually exclusive");
  if (no_dg) return episodic::Variant::no_dg;
  if (no_virtual) return episodic::Variant::no_virtual;
  return episodic::variant_from_string(name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain-generalized wireless sensing: data synthesis, training and evaluation"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);

  // synth
  std::string synth_spec;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic multi-domain benchmark dataset");
  synth_cmd->add_option("--spec", synth_spec, "Benchmark: gesture6, activity6 or fall2")->required();
  synth_cmd->add_option("--seed", synth_seed, "Benchmark seed");
  synth_cmd->add_option("--out", synth_out, "Output dataset directory")->required();

  // inspect
  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print domain, sample and modality counts of a dataset");
  inspect_cmd->add_option("dataset", inspect_path, "Dataset directory")->required()->check(CLI::ExistingDirectory);

  // preprocess
  std::string pre_captures, pre_out;
  auto* pre_cmd = app.add_subcommand("preprocess", "Turn raw captures into a dataset");
  pre_cmd->add_option("--captures", pre_captures, "Capture list JSON")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--out", pre_out, "Output dataset directory")->required();

  // shared option storage
  std::string dataset, target, out_checkpoint, out_dir = "run", checkpoint, variant_name = "dgsense";
  std::vector<std::string> targets, grid;
  std::vector<std::uint64_t> seeds;
  bool no_dg = false, no_virtual = false;
  std::size_t kfold = 0;
  std::string sweep_name;
  ConfigFlags flags;

  auto* gen_cmd = app.add_subcommand("train-gen", "Train the virtual-data generator on source domains");
  gen_cmd->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  gen_cmd->add_option("--target-domain", target, "Domain excluded from training");
  gen_cmd->add_option("--out-checkpoint", out_checkpoint, "Generator checkpoint path")->required();
  gen_cmd->add_option("--out", out_dir, "Run directory");

  std::string gen_out;
  auto* generate_cmd = app.add_subcommand("generate", "Write virtual samples from a trained generator");
  generate_cmd->add_option("--dataset", dataset, "Real dataset directory")->required()->check(CLI::ExistingDirectory);
  generate_cmd->add_option("--checkpoint", checkpoint, "Generator checkpoint")->required()->check(CLI::ExistingFile);
  generate_cmd->add_option("--out", gen_out, "Output dataset directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train the main network on source domains");
  train_cmd->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--target-domain", target, "Held-out domain, excluded from sources and evaluated");
  train_cmd->add_option("--out-checkpoint", out_checkpoint, "Main network checkpoint path (default <out>/main.ckpt)");
  train_cmd->add_option("--out", out_dir, "Run directory");
  train_cmd->add_option("--variant", variant_name, "dgsense, no_dg, no_virtual, multi_modal_gen or cross_modal_gen");
  train_cmd->add_flag("--no-dg", no_dg, "Pooled baseline without episodic training or virtual data");
  train_cmd->add_flag("--no-virtual", no_virtual, "Episodic training without virtual data");

  auto* eval_cmd = app.add_subcommand("eval", "Leave-one-domain-out or k-fold evaluation, or score a checkpoint");
  eval_cmd->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--target-domain", targets, "Held-out domain (repeatable; default every domain)");
  eval_cmd->add_option("--checkpoint", checkpoint, "Score this main network instead of training")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--kfold", kfold, "Stratified in-domain k-fold instead of leave-one-domain-out");
  eval_cmd->add_option("--seeds", seeds, "Training seeds (default: the config seed)");
  eval_cmd->add_option("--variant", variant_name, "dgsense, no_dg, no_virtual, multi_modal_gen or cross_modal_gen");
  eval_cmd->add_flag("--no-dg", no_dg, "Pooled baseline without episodic training or virtual data");
  eval_cmd->add_flag("--no-virtual", no_virtual, "Episodic training without virtual data");
  eval_cmd->add_option("--out", out_dir, "Run directory");

  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep one factor under leave-one-domain-out");
  ablate_cmd->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--sweep", sweep_name, "num_domains, num_real, num_virtual or generator_variant")
      ->required();
  ablate_cmd->add_option("--grid", grid, "Grid values, comma separated")->required()->delimiter(',');
  ablate_cmd->add_option("--target-domain", targets, "Held-out domain (repeatable; default every domain)");
  ablate_cmd->add_option("--seeds", seeds, "Training seeds (default: the config seed)");
  ablate_cmd->add_option("--variant", variant_name, "Variant trained at every grid point");
  ablate_cmd->add_option("--out", out_dir, "Run directory");

  for (auto* cmd : {gen_cmd, generate_cmd, train_cmd, eval_cmd, ablate_cmd}) flags.attach(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth_spec, synth_seed, synth_out);
    if (*inspect_cmd) return run_inspect(inspect_path);
    if (*pre_cmd) return run_preprocess(pre_captures, pre_out);
    const TrainConfig cfg = flags.resolve();
    if (*gen_cmd) return run_train_gen(dataset, target, cfg, out_checkpoint, out_dir);
    if (*generate_cmd) return run_generate(dataset, checkpoint, cfg, gen_out);
    if (*train_cmd) {
      const auto variant = pick_variant(variant_name, no_dg, no_virtual);
      const fs::path ck = out_checkpoint.empty() ? fs::path(out_dir) / "main.ckpt" : fs::path(out_checkpoint);
      return run_train(dataset, target, variant, cfg, ck, out_dir);
    }
    if (*eval_cmd && !checkpoint.empty()) return run_eval_checkpoint(dataset, checkpoint, targets, out_dir);
    eval::ExperimentSpec spec;
    spec.dataset = dataset;
    spec.config = cfg;
    spec.seeds = parse_seeds(seeds, cfg);
    spec.split.target_domains = targets;
    if (*eval_cmd) {
      spec.variant = pick_variant(variant_name, no_dg, no_virtual);
      if (kfold > 0) {
        spec.split.mode = SplitMode::k_fold_in_domain;
        spec.split.k = kfold;
      }
      return run_eval(dataset, spec, out_dir);
    }
    if (*ablate_cmd) {
      spec.variant = episodic::variant_from_string(variant_name);
      return run_ablate(dataset, eval::sweep_from_string(sweep_name), grid, spec, out_dir);
    }
  } catch (const TrainingError& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTraining;
  } catch (const InvariantViolation& e) {
    std::cerr << "training failed: " << e.what() << "\n";
    return kTraining;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

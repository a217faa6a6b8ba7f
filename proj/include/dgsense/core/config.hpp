#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dgsense/core/error.hpp"
#include "dgsense/core/types.hpp"

namespace dgsense {

/// Every free coefficient of the training pipeline plus optimizer settings.
struct TrainConfig {
  // Generator objective weight on the KL term.
  double lambda_kl = 1.0;
  // Latent mixing at generation time: z~ = omega_signal * z + omega_noise * eta.
  double omega_signal = 0.8;
  double omega_noise = 0.2;
  // Weights of the domain-classifier and domain-extractor terms in the main loss.
  double theta1 = 1.0;
  double theta2 = 1.0;
  // Fusion weights for amplitude, phase and spectrogram features.
  std::array<double, 3> alpha{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  // Virtual samples per real sample.
  double virtual_ratio = 1.0;

  int epochs_domain = 12;
  int epochs_main = 12;
  int epochs_vae = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;

  std::string preset = "small";         // small | resnet18
  int feature_dim = 128;
  int latent_dim = 32;
  std::string optimizer = "adam";       // adam | sgd
  std::string generator = "cross_modal";  // cross_modal | multi_modal | single_modal
  std::string base_modality = "amplitude_series";
  std::string generation_latent = "mean";  // mean | sample
  std::string domain_order = "round_robin";  // round_robin | shuffled
  bool virtual_in_domain_nets = true;

  void validate() const {
    auto finite = [](double v, const char* name) {
      if (!std::isfinite(v)) {
        throw ArgumentError(std::string("config value '") + name +
                            "' is not finite");
      }
    };
    finite(lambda_kl, "lambda_kl");
    finite(omega_signal, "omega_signal");
    finite(omega_noise, "omega_noise");
    finite(theta1, "theta1");
    finite(theta2, "theta2");
    finite(virtual_ratio, "virtual_ratio");
    finite(learning_rate, "learning_rate");
    for (double a : alpha) finite(a, "alpha");
    if (lambda_kl < 0 || theta1 < 0 || theta2 < 0 || virtual_ratio < 0) {
      throw ArgumentError("lambda_kl, theta1, theta2 and virtual_ratio must be >= 0");
    }
    for (double a : alpha) {
      if (a < 0) throw ArgumentError("alpha weights must be >= 0");
    }
    if (!(omega_signal + omega_noise > 0)) {
      throw ArgumentError("omega_signal + omega_noise must be positive");
    }
    if (epochs_domain < 0 || epochs_main < 0 || epochs_vae < 0) {
      throw ArgumentError("epoch counts must be non-negative");
    }
    if (batch_size < 1) throw ArgumentError("batch_size must be positive");
    if (!(learning_rate > 0)) throw ArgumentError("learning_rate must be positive");
    if (feature_dim < 1 || latent_dim < 1) {
      throw ArgumentError("feature_dim and latent_dim must be positive");
    }
    auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed,
                     const char* name) {
      for (const char* a : allowed) {
        if (v == a) return;
      }
      throw ArgumentError(std::string("invalid value '") + v + "' for " + name);
    };
    one_of(preset, {"small", "resnet18"}, "preset");
    one_of(optimizer, {"adam", "sgd"}, "optimizer");
    one_of(generator, {"cross_modal", "multi_modal", "single_modal"}, "generator");
    one_of(generation_latent, {"mean", "sample"}, "generation_latent");
    one_of(domain_order, {"round_robin", "shuffled"}, "domain_order");
    (void)modality_from_string(base_modality);
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["lambda_kl"] = c.lambda_kl;
  j["omega_signal"] = c.omega_signal;
  j["omega_noise"] = c.omega_noise;
  j["theta1"] = c.theta1;
  j["theta2"] = c.theta2;
  j["alpha"] = c.alpha;
  j["virtual_ratio"] = c.virtual_ratio;
  j["epochs_domain"] = c.epochs_domain;
  j["epochs_main"] = c.epochs_main;
  j["epochs_vae"] = c.epochs_vae;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["seed"] = c.seed;
  j["preset"] = c.preset;
  j["feature_dim"] = c.feature_dim;
  j["latent_dim"] = c.latent_dim;
  j["optimizer"] = c.optimizer;
  j["generator"] = c.generator;
  j["base_modality"] = c.base_modality;
  j["generation_latent"] = c.generation_latent;
  j["domain_order"] = c.domain_order;
  j["virtual_in_domain_nets"] = c.virtual_in_domain_nets;
  return j;
}

/// Applies the keys present in `j` on top of `base`. Unknown keys are
/// rejected so typos never silently fall back to defaults.
inline TrainConfig overlay_config(TrainConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "lambda_kl") base.lambda_kl = value.get<double>();
      else if (key == "omega_signal") base.omega_signal = value.get<double>();
      else if (key == "omega_noise") base.omega_noise = value.get<double>();
      else if (key == "theta1") base.theta1 = value.get<double>();
      else if (key == "theta2") base.theta2 = value.get<double>();
      else if (key == "alpha") base.alpha = value.get<std::array<double, 3>>();
      else if (key == "virtual_ratio") base.virtual_ratio = value.get<double>();
      else if (key == "epochs_domain") base.epochs_domain = value.get<int>();
      else if (key == "epochs_main") base.epochs_main = value.get<int>();
      else if (key == "epochs_vae") base.epochs_vae = value.get<int>();
      else if (key == "batch_size") base.batch_size = value.get<int>();
      else if (key == "learning_rate") base.learning_rate = value.get<double>();
      else if (key == "seed") base.seed = value.get<std::uint64_t>();
      else if (key == "preset") base.preset = value.get<std::string>();
      else if (key == "feature_dim") base.feature_dim = value.get<int>();
      else if (key == "latent_dim") base.latent_dim = value.get<int>();
      else if (key == "optimizer") base.optimizer = value.get<std::string>();
      else if (key == "generator") base.generator = value.get<std::string>();
      else if (key == "base_modality") base.base_modality = value.get<std::string>();
      else if (key == "generation_latent") base.generation_latent = value.get<std::string>();
      else if (key == "domain_order") base.domain_order = value.get<std::string>();
      else if (key == "virtual_in_domain_nets") base.virtual_in_domain_nets = value.get<bool>();
      else throw ArgumentError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("invalid config value: ") + e.what());
  }
  base.validate();
  return base;
}

inline TrainConfig config_from_json(const nlohmann::json& j) {
  return overlay_config(TrainConfig{}, j);
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("malformed JSON in " + path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace dgsense

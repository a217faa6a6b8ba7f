#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/binary_io.hpp"
#include "dgsense/core/config.hpp"
#include "dgsense/core/error.hpp"
#include "dgsense/core/types.hpp"

namespace dgsense {

namespace fs = std::filesystem;

inline constexpr int kDatasetFormatVersion = 1;

inline std::string tensor_bytes(const Tensor<float>& t) {
  std::string out;
  append_f32_le(out, t.values());
  return out;
}

/// Content digest of a sample: SHA-256 over its tensors in modality order.
inline std::string sample_digest(const Sample& s) {
  std::string bytes;
  for (const auto& [kind, t] : s.tensors) {
    bytes += to_string(kind);
    append_f32_le(bytes, t.values());
  }
  return sha256_hex(bytes);
}

inline fs::path sample_file(const fs::path& root, const std::string& domain,
                            const std::string& label, const std::string& id,
                            ModalityKind kind) {
  return root / domain / label /
         (id + "." + std::string(to_string(kind)) + ".f32");
}

inline nlohmann::json manifest_json(const SourceSet& set) {
  nlohmann::json j;
  j["version"] = kDatasetFormatVersion;
  j["labels"] = set.label_names;
  j["modalities"] = nlohmann::json::array();
  for (const auto& m : set.modalities) {
    j["modalities"].push_back({{"kind", to_string(m.kind)}, {"shape", m.shape}});
  }
  j["domains"] = nlohmann::json::array();
  for (const auto& d : set.domains) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : d.samples) {
      samples.push_back({{"id", s.sample_id}, {"label", set.label_names[s.label]}});
    }
    j["domains"].push_back(
        {{"id", d.domain_id}, {"num_samples", d.size()}, {"samples", samples}});
  }
  return j;
}

/// Writes manifest.json and one raw float32 file per (sample, modality).
inline void save_dataset(const SourceSet& set, const fs::path& root) {
  set.validate();
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());
  for (const auto& d : set.domains) {
    for (const auto& label : set.label_names) {
      fs::create_directories(root / d.domain_id / label, ec);
      if (ec) {
        throw IoError("cannot create " + (root / d.domain_id / label).string() +
                      ": " + ec.message());
      }
    }
    for (const auto& s : d.samples) {
      for (const auto& m : set.modalities) {
        write_file_bytes(sample_file(root, d.domain_id, set.label_names[s.label],
                                     s.sample_id, m.kind),
                         tensor_bytes(s.tensor(m.kind)));
      }
    }
  }
  write_json_file((root / "manifest.json").string(), manifest_json(set));
}

namespace detail {

inline std::vector<std::pair<std::string, std::string>> scan_domain_samples(
    const fs::path& domain_dir, const std::vector<std::string>& labels,
    ModalityKind probe) {
  std::vector<std::pair<std::string, std::string>> found;
  const std::string suffix = "." + std::string(to_string(probe)) + ".f32";
  for (const auto& label : labels) {
    const fs::path dir = domain_dir / label;
    if (!fs::is_directory(dir)) continue;
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        ids.push_back(name.substr(0, name.size() - suffix.size()));
      }
    }
    std::sort(ids.begin(), ids.end());
    for (auto& id : ids) found.emplace_back(std::move(id), label);
  }
  return found;
}

inline Tensor<float> read_sample_tensor(const fs::path& file, const Shape& shape) {
  if (!fs::exists(file)) {
    throw CorruptionError("missing sample file " + file.string());
  }
  const std::string bytes = read_file_bytes(file);
  const std::size_t expected = shape_size(shape);
  if (bytes.size() % 4 != 0 || bytes.size() / 4 != expected) {
    throw CorruptionError(file.string() + ": declared shape " +
                          shape_string(shape) + " needs " +
                          std::to_string(expected) + " floats, file holds " +
                          std::to_string(bytes.size() / 4) +
                          (bytes.size() % 4 ? " (plus a partial value)" : ""));
  }
  Tensor<float> t(shape, decode_f32_le(bytes));
  if (!t.all_finite()) {
    throw DataError(file.string() + " contains NaN or Inf");
  }
  return t;
}

}  // namespace detail

inline SourceSet load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw FormatError("no manifest.json under " + root.string());
  }
  nlohmann::json j;
  try {
    j = read_json_file(manifest_path.string());
  } catch (const IoError& e) {
    throw FormatError(e.what());
  }
  SourceSet set;
  try {
    if (j.at("version").get<int>() != kDatasetFormatVersion) {
      throw FormatError("unsupported dataset version " + j.at("version").dump());
    }
    set.label_names = j.at("labels").get<std::vector<std::string>>();
    for (const auto& m : j.at("modalities")) {
      set.modalities.push_back({modality_from_string(m.at("kind").get<std::string>()),
                                m.at("shape").get<Shape>()});
    }
    if (set.modalities.empty()) throw FormatError("manifest declares no modalities");
    std::map<std::string, int> label_index;
    for (std::size_t i = 0; i < set.label_names.size(); ++i) {
      label_index[set.label_names[i]] = static_cast<int>(i);
    }
    for (const auto& dj : j.at("domains")) {
      DomainDataset d;
      d.domain_id = dj.at("id").get<std::string>();
      validate_identifier(d.domain_id, "domain");
      const auto declared = dj.at("num_samples").get<std::size_t>();
      std::vector<std::pair<std::string, std::string>> entries;
      if (dj.contains("samples")) {
        for (const auto& sj : dj.at("samples")) {
          entries.emplace_back(sj.at("id").get<std::string>(),
                               sj.at("label").get<std::string>());
        }
      } else {
        entries = detail::scan_domain_samples(root / d.domain_id, set.label_names,
                                              set.modalities.front().kind);
      }
      if (entries.size() != declared) {
        throw CorruptionError("domain '" + d.domain_id + "' declares " +
                              std::to_string(declared) + " samples, found " +
                              std::to_string(entries.size()));
      }
      for (const auto& [id, label] : entries) {
        validate_identifier(id, "sample");
        auto li = label_index.find(label);
        if (li == label_index.end()) {
          throw FormatError("sample " + id + " uses undeclared label " + label);
        }
        Sample s;
        s.sample_id = id;
        s.domain_id = d.domain_id;
        s.label = li->second;
        for (const auto& m : set.modalities) {
          s.tensors.emplace(m.kind, detail::read_sample_tensor(
                                        sample_file(root, d.domain_id, label, id, m.kind),
                                        m.shape));
        }
        d.samples.push_back(std::move(s));
      }
      set.domains.push_back(std::move(d));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("malformed manifest " + manifest_path.string() + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw FormatError(std::string("invalid manifest: ") + e.what());
  }
  set.validate();
  return set;
}

}  // namespace dgsense

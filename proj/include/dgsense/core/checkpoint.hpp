#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dgsense/core/binary_io.hpp"
#include "dgsense/core/error.hpp"
#include "dgsense/core/tensor.hpp"

namespace dgsense {

inline constexpr int kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

/// On disk: one line of JSON (version, module, config echo, parameter
/// manifest) then the float32 little-endian parameter blocks in manifest order.
struct Checkpoint {
  std::string module;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
  std::vector<NamedTensor> params;

  const Tensor<float>& param(const std::string& name) const {
    for (const auto& p : params) {
      if (p.name == name) return p.value;
    }
    throw FormatError("checkpoint has no parameter '" + name + "'");
  }
};

inline std::string encode_checkpoint(const Checkpoint& ck) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["module"] = ck.module;
  header["config"] = ck.config;
  header["extra"] = ck.extra;
  header["parameters"] = nlohmann::json::array();
  for (const auto& p : ck.params) {
    header["parameters"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  }
  std::string out = header.dump();
  out.push_back('\n');
  for (const auto& p : ck.params) append_f32_le(out, p.value.values());
  return out;
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos) {
    throw FormatError("checkpoint header is not terminated");
  }
  Checkpoint ck;
  try {
    const auto header = nlohmann::json::parse(bytes.substr(0, newline));
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version");
    }
    ck.module = header.at("module").get<std::string>();
    ck.config = header.at("config");
    if (header.contains("extra")) ck.extra = header.at("extra");
    std::size_t offset = newline + 1;
    for (const auto& pj : header.at("parameters")) {
      const auto shape = pj.at("shape").get<Shape>();
      const std::size_t n = shape_size(shape) * 4;
      if (offset + n > bytes.size()) {
        throw CorruptionError("checkpoint truncated in parameter " +
                              pj.at("name").get<std::string>());
      }
      ck.params.push_back({pj.at("name").get<std::string>(),
                           Tensor<float>(shape, decode_f32_le(bytes.substr(offset, n)))});
      offset += n;
    }
    if (offset != bytes.size()) {
      throw CorruptionError("checkpoint has trailing bytes");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
  return ck;
}

/// Creates missing parent directories.
inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  write_file_bytes(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

}  // namespace dgsense

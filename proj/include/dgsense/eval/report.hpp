#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dgsense/core/error.hpp"
#include "dgsense/eval/experiment.hpp"

namespace dgsense::eval {

namespace fs = std::filesystem;

inline constexpr int kReportVersion = 1;

/// Wall-clock times are kept out of reports so repeated runs compare equal;
/// they go to timing_json instead.
inline nlohmann::json to_json(const FoldReport& f) {
  nlohmann::json j;
  j["target"] = f.target;
  j["seed"] = f.seed;
  j["metrics"] = to_json(f.metrics);
  j["per_domain"] = nlohmann::json::object();
  for (const auto& [id, m] : f.per_domain) j["per_domain"][id] = to_json(m);
  j["train_samples"] = f.train_samples;
  j["virtual_samples"] = f.virtual_samples;
  j["test_samples"] = f.test_samples;
  j["leaked_samples"] = f.leaked_samples;
  return j;
}

inline nlohmann::json report_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["version"] = kReportVersion;
  j["spec"] = to_json(r.spec);
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) j["folds"].push_back(to_json(f));
  j["aggregate"] = to_json(r.aggregate);
  return j;
}

inline nlohmann::json timing_json(const ExperimentReport& r) {
  nlohmann::json j;
  j["total_s"] = r.runtime_s;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) j["folds"].push_back({{"target", f.target}, {"seed", f.seed}, {"runtime_s", f.runtime_s}});
  return j;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// One line per fold plus a final "aggregate" line.
inline std::string report_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "target,seed,accuracy,precision,recall,test_samples,leaked_samples\n";
  for (const auto& f : r.folds) {
    os << f.target << ',' << f.seed << ',' << format_number(f.metrics.accuracy) << ','
       << format_number(f.metrics.precision) << ',' << format_number(f.metrics.recall) << ',' << f.test_samples
       << ',' << f.leaked_samples << '\n';
  }
  os << "aggregate,," << format_number(r.aggregate.accuracy) << ',' << format_number(r.aggregate.precision) << ','
     << format_number(r.aggregate.recall) << ',' << r.aggregate.total() << ",\n";
  return os.str();
}

inline nlohmann::json ablation_json(const AblationTable& t) {
  nlohmann::json j;
  j["version"] = kReportVersion;
  j["sweep"] = to_string(t.sweep);
  j["spec"] = to_json(t.spec);
  j["rows"] = nlohmann::json::array();
  for (const auto& r : t.rows) {
    j["rows"].push_back({{"value", r.value}, {"mean_accuracy", r.mean_accuracy}, {"seed_accuracy", r.seed_accuracy}});
  }
  return j;
}

inline nlohmann::json ablation_timing_json(const AblationTable& t) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : t.rows) j.push_back({{"value", r.value}, {"runtime_s", r.runtime_s}});
  return j;
}

inline std::string ablation_csv(const AblationTable& t) {
  std::ostringstream os;
  os << to_string(t.sweep) << ",mean_accuracy,runtime_s\n";
  for (const auto& r : t.rows) {
    os << r.value << ',' << format_number(r.mean_accuracy) << ',' << format_number(r.runtime_s) << '\n';
  }
  return os.str();
}

/// Writes `text` to `path`, creating parent directories.
inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace dgsense::eval

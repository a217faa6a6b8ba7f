#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <string>

#include "dgsense/core/dataset_io.hpp"
#include "dgsense/core/types.hpp"

namespace dgsense {

/// Records the content digest of every sample that enters a training batch,
/// grouped by stage ("generator", "domain/<id>", "main"). Used to audit that
/// held-out data never reaches training.
class BatchLog {
 public:
  void record(const std::string& stage, std::span<const Sample* const> batch) {
    std::lock_guard lock(mutex_);
    auto& seen = stages_[stage];
    for (const Sample* s : batch) seen.insert(sample_digest(*s));
    batches_[stage] += 1;
  }

  const std::map<std::string, std::set<std::string>>& stages() const { return stages_; }
  std::size_t batches(const std::string& stage) const {
    auto it = batches_.find(stage);
    return it == batches_.end() ? 0 : it->second;
  }

  /// Number of `digests` found in any stage.
  std::size_t count_present(const std::set<std::string>& digests) const {
    std::size_t hits = 0;
    for (const auto& [stage, seen] : stages_) {
      for (const auto& d : digests) hits += seen.count(d);
    }
    return hits;
  }

  void merge(const BatchLog& other) {
    std::lock_guard lock(mutex_);
    for (const auto& [stage, seen] : other.stages_) stages_[stage].insert(seen.begin(), seen.end());
    for (const auto& [stage, n] : other.batches_) batches_[stage] += n;
  }

 private:
  std::mutex mutex_;
  std::map<std::string, std::set<std::string>> stages_;
  std::map<std::string, std::size_t> batches_;
};

}  // namespace dgsense

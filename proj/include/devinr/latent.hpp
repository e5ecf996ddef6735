#pragma once

#include <map>
#include <string>
#include <vector>

#include "devinr/errors.hpp"

namespace devinr {

// Latent vectors, keyed per subject (SSL) or per scan, plus the global
// latent used by the stochastic global-latent augmentation. New keys are
// created zero-initialized on first access. Keys are kept in a sorted map so
// serialization order is deterministic.
struct LatentTable {
  int latent_dim = 0;
  bool per_subject = false;  // true: key by subject id (SSL); false: per scan
  std::map<std::string, std::vector<float>> entries;
  std::vector<float> global;

  explicit LatentTable(int dim = 0, bool subject_keyed = false)
      : latent_dim(dim),
        per_subject(subject_keyed),
        global(static_cast<std::size_t>(dim), 0.0f) {}

  // Per-scan keys are namespaced by subject so scan ids only need to be
  // unique within a subject.
  std::string key_for(const std::string& subject_id,
                      const std::string& scan_id) const {
    return per_subject ? subject_id : subject_id + "/" + scan_id;
  }

  std::vector<float>& resolve(const std::string& subject_id,
                              const std::string& scan_id) {
    auto [it, inserted] = entries.try_emplace(
        key_for(subject_id, scan_id),
        std::vector<float>(static_cast<std::size_t>(latent_dim), 0.0f));
    return it->second;
  }

  void validate() const {
    if (static_cast<int>(global.size()) != latent_dim)
      throw DataError("LatentTable: global latent has wrong length");
    for (const auto& [k, v] : entries)
      if (static_cast<int>(v.size()) != latent_dim)
        throw DataError("LatentTable: entry '" + k + "' has wrong length");
  }
};

}  // namespace devinr

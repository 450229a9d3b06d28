#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace cstrip {

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  /// subject id -> fold, in the order the ids were given.
  std::vector<std::pair<std::string, int>> assignments;

  int fold_of(const std::string& subject_id) const;
  std::vector<std::string> members(int fold) const;
  std::vector<std::string> complement(int fold) const;
};

/// Seeded shuffle, then round-robin assignment. Throws ValueError when k is
/// outside [1, n] or ids repeat.
FoldPlan kfold_split(const std::vector<std::string>& subject_ids, int k, std::uint64_t seed);

void to_json(nlohmann::json& j, const FoldPlan& plan);
void from_json(const nlohmann::json& j, FoldPlan& plan);

void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path);
FoldPlan load_fold_plan(const std::filesystem::path& path);

}  // namespace cstrip

#include "contextstrip/data/folds.hpp"

#include <fstream>
#include <set>

#include "contextstrip/core/error.hpp"
#include "contextstrip/core/rng.hpp"

namespace cstrip {

int FoldPlan::fold_of(const std::string& subject_id) const {
  for (const auto& [id, fold] : assignments) {
    if (id == subject_id) return fold;
  }
  throw ValueError("fold plan has no subject '" + subject_id + "'");
}

std::vector<std::string> FoldPlan::members(int fold) const {
  if (fold < 0 || fold >= k) throw ValueError("fold " + std::to_string(fold) + " outside [0, k)");
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments) {
    if (f == fold) out.push_back(id);
  }
  return out;
}

std::vector<std::string> FoldPlan::complement(int fold) const {
  if (fold < 0 || fold >= k) throw ValueError("fold " + std::to_string(fold) + " outside [0, k)");
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments) {
    if (f != fold) out.push_back(id);
  }
  return out;
}

FoldPlan kfold_split(const std::vector<std::string>& subject_ids, int k, std::uint64_t seed) {
  const auto n = static_cast<int>(subject_ids.size());
  if (k < 1 || k > n) {
    throw ValueError("kfold_split: k=" + std::to_string(k) + " needs 1 <= k <= " +
                     std::to_string(n) + " subjects");
  }
  if (std::set<std::string>(subject_ids.begin(), subject_ids.end()).size() != subject_ids.size()) {
    throw ValueError("kfold_split: subject ids are not unique");
  }
  std::vector<std::size_t> order(subject_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<int> fold(subject_ids.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  for (std::size_t i = 0; i < subject_ids.size(); ++i) {
    plan.assignments.emplace_back(subject_ids[i], fold[i]);
  }
  return plan;
}

void to_json(nlohmann::json& j, const FoldPlan& plan) {
  nlohmann::json assignments = nlohmann::json::object();
  nlohmann::json order = nlohmann::json::array();
  for (const auto& [id, fold] : plan.assignments) {
    assignments[id] = fold;
    order.push_back(id);
  }
  j = nlohmann::json{{"k", plan.k}, {"seed", plan.seed}, {"subjects", order},
                     {"assignments", assignments}};
}

void from_json(const nlohmann::json& j, FoldPlan& plan) {
  plan.k = j.at("k").get<int>();
  plan.seed = j.at("seed").get<std::uint64_t>();
  plan.assignments.clear();
  const auto& a = j.at("assignments");
  for (const auto& id : j.at("subjects")) {
    const auto name = id.get<std::string>();
    const int fold = a.at(name).get<int>();
    if (fold < 0 || fold >= plan.k) {
      throw FormatError("fold plan: subject '" + name + "' has fold " + std::to_string(fold) +
                        " outside [0, " + std::to_string(plan.k) + ")");
    }
    plan.assignments.emplace_back(name, fold);
  }
}

void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create '" + path.string() + "'");
  os << nlohmann::json(plan).dump(2) << '\n';
}

FoldPlan load_fold_plan(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(is).get<FoldPlan>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace cstrip

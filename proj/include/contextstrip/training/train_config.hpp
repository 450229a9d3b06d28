#pragma once

#include <cstdint>

#include "contextstrip/losses/losses.hpp"
#include "contextstrip/network/arch_config.hpp"
#include "json.hpp"

namespace cstrip {

struct TrainConfig {
  double lr0 = 0.01;
  double poly_power = 0.9;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  int epochs = 20;
  int batch_size = 4;
  double dropout = 0.1;
  std::uint64_t seed = 0;
  /// Coronal slices drawn per subject and epoch; 0 uses every slice.
  int slices_per_subject = 0;
  ArchConfig arch = ArchConfig::desk_scale();
  loss::LossConfig loss;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

}  // namespace cstrip

namespace cstrip::loss {
void to_json(nlohmann::json& j, const LossConfig& cfg);
void from_json(const nlohmann::json& j, LossConfig& cfg);
}  // namespace cstrip::loss

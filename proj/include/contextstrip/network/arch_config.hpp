#pragma once

#include <cstdint>

#include "json.hpp"

namespace cstrip {

/// Architecture hyperparameters. Defaults describe the full-size network
/// (256 x 256 coronal slices with a 10-slice sub-volume).
struct ArchConfig {
  int stages = 4;
  /// Channels after the first encoder stage; stage s carries base << s.
  int base_channels = 16;
  /// Dense-block growth rate; 0 means base_channels / 2.
  int growth = 0;
  int block_layers = 2;
  int codewords = 16;
  /// Slices in the spatial-encoder sub-volume.
  int depth = 10;
  int classes = 2;
  int input_hw = 256;

  int growth_rate() const { return growth > 0 ? growth : base_channels / 2; }
  std::int64_t stage_channels(int stage) const {
    return static_cast<std::int64_t>(base_channels) << stage;
  }
  std::int64_t bottleneck_channels() const { return stage_channels(stages - 1); }
  int bottleneck_extent() const { return input_hw >> stages; }

  /// Throws ValueError naming the offending field.
  void validate() const;

  /// Default network at 64 x 64 in-plane, used for phantom-scale runs.
  static ArchConfig desk_scale();

  bool operator==(const ArchConfig&) const = default;
};

void to_json(nlohmann::json& j, const ArchConfig& cfg);
void from_json(const nlohmann::json& j, ArchConfig& cfg);

}  // namespace cstrip

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "contextstrip/network/arch_config.hpp"

namespace cstrip::net {

struct ShapeAuditRow {
  std::string path;  // "enc2d", "enc3d", "fuse", "dec"
  int stage = 0;
  std::int64_t in_channels = 0;
  /// Channels leaving the dense block (0 where there is none).
  std::int64_t block_channels = 0;
  std::int64_t out_channels = 0;
  int extent = 0;
};

struct ShapeAudit {
  std::vector<ShapeAuditRow> rows;
  std::int64_t trainable_parameters = 0;
  std::int64_t buffer_values = 0;
};

/// Channel and extent bookkeeping for every stage, derived arithmetically
/// from the config (no tensors are allocated).
ShapeAudit audit_shapes(const ArchConfig& cfg);

std::string format_audit(const ShapeAudit& audit);

}  // namespace cstrip::net

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace cstrip {

struct SelftestRow {
  std::string name;
  double value = 0.0;
  double expected = 0.0;
  /// Absolute tolerance; 0 demands exact equality.
  double tolerance = 0.0;

  bool passed() const;
};

struct SelftestResult {
  std::vector<SelftestRow> rows;

  bool passed() const;
};

/// Closed-form loss values on perfect and uniform predictions, metric
/// recounts on random masks, and the two limiting cases of context scaling.
SelftestResult run_selftest(std::uint64_t seed = 0, int metric_trials = 1000);

std::string format_selftest(const SelftestResult& result);
void to_json(nlohmann::json& j, const SelftestResult& result);

}  // namespace cstrip

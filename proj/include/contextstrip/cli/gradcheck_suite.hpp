#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace cstrip {

struct GradcheckRow {
  std::string name;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  /// Worst coordinate, "leaf[index]", with both derivative estimates.
  std::string worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  /// Draws replaced because the probe straddled a relu or pooling kink.
  std::size_t skipped_kinks = 0;

  bool passed() const { return max_relative_error < tolerance; }
};

struct GradcheckSuiteResult {
  /// One row per differentiable op and loss term.
  std::vector<GradcheckRow> ops;
  /// Total loss through the whole network (input_hw 32, stages 3).
  GradcheckRow full_model;
  double seconds = 0.0;

  bool passed() const;
};

inline constexpr double kOpGradTolerance = 1e-6;
inline constexpr double kModelGradTolerance = 1e-5;

/// Double-precision central-difference checks of every op on random inputs
/// (several draws per op) and of the total loss through the full model.
GradcheckSuiteResult run_gradcheck_suite(std::uint64_t seed = 0, bool include_model = true);

std::string format_gradcheck(const GradcheckSuiteResult& result);
void to_json(nlohmann::json& j, const GradcheckSuiteResult& result);

}  // namespace cstrip

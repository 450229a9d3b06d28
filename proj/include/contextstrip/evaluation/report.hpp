#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contextstrip/evaluation/metrics.hpp"
#include "json.hpp"

namespace cstrip {

struct SubjectScore {
  std::string subject_id;
  /// Held-out fold, or -1 outside cross-validation.
  int fold = -1;
  ConfusionCounts counts;
  std::optional<double> dice;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

/// Arithmetic means over the defined values; undefined values are left out
/// and counted.
struct MetricMeans {
  int subjects = 0;
  std::optional<double> dice;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  int dice_excluded = 0;
  int sensitivity_excluded = 0;
  int specificity_excluded = 0;
};

struct MetricsReport {
  /// "crossval <k>" or "transfer <source>-><target>".
  std::string protocol;
  std::string method = "contextstrip";
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<SubjectScore> subjects;
  /// One entry per fold for cross-validation, empty otherwise.
  std::vector<MetricMeans> folds;
  MetricMeans overall;
};

std::string crossval_tag(int k);
std::string transfer_tag(const std::string& source, const std::string& target);

SubjectScore score_subject(const std::string& subject_id, int fold,
                           std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);
MetricMeans mean_scores(std::span<const SubjectScore> scores);

/// Fills per-fold (k > 0) and overall means from `subjects`.
MetricsReport make_report(std::string protocol, std::string dataset, std::uint64_t seed,
                          std::vector<SubjectScore> subjects, int k = 0);

/// Percentage with two decimals, or "n/a" for an undefined value.
std::string format_percent(const std::optional<double>& value);

/// Aligned plain-text table: Method | Dice | Sensitivity | Specificity with
/// one row of overall means, followed by per-fold and per-subject sections.
std::string format_table(const MetricsReport& report);

void to_json(nlohmann::json& j, const MetricsReport& report);
void from_json(const nlohmann::json& j, MetricsReport& report);

/// Writes `<stem>.json` and `<stem>.txt`.
void write_report(const MetricsReport& report, const std::filesystem::path& stem);

}  // namespace cstrip

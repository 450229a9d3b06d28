#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace cstrip {

/// Voxel counts with brain (label 1) as the positive class.
struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& other);
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws ShapeError when the sizes differ and ValueError for a label
/// outside {0, 1}.
ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth);

/// 2tp / (2tp + fp + fn); empty when the denominator is zero.
std::optional<double> dice_score(const ConfusionCounts& c);
/// tp / (tp + fn); empty when there are no positives in the truth.
std::optional<double> sensitivity(const ConfusionCounts& c);
/// tn / (tn + fp); empty when there are no negatives in the truth.
std::optional<double> specificity(const ConfusionCounts& c);

}  // namespace cstrip

#include "contextstrip/evaluation/metrics.hpp"

#include <string>

#include "contextstrip/core/error.hpp"

namespace cstrip {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& other) {
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("confusion: prediction has " + std::to_string(pred.size()) +
                     " voxels, truth has " + std::to_string(truth.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = pred[i], t = truth[i];
    if (p > 1 || t > 1) {
      throw ValueError("confusion: non-binary label at voxel " + std::to_string(i));
    }
    if (p) {
      t ? ++c.tp : ++c.fp;
    } else {
      t ? ++c.fn : ++c.tn;
    }
  }
  return c;
}

namespace {

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> dice_score(const ConfusionCounts& c) {
  return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
}

std::optional<double> sensitivity(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }

std::optional<double> specificity(const ConfusionCounts& c) { return ratio(c.tn, c.tn + c.fp); }

}  // namespace cstrip

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "contextstrip/autodiff/graph.hpp"
#include "contextstrip/autodiff/tensor.hpp"

namespace cstrip {

/// Builds a scalar loss on the given graph from the current leaf values.
/// Must be a pure function of those values (re-seed any dropout stream
/// inside the builder).
template <typename Dtype>
using LossBuilder = std::function<Tensor<Dtype>(Graph<Dtype>&)>;

template <typename Dtype>
using NamedTensors = std::vector<std::pair<std::string, Tensor<Dtype>>>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Coordinates compared; all of them when this exceeds the leaf total.
  std::size_t samples = 64;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Sampled coordinates dropped because x-h and x+h fall in different
  /// smooth pieces (a relu sign or pooling argmax flips), where central
  /// differences do not estimate the derivative.
  std::size_t skipped_kinks = 0;
  std::string worst_leaf;
  std::int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares backward() gradients with central differences
/// (f(x+h) - f(x-h)) / 2h on randomly sampled leaf coordinates. The error of
/// one coordinate is |a - n| / max(|a|, |n|, 1e-8); the report carries the
/// worst one. A coordinate whose perturbations change the branch fingerprint
/// is replaced by another draw. Throws NumericError if the loss is not finite.
template <typename Dtype>
GradCheckReport grad_check(const LossBuilder<Dtype>& build, const NamedTensors<Dtype>& leaves,
                           const GradCheckOptions& options = {});

}  // namespace cstrip

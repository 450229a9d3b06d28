#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "contextstrip/autodiff/graph.hpp"
#include "contextstrip/autodiff/tensor.hpp"

namespace cstrip::loss {

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDiceEps = 1e-7;

struct LossConfig {
  /// Weight of the class-presence term.
  double lambda = 0.1;
  /// Boundary emphasis w0 of the optional pixel weight map; 0 keeps the map
  /// uniform.
  double boundary_w0 = 0.0;
  double boundary_sigma = 5.0;

  void validate() const;
  bool operator==(const LossConfig&) const = default;
};

struct LossBreakdown {
  double ce = 0.0;
  double dice = 0.0;
  double sec = 0.0;
  double total = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

/// Graph values of the three terms and their weighted sum.
template <typename Dtype>
struct LossTerms {
  Tensor<Dtype> ce;
  Tensor<Dtype> dice;
  Tensor<Dtype> sec;
  Tensor<Dtype> total;

  LossBreakdown breakdown() const;
};

/// -sum(w * target * log(max(p, 1e-12))) / (N*H*W). `weights` may be an
/// undefined tensor (uniform 1) or a positive [N,H,W] map.
template <typename Dtype>
Tensor<Dtype> cross_entropy(Graph<Dtype>& g, const Tensor<Dtype>& probs,
                            const Tensor<Dtype>& target, const Tensor<Dtype>& weights = {});

/// Mean over classes of -2 sum(p g) / (sum p^2 + sum g^2 + 1e-7), with the
/// sums pooled over the whole batch.
template <typename Dtype>
Tensor<Dtype> dice(Graph<Dtype>& g, const Tensor<Dtype>& probs, const Tensor<Dtype>& target);

/// Binary cross-entropy of class-presence probabilities [N,C] against
/// indicators y, averaged over N and C.
template <typename Dtype>
Tensor<Dtype> sec(Graph<Dtype>& g, const Tensor<Dtype>& class_probs, const Tensor<Dtype>& y);

/// (ce + dice) + lambda * sec on the graph.
template <typename Dtype>
LossTerms<Dtype> total_loss(Graph<Dtype>& g, const Tensor<Dtype>& ce, const Tensor<Dtype>& dice,
                            const Tensor<Dtype>& sec, double lambda);

/// Same combination on plain numbers.
LossBreakdown total_loss(double ce, double dice, double sec, double lambda);

/// y_i = 1 iff class i labels at least one pixel. Throws ValueError on a
/// label outside [0, classes).
std::vector<std::uint8_t> class_presence_labels(std::span<const std::uint8_t> labels, int classes);

/// One-hot encoding of `labels` laid out [N,H,W] into a [N,C,H,W] tensor.
template <typename Dtype>
Tensor<Dtype> one_hot(std::span<const std::uint8_t> labels, std::int64_t batch, int classes,
                      std::int64_t height, std::int64_t width);

/// 1 + w0 * exp(-d^2 / (2 sigma^2)) where d is the Euclidean distance from a
/// pixel to the nearest pixel on a label boundary of the [H,W] grid.
std::vector<double> boundary_weight_map(std::span<const std::uint8_t> labels, std::int64_t height,
                                        std::int64_t width, double w0, double sigma);

}  // namespace cstrip::loss

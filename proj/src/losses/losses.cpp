#include "contextstrip/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/core/accumulate.hpp"
#include "contextstrip/core/error.hpp"

namespace cstrip::loss {

namespace {

template <typename Dtype>
void check_pair(const Tensor<Dtype>& probs, const Tensor<Dtype>& target, const char* op) {
  if (probs.ndim() != 4) {
    throw ShapeError(std::string(op) + ": probs must be [N,C,H,W], got " +
                     shape_str(probs.shape()));
  }
  if (probs.shape() != target.shape()) {
    throw ShapeError(std::string(op) + ": target " + shape_str(target.shape()) +
                     " does not match probs " + shape_str(probs.shape()));
  }
}

template <typename Dtype>
void check_one_hot(const Tensor<Dtype>& target) {
  const std::int64_t N = target.dim(0), C = target.dim(1);
  const std::int64_t P = target.dim(2) * target.dim(3);
  const auto t = target.data();
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t i = 0; i < P; ++i) {
      int ones = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        const Dtype v = t[static_cast<std::size_t>((n * C + c) * P + i)];
        if (v == Dtype(1)) {
          ++ones;
        } else if (v != Dtype(0)) {
          ones = -1;
          break;
        }
      }
      if (ones != 1) {
        throw ValueError("cross_entropy: target is not one-hot at item " + std::to_string(n) +
                         ", pixel " + std::to_string(i));
      }
    }
  }
}

}  // namespace

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ValueError("loss.lambda must be >= 0");
  if (!(boundary_w0 >= 0.0)) throw ValueError("loss.boundary_w0 must be >= 0");
  if (!(boundary_sigma > 0.0)) throw ValueError("loss.boundary_sigma must be > 0");
}

template <typename Dtype>
LossBreakdown LossTerms<Dtype>::breakdown() const {
  return LossBreakdown{static_cast<double>(ce.item()), static_cast<double>(dice.item()),
                       static_cast<double>(sec.item()), static_cast<double>(total.item())};
}

template <typename Dtype>
Tensor<Dtype> cross_entropy(Graph<Dtype>& g, const Tensor<Dtype>& probs,
                            const Tensor<Dtype>& target, const Tensor<Dtype>& weights) {
  check_pair(probs, target, "cross_entropy");
  check_one_hot(target);
  const std::int64_t N = probs.dim(0), C = probs.dim(1);
  const std::int64_t P = probs.dim(2) * probs.dim(3);
  if (weights.defined()) {
    if (weights.numel() != N * P) {
      throw ShapeError("cross_entropy: weight map " + shape_str(weights.shape()) +
                       " does not cover N*H*W = " + std::to_string(N * P) + " pixels");
    }
    for (Dtype w : weights.data()) {
      if (!(w > 0)) throw ValueError("cross_entropy: weight map must be positive");
    }
  }
  const auto p = probs.data();
  const auto t = target.data();
  const double norm = static_cast<double>(N * P);
  auto weight_at = [weights, P](std::int64_t n, std::int64_t i) -> double {
    return weights.defined() ? static_cast<double>(weights.data()[static_cast<std::size_t>(n * P + i)])
                             : 1.0;
  };

  CompensatedSum acc;
  for (std::int64_t n = 0; n < N; ++n) {
    for (std::int64_t c = 0; c < C; ++c) {
      const std::int64_t base = (n * C + c) * P;
      for (std::int64_t i = 0; i < P; ++i) {
        const auto k = static_cast<std::size_t>(base + i);
        if (t[k] == Dtype(0)) continue;
        acc -= weight_at(n, i) * std::log(std::max(static_cast<double>(p[k]), kLogClamp));
      }
    }
  }
  auto out = Tensor<Dtype>::scalar(static_cast<Dtype>(acc.value() / norm));

  if (g.tracks(probs)) {
    g.record("cross_entropy", {probs}, out, [=]() {
      const double up = static_cast<double>(out.grad()[0]);
      auto gp = probs.mutable_grad();
      const auto pv = probs.data();
      const auto tv = target.data();
      for (std::int64_t n = 0; n < N; ++n) {
        for (std::int64_t c = 0; c < C; ++c) {
          const std::int64_t base = (n * C + c) * P;
          for (std::int64_t i = 0; i < P; ++i) {
            const auto k = static_cast<std::size_t>(base + i);
            const double pk = static_cast<double>(pv[k]);
            if (tv[k] == Dtype(0) || pk < kLogClamp) continue;
            gp[k] += static_cast<Dtype>(-up * weight_at(n, i) / (pk * norm));
          }
        }
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> dice(Graph<Dtype>& g, const Tensor<Dtype>& probs, const Tensor<Dtype>& target) {
  check_pair(probs, target, "dice");
  const std::int64_t N = probs.dim(0), C = probs.dim(1);
  const std::int64_t P = probs.dim(2) * probs.dim(3);
  const auto p = probs.data();
  const auto t = target.data();

  std::vector<double> inter(static_cast<std::size_t>(C), 0.0);
  std::vector<double> denom(static_cast<std::size_t>(C), kDiceEps);
  for (std::int64_t c = 0; c < C; ++c) {
    CompensatedSum pg, pp, gg;
    for (std::int64_t n = 0; n < N; ++n) {
      const std::int64_t base = (n * C + c) * P;
      for (std::int64_t i = 0; i < P; ++i) {
        const double pv = p[static_cast<std::size_t>(base + i)];
        const double tv = t[static_cast<std::size_t>(base + i)];
        pg += pv * tv;
        pp += pv * pv;
        gg += tv * tv;
      }
    }
    inter[static_cast<std::size_t>(c)] = pg.value();
    denom[static_cast<std::size_t>(c)] = pp.value() + gg.value() + kDiceEps;
  }
  double acc = 0.0;
  for (std::int64_t c = 0; c < C; ++c) {
    acc += -2.0 * inter[static_cast<std::size_t>(c)] / denom[static_cast<std::size_t>(c)];
  }
  auto out = Tensor<Dtype>::scalar(static_cast<Dtype>(acc / static_cast<double>(C)));

  if (g.tracks(probs)) {
    g.record("dice", {probs}, out, [=]() {
      const double up = static_cast<double>(out.grad()[0]) / static_cast<double>(C);
      auto gp = probs.mutable_grad();
      const auto pv = probs.data();
      const auto tv = target.data();
      for (std::int64_t c = 0; c < C; ++c) {
        const double I = inter[static_cast<std::size_t>(c)];
        const double D = denom[static_cast<std::size_t>(c)];
        for (std::int64_t n = 0; n < N; ++n) {
          const std::int64_t base = (n * C + c) * P;
          for (std::int64_t i = 0; i < P; ++i) {
            const auto k = static_cast<std::size_t>(base + i);
            const double d = -2.0 * static_cast<double>(tv[k]) / D +
                             4.0 * I * static_cast<double>(pv[k]) / (D * D);
            gp[k] += static_cast<Dtype>(up * d);
          }
        }
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> sec(Graph<Dtype>& g, const Tensor<Dtype>& class_probs, const Tensor<Dtype>& y) {
  if (class_probs.ndim() != 2) {
    throw ShapeError("sec: class_probs must be [N,C], got " + shape_str(class_probs.shape()));
  }
  if (class_probs.shape() != y.shape()) {
    throw ShapeError("sec: labels " + shape_str(y.shape()) + " do not match class_probs " +
                     shape_str(class_probs.shape()));
  }
  const auto p = class_probs.data();
  const auto t = y.data();
  const double norm = static_cast<double>(class_probs.numel());
  CompensatedSum acc;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double pk = p[k], yk = t[k];
    if (yk != 0.0) acc -= yk * std::log(std::max(pk, kLogClamp));
    if (yk != 1.0) acc -= (1.0 - yk) * std::log(std::max(1.0 - pk, kLogClamp));
  }
  auto out = Tensor<Dtype>::scalar(static_cast<Dtype>(acc.value() / norm));

  if (g.tracks(class_probs)) {
    g.record("sec", {class_probs}, out, [=]() {
      const double up = static_cast<double>(out.grad()[0]) / norm;
      auto gp = class_probs.mutable_grad();
      const auto pv = class_probs.data();
      const auto tv = y.data();
      for (std::size_t k = 0; k < pv.size(); ++k) {
        const double pk = pv[k], yk = tv[k];
        double d = 0.0;
        if (yk != 0.0 && pk >= kLogClamp) d -= yk / pk;
        if (yk != 1.0 && 1.0 - pk >= kLogClamp) d += (1.0 - yk) / (1.0 - pk);
        gp[k] += static_cast<Dtype>(up * d);
      }
    });
  }
  return out;
}

template <typename Dtype>
LossTerms<Dtype> total_loss(Graph<Dtype>& g, const Tensor<Dtype>& ce, const Tensor<Dtype>& dice,
                            const Tensor<Dtype>& sec, double lambda) {
  if (!(lambda >= 0.0)) throw ValueError("total_loss: lambda must be >= 0");
  LossTerms<Dtype> terms{ce, dice, sec, {}};
  terms.total = ops::add(g, ops::add(g, ce, dice), ops::scale(g, sec, static_cast<Dtype>(lambda)));
  return terms;
}

LossBreakdown total_loss(double ce, double dice, double sec, double lambda) {
  if (!(lambda >= 0.0)) throw ValueError("total_loss: lambda must be >= 0");
  return LossBreakdown{ce, dice, sec, (ce + dice) + lambda * sec};
}

std::vector<std::uint8_t> class_presence_labels(std::span<const std::uint8_t> labels,
                                                int classes) {
  if (classes < 1) throw ValueError("class_presence_labels: classes must be positive");
  std::vector<std::uint8_t> y(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) {
      throw ValueError("class_presence_labels: label " + std::to_string(labels[i]) +
                       " at pixel " + std::to_string(i) + " is outside [0, " +
                       std::to_string(classes) + ")");
    }
    y[labels[i]] = 1;
  }
  return y;
}

template <typename Dtype>
Tensor<Dtype> one_hot(std::span<const std::uint8_t> labels, std::int64_t batch, int classes,
                      std::int64_t height, std::int64_t width) {
  const std::int64_t P = height * width;
  if (static_cast<std::int64_t>(labels.size()) != batch * P) {
    throw ShapeError("one_hot: " + std::to_string(labels.size()) + " labels for a [" +
                     std::to_string(batch) + "," + std::to_string(height) + "," +
                     std::to_string(width) + "] grid");
  }
  Tensor<Dtype> out({batch, classes, height, width});
  auto o = out.mutable_data();
  for (std::int64_t n = 0; n < batch; ++n) {
    for (std::int64_t i = 0; i < P; ++i) {
      const int l = labels[static_cast<std::size_t>(n * P + i)];
      if (l >= classes) {
        throw ValueError("one_hot: label " + std::to_string(l) + " outside [0, " +
                         std::to_string(classes) + ")");
      }
      o[static_cast<std::size_t>((n * classes + l) * P + i)] = Dtype(1);
    }
  }
  return out;
}

std::vector<double> boundary_weight_map(std::span<const std::uint8_t> labels, std::int64_t height,
                                        std::int64_t width, double w0, double sigma) {
  if (static_cast<std::int64_t>(labels.size()) != height * width) {
    throw ShapeError("boundary_weight_map: label count does not match the grid");
  }
  if (!(sigma > 0.0)) throw ValueError("boundary_weight_map: sigma must be positive");
  std::vector<double> weights(labels.size(), 1.0);
  if (w0 == 0.0) return weights;

  std::vector<std::pair<std::int64_t, std::int64_t>> boundary;
  auto at = [&](std::int64_t r, std::int64_t c) { return labels[static_cast<std::size_t>(r * width + c)]; };
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) {
      const auto l = at(r, c);
      if ((r > 0 && at(r - 1, c) != l) || (r + 1 < height && at(r + 1, c) != l) ||
          (c > 0 && at(r, c - 1) != l) || (c + 1 < width && at(r, c + 1) != l)) {
        boundary.emplace_back(r, c);
      }
    }
  }
  if (boundary.empty()) return weights;
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [br, bc] : boundary) {
        const double dr = static_cast<double>(r - br), dc = static_cast<double>(c - bc);
        best = std::min(best, dr * dr + dc * dc);
      }
      weights[static_cast<std::size_t>(r * width + c)] =
          1.0 + w0 * std::exp(-best / (2.0 * sigma * sigma));
    }
  }
  return weights;
}

#define CSTRIP_INSTANTIATE(Dtype)                                                              \
  template struct LossTerms<Dtype>;                                                           \
  template Tensor<Dtype> cross_entropy(Graph<Dtype>&, const Tensor<Dtype>&,                   \
                                       const Tensor<Dtype>&, const Tensor<Dtype>&);           \
  template Tensor<Dtype> dice(Graph<Dtype>&, const Tensor<Dtype>&, const Tensor<Dtype>&);     \
  template Tensor<Dtype> sec(Graph<Dtype>&, const Tensor<Dtype>&, const Tensor<Dtype>&);      \
  template LossTerms<Dtype> total_loss(Graph<Dtype>&, const Tensor<Dtype>&,                   \
                                       const Tensor<Dtype>&, const Tensor<Dtype>&, double);   \
  template Tensor<Dtype> one_hot<Dtype>(std::span<const std::uint8_t>, std::int64_t, int,     \
                                        std::int64_t, std::int64_t);

CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)

}  // namespace cstrip::loss

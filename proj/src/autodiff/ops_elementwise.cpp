#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "contextstrip/autodiff/ops.hpp"
#include "op_support.hpp"

namespace cstrip::ops {

using detail::axis_mismatch;
using detail::grad_target;
using detail::require_rank;

template <typename Dtype>
Tensor<Dtype> relu(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  Tensor<Dtype> out(input.shape());
  auto x = input.data();
  auto y = out.mutable_data();
  const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y[i] = x[i] > Dtype(0) ? x[i] : Dtype(0);
  if (g.tracks_branches()) {
    std::uint64_t word = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      word = (word << 1) | (x[i] > Dtype(0));
      if (i % 64 == 63 || i + 1 == n) {
        g.fold_branch(word);
        word = 0;
      }
    }
  }

  if (g.tracks(input)) {
    g.record("relu", {input}, out, [input, out]() {
      auto go = out.grad();
      auto x = input.data();
      auto gx = input.mutable_grad();
      const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) {
        if (x[i] > Dtype(0)) gx[i] += go[i];
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> sigmoid(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  constexpr Dtype lo = std::numeric_limits<Dtype>::min();
  constexpr Dtype hi = Dtype(1) - std::numeric_limits<Dtype>::epsilon() / 2;
  Tensor<Dtype> out(input.shape());
  auto x = input.data();
  auto y = out.mutable_data();
  const auto n = static_cast<std::int64_t>(x.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    Dtype s;
    if (x[i] >= Dtype(0)) {
      s = Dtype(1) / (Dtype(1) + std::exp(-x[i]));
    } else {
      const Dtype e = std::exp(x[i]);
      s = e / (Dtype(1) + e);
    }
    y[i] = std::clamp(s, lo, hi);
  }

  if (g.tracks(input)) {
    g.record("sigmoid", {input}, out, [input, out]() {
      auto go = out.grad();
      auto s = out.data();
      auto gx = input.mutable_grad();
      const auto n = static_cast<std::int64_t>(s.size());
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < n; ++i) gx[i] += go[i] * s[i] * (Dtype(1) - s[i]);
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> activation(Graph<Dtype>& g, const Tensor<Dtype>& input, Activation kind) {
  return kind == Activation::Relu ? relu(g, input) : sigmoid(g, input);
}

template <typename Dtype>
Tensor<Dtype> softmax(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  if (input.ndim() < 2) throw ShapeError("softmax: input needs rank >= 2, got " + shape_str(input.shape()));
  const std::int64_t N = input.dim(0), C = input.dim(1), inner = input.numel() / (N * C);
  Tensor<Dtype> out(input.shape());
  auto x = input.data();
  auto y = out.mutable_data();
#pragma omp parallel for schedule(static)
  for (std::int64_t n = 0; n < N; ++n) {
    const Dtype* xn = x.data() + n * C * inner;
    Dtype* yn = y.data() + n * C * inner;
    for (std::int64_t i = 0; i < inner; ++i) {
      Dtype top = xn[i];
      for (std::int64_t c = 1; c < C; ++c) top = std::max(top, xn[c * inner + i]);
      Dtype total = 0;
      for (std::int64_t c = 0; c < C; ++c) {
        yn[c * inner + i] = std::exp(xn[c * inner + i] - top);
        total += yn[c * inner + i];
      }
      for (std::int64_t c = 0; c < C; ++c) yn[c * inner + i] /= total;
    }
  }

  if (g.tracks(input)) {
    g.record("softmax", {input}, out, [N, C, inner, input, out]() {
      auto go = out.grad();
      auto s = out.data();
      auto gx = input.mutable_grad();
#pragma omp parallel for schedule(static)
      for (std::int64_t n = 0; n < N; ++n) {
        const std::int64_t base = n * C * inner;
        for (std::int64_t i = 0; i < inner; ++i) {
          Dtype dot = 0;
          for (std::int64_t c = 0; c < C; ++c) dot += go[base + c * inner + i] * s[base + c * inner + i];
          for (std::int64_t c = 0; c < C; ++c) {
            const std::int64_t j = base + c * inner + i;
            gx[j] += s[j] * (go[j] - dot);
          }
        }
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> dropout(Graph<Dtype>& g, const Tensor<Dtype>& input, double rate, Mode mode,
                      Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::Eval || rate == 0.0) return input;

  const Dtype keep_scale = static_cast<Dtype>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<Dtype>>(input.data().size());
  for (auto& m : *mask) m = rng.uniform() < rate ? Dtype(0) : keep_scale;

  Tensor<Dtype> out(input.shape());
  auto x = input.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * (*mask)[i];

  if (g.tracks(input)) {
    g.record("dropout", {input}, out, [input, out, mask]() {
      auto go = out.grad();
      auto gx = input.mutable_grad();
      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * (*mask)[i];
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> channel_scale(Graph<Dtype>& g, const Tensor<Dtype>& input,
                            const Tensor<Dtype>& gamma) {
  if (input.ndim() < 2) throw ShapeError("channel_scale: input needs rank >= 2");
  require_rank(gamma, 2, "channel_scale", "gamma");
  const std::int64_t N = input.dim(0), C = input.dim(1), inner = input.numel() / (N * C);
  if (gamma.dim(0) != N) throw ShapeError(axis_mismatch("channel_scale", "gamma", 0, gamma.dim(0), N));
  if (gamma.dim(1) != C) throw ShapeError(axis_mismatch("channel_scale", "gamma", 1, gamma.dim(1), C));

  Tensor<Dtype> out(input.shape());
  auto x = input.data();
  auto s = gamma.data();
  auto y = out.mutable_data();
#pragma omp parallel for schedule(static)
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const Dtype factor = s[nc];
    for (std::int64_t i = 0; i < inner; ++i) y[nc * inner + i] = x[nc * inner + i] * factor;
  }

  if (g.tracks(input, gamma)) {
    g.record("channel_scale", {input, gamma}, out, [N, C, inner, input, gamma, out]() {
      auto go = out.grad();
      auto gx = grad_target(input);
      auto gs = grad_target(gamma);
      auto x = input.data();
      auto s = gamma.data();
#pragma omp parallel for schedule(static)
      for (std::int64_t nc = 0; nc < N * C; ++nc) {
        Dtype acc = 0;
        for (std::int64_t i = 0; i < inner; ++i) {
          const std::int64_t j = nc * inner + i;
          if (!gx.empty()) gx[j] += go[j] * s[nc];
          acc += go[j] * x[j];
        }
        if (!gs.empty()) gs[nc] += acc;
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> sum_axis1(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  if (input.ndim() < 2) throw ShapeError("sum_axis1: input needs rank >= 2");
  const std::int64_t N = input.dim(0), K = input.dim(1), inner = input.numel() / (N * K);
  Shape out_shape{N};
  for (int a = 2; a < input.ndim(); ++a) out_shape.push_back(input.dim(a));
  Tensor<Dtype> out(out_shape);
  auto x = input.data();
  auto y = out.mutable_data();
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t k = 0; k < K; ++k)
      for (std::int64_t i = 0; i < inner; ++i) y[n * inner + i] += x[(n * K + k) * inner + i];

  if (g.tracks(input)) {
    g.record("sum_axis1", {input}, out, [N, K, inner, input, out]() {
      auto go = out.grad();
      auto gx = input.mutable_grad();
      for (std::int64_t n = 0; n < N; ++n)
        for (std::int64_t k = 0; k < K; ++k)
          for (std::int64_t i = 0; i < inner; ++i) gx[(n * K + k) * inner + i] += go[n * inner + i];
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> sum(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  Dtype total = 0;
  for (auto v : input.data()) total += v;
  auto out = Tensor<Dtype>::scalar(total);
  if (g.tracks(input)) {
    g.record("sum", {input}, out, [input, out]() {
      const Dtype go = out.grad()[0];
      for (auto& gx : input.mutable_grad()) gx += go;
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> weighted_sum(Graph<Dtype>& g, const Tensor<Dtype>& input,
                           const Tensor<Dtype>& weights) {
  if (input.numel() != weights.numel()) {
    throw ShapeError("weighted_sum: weights " + shape_str(weights.shape()) + " do not match input " +
                     shape_str(input.shape()));
  }
  auto x = input.data();
  auto w = weights.data();
  Dtype total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) total += x[i] * w[i];
  auto out = Tensor<Dtype>::scalar(total);
  if (g.tracks(input)) {
    g.record("weighted_sum", {input}, out, [input, weights, out]() {
      const Dtype go = out.grad()[0];
      auto w = weights.data();
      auto gx = input.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go * w[i];
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> scale(Graph<Dtype>& g, const Tensor<Dtype>& input, Dtype factor) {
  Tensor<Dtype> out(input.shape());
  auto x = input.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * factor;
  if (g.tracks(input)) {
    g.record("scale", {input}, out, [input, out, factor]() {
      auto go = out.grad();
      auto gx = input.mutable_grad();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i] * factor;
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> add(Graph<Dtype>& g, const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                     " differ");
  }
  Tensor<Dtype> out(a.shape());
  auto x = a.data();
  auto z = b.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + z[i];
  if (g.tracks(a, b)) {
    g.record("add", {a, b}, out, [a, b, out]() {
      auto go = out.grad();
      for (const auto* t : {&a, &b}) {
        if (auto gt = grad_target(*t); !gt.empty()) {
          for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += go[i];
        }
      }
    });
  }
  return out;
}

#define CSTRIP_INSTANTIATE(Dtype)                                                              \
  template Tensor<Dtype> relu(Graph<Dtype>&, const Tensor<Dtype>&);                           \
  template Tensor<Dtype> sigmoid(Graph<Dtype>&, const Tensor<Dtype>&);                        \
  template Tensor<Dtype> activation(Graph<Dtype>&, const Tensor<Dtype>&, Activation);         \
  template Tensor<Dtype> softmax(Graph<Dtype>&, const Tensor<Dtype>&);                        \
  template Tensor<Dtype> dropout(Graph<Dtype>&, const Tensor<Dtype>&, double, Mode, Rng&);    \
  template Tensor<Dtype> channel_scale(Graph<Dtype>&, const Tensor<Dtype>&,                   \
                                       const Tensor<Dtype>&);                                 \
  template Tensor<Dtype> sum_axis1(Graph<Dtype>&, const Tensor<Dtype>&);                      \
  template Tensor<Dtype> sum(Graph<Dtype>&, const Tensor<Dtype>&);                            \
  template Tensor<Dtype> weighted_sum(Graph<Dtype>&, const Tensor<Dtype>&,                    \
                                      const Tensor<Dtype>&);                                  \
  template Tensor<Dtype> scale(Graph<Dtype>&, const Tensor<Dtype>&, Dtype);                   \
  template Tensor<Dtype> add(Graph<Dtype>&, const Tensor<Dtype>&, const Tensor<Dtype>&);

CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)

}  // namespace cstrip::ops

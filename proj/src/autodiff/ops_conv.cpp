#include <vector>

#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/kernels/conv2d.hpp"
#include "contextstrip/kernels/pooling.hpp"
#include "op_support.hpp"

namespace cstrip::ops {

using detail::axis_mismatch;
using detail::grad_target;
using detail::require_rank;

template <typename Dtype>
Tensor<Dtype> conv2d(Graph<Dtype>& g, const Tensor<Dtype>& input, const Tensor<Dtype>& kernel,
                     const Tensor<Dtype>& bias, Padding padding) {
  require_rank(input, 4, "conv2d", "input");
  require_rank(kernel, 4, "conv2d", "kernel");
  if (kernel.dim(1) != input.dim(1)) {
    throw ShapeError(axis_mismatch("conv2d", "input channel", 1, input.dim(1), kernel.dim(1)));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != kernel.dim(0))) {
    throw ShapeError("conv2d: bias must be [" + std::to_string(kernel.dim(0)) + "], got " +
                     shape_str(bias.shape()));
  }
  kernels::Conv2dGeometry geo{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                              kernel.dim(0), kernel.dim(2), kernel.dim(3), 0, 0};
  if (padding == Padding::Same) {
    if (geo.kernel_h % 2 == 0 || geo.kernel_w % 2 == 0) {
      throw ShapeError("conv2d: same padding needs odd kernel extents on axes 2 and 3, got " +
                       shape_str(kernel.shape()));
    }
    geo.pad_h = geo.kernel_h / 2;
    geo.pad_w = geo.kernel_w / 2;
  }
  if (geo.out_h() <= 0) {
    throw ShapeError(axis_mismatch("conv2d", "input height", 2, geo.in_h, geo.kernel_h));
  }
  if (geo.out_w() <= 0) {
    throw ShapeError(axis_mismatch("conv2d", "input width", 3, geo.in_w, geo.kernel_w));
  }

  Tensor<Dtype> out({geo.batch, geo.out_channels, geo.out_h(), geo.out_w()});
  kernels::conv2d_forward<Dtype>(geo, input.data(), kernel.data(), bias.data(), out.mutable_data());

  if (g.tracks(input, kernel, bias)) {
    g.record("conv2d", {input, kernel, bias}, out, [geo, input, kernel, bias, out]() {
      if (input.requires_grad()) {
        kernels::conv2d_backward_input<Dtype>(geo, out.grad(), kernel.data(), input.mutable_grad());
      }
      if (kernel.requires_grad() || (bias.defined() && bias.requires_grad())) {
        std::vector<Dtype> scratch;
        std::span<Dtype> gk = grad_target(kernel);
        if (gk.empty()) {
          scratch.assign(kernel.data().size(), Dtype(0));
          gk = scratch;
        }
        kernels::conv2d_backward_params<Dtype>(geo, out.grad(), input.data(), gk,
                                               grad_target(bias));
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> max_pool2d(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  require_rank(input, 4, "max_pool2d", "input");
  const auto h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0) throw ShapeError("max_pool2d: odd extent on axis 2 (H=" + std::to_string(h) + ")");
  if (w % 2 != 0) throw ShapeError("max_pool2d: odd extent on axis 3 (W=" + std::to_string(w) + ")");
  const std::int64_t planes = input.dim(0) * input.dim(1);
  Tensor<Dtype> out({input.dim(0), input.dim(1), h / 2, w / 2});
  auto argmax = std::make_shared<std::vector<std::int32_t>>(static_cast<std::size_t>(out.numel()));
  kernels::max_pool2x2_forward<Dtype>(planes, h, w, input.data(), out.mutable_data(), *argmax);
  if (g.tracks_branches()) {
    for (const auto a : *argmax) g.fold_branch(static_cast<std::uint64_t>(a));
  }

  if (g.tracks(input)) {
    g.record("max_pool2d", {input}, out, [planes, h, w, input, out, argmax]() {
      kernels::max_pool2x2_backward<Dtype>(planes, h, w, out.grad(), *argmax,
                                           input.mutable_grad());
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> linear(Graph<Dtype>& g, const Tensor<Dtype>& input, const Tensor<Dtype>& weights,
                     const Tensor<Dtype>& bias) {
  require_rank(input, 2, "linear", "input");
  require_rank(weights, 2, "linear", "weights");
  const std::int64_t N = input.dim(0), F = input.dim(1), G = weights.dim(1);
  if (weights.dim(0) != F) {
    throw ShapeError(axis_mismatch("linear", "weights", 0, weights.dim(0), F));
  }
  if (bias.defined() && (bias.ndim() != 1 || bias.dim(0) != G)) {
    throw ShapeError("linear: bias must be [" + std::to_string(G) + "], got " +
                     shape_str(bias.shape()));
  }
  Tensor<Dtype> out({N, G});
  {
    auto x = input.data();
    auto w = weights.data();
    auto b = bias.data();
    auto y = out.mutable_data();
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t j = 0; j < G; ++j) y[n * G + j] = b.empty() ? Dtype(0) : b[j];
      for (std::int64_t f = 0; f < F; ++f) {
        const Dtype xv = x[n * F + f];
        for (std::int64_t j = 0; j < G; ++j) y[n * G + j] += xv * w[f * G + j];
      }
    }
  }

  if (g.tracks(input, weights, bias)) {
    g.record("linear", {input, weights, bias}, out, [N, F, G, input, weights, bias, out]() {
      auto go = out.grad();
      auto x = input.data();
      auto w = weights.data();
      if (auto gx = grad_target(input); !gx.empty()) {
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t f = 0; f < F; ++f) {
            Dtype acc = 0;
            for (std::int64_t j = 0; j < G; ++j) acc += go[n * G + j] * w[f * G + j];
            gx[n * F + f] += acc;
          }
      }
      if (auto gw = grad_target(weights); !gw.empty()) {
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t f = 0; f < F; ++f)
            for (std::int64_t j = 0; j < G; ++j) gw[f * G + j] += x[n * F + f] * go[n * G + j];
      }
      if (auto gb = grad_target(bias); !gb.empty()) {
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t j = 0; j < G; ++j) gb[j] += go[n * G + j];
      }
    });
  }
  return out;
}

#define CSTRIP_INSTANTIATE(Dtype)                                                               \
  template Tensor<Dtype> conv2d(Graph<Dtype>&, const Tensor<Dtype>&, const Tensor<Dtype>&,     \
                                const Tensor<Dtype>&, Padding);                                \
  template Tensor<Dtype> max_pool2d(Graph<Dtype>&, const Tensor<Dtype>&);                      \
  template Tensor<Dtype> linear(Graph<Dtype>&, const Tensor<Dtype>&, const Tensor<Dtype>&,     \
                                const Tensor<Dtype>&);

CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)

}  // namespace cstrip::ops

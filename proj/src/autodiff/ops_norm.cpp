#include <memory>
#include <vector>

#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/kernels/batch_norm.hpp"
#include "op_support.hpp"

namespace cstrip::ops {

using detail::grad_target;

template <typename Dtype>
Tensor<Dtype> batch_norm(Graph<Dtype>& g, const Tensor<Dtype>& input, const Tensor<Dtype>& scale,
                         const Tensor<Dtype>& shift, const Tensor<Dtype>& running_mean,
                         const Tensor<Dtype>& running_var, Mode mode, double momentum,
                         double eps) {
  if (input.ndim() < 2) {
    throw ShapeError("batch_norm: input needs rank >= 2, got " + shape_str(input.shape()));
  }
  const std::int64_t C = input.dim(1);
  for (const auto* p : {&scale, &shift, &running_mean, &running_var}) {
    if (p->numel() != C) {
      throw ShapeError("batch_norm: per-channel parameters must have " + std::to_string(C) +
                       " entries (input axis 1), got " + shape_str(p->shape()));
    }
  }
  const kernels::BatchNormGeometry geo{input.dim(0), C, input.numel() / (input.dim(0) * C)};

  Tensor<Dtype> out(input.shape());
  auto xhat = std::make_shared<std::vector<Dtype>>(input.data().size());

  if (mode == Mode::Train) {
    auto var = std::make_shared<std::vector<double>>(static_cast<std::size_t>(C));
    std::vector<double> mean(static_cast<std::size_t>(C));
    kernels::batch_norm_train_forward<Dtype>(geo, input.data(), scale.data(), shift.data(), eps,
                                             mean, *var, *xhat, out.mutable_data());
    const double m = static_cast<double>(geo.count());
    const double unbias = m > 1 ? m / (m - 1) : 1.0;
    auto rm = running_mean.mutable_data();
    auto rv = running_var.mutable_data();
    for (std::int64_t c = 0; c < C; ++c) {
      rm[c] = static_cast<Dtype>(momentum * rm[c] + (1.0 - momentum) * mean[c]);
      rv[c] = static_cast<Dtype>(momentum * rv[c] + (1.0 - momentum) * (*var)[c] * unbias);
    }
    if (g.tracks(input, scale, shift)) {
      g.record("batch_norm", {input, scale, shift}, out,
               [geo, eps, input, scale, shift, out, xhat, var]() {
                 kernels::batch_norm_train_backward<Dtype>(
                     geo, out.grad(), *xhat, scale.data(), *var, eps, grad_target(input),
                     grad_target(scale), grad_target(shift));
               });
    }
  } else {
    kernels::batch_norm_eval_forward<Dtype>(geo, input.data(), scale.data(), shift.data(),
                                            running_mean.data(), running_var.data(), eps, *xhat,
                                            out.mutable_data());
    if (g.tracks(input, scale, shift)) {
      // Running variance is captured by value: later train-mode passes may
      // update the buffer before this node's backward runs.
      auto frozen_var = running_var.clone();
      g.record("batch_norm", {input, scale, shift}, out,
               [geo, eps, input, scale, shift, out, xhat, frozen_var]() {
                 kernels::batch_norm_eval_backward<Dtype>(
                     geo, out.grad(), *xhat, scale.data(), frozen_var.data(), eps,
                     grad_target(input), grad_target(scale), grad_target(shift));
               });
    }
  }
  return out;
}

template Tensor<float> batch_norm(Graph<float>&, const Tensor<float>&, const Tensor<float>&,
                                  const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                  Mode, double, double);
template Tensor<double> batch_norm(Graph<double>&, const Tensor<double>&, const Tensor<double>&,
                                   const Tensor<double>&, const Tensor<double>&,
                                   const Tensor<double>&, Mode, double, double);

}  // namespace cstrip::ops

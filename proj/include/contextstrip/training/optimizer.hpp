#pragma once

#include <cstdint>
#include <vector>

#include "contextstrip/autodiff/tensor.hpp"
#include "contextstrip/network/model_params.hpp"

namespace cstrip {

/// lr0 * (1 - t/T)^power. Throws ValueError for T <= 0 or t outside [0, T].
double poly_lr(std::int64_t t, std::int64_t total, double lr0, double power);

struct SgdOptions {
  double momentum = 0.9;
  double weight_decay = 1e-4;
};

/// Zero momentum buffers shaped like the trainable entries, in order.
template <typename Dtype>
std::vector<Tensor<Dtype>> make_velocity(const ModelParams<Dtype>& params);

/// Per trainable parameter: v <- mu v - lr (g + wd theta); theta <- theta + v.
/// A parameter without a gradient counts as g = 0. Nothing is written unless
/// every gradient and every updated value is finite; otherwise NumericError
/// names the parameter. Gradients are cleared afterwards.
template <typename Dtype>
void sgd_step(const ModelParams<Dtype>& params, std::vector<Tensor<Dtype>>& velocity, double lr,
              const SgdOptions& options);

}  // namespace cstrip

#pragma once

#include <cstdint>
#include <span>

namespace cstrip::kernels {

/// Layout [batch, channels, inner]; statistics are per channel over
/// batch x inner elements. Means and variances accumulate in double.
struct BatchNormGeometry {
  std::int64_t batch = 0;
  std::int64_t channels = 0;
  std::int64_t inner = 0;
  std::int64_t count() const { return batch * inner; }
};

/// Normalizes with batch statistics. Writes the per-channel batch mean and
/// biased variance, the normalized values xhat, and the output.
template <typename Dtype>
void batch_norm_train_forward(const BatchNormGeometry& g, std::span<const Dtype> input,
                              std::span<const Dtype> scale, std::span<const Dtype> shift,
                              double eps, std::span<double> mean, std::span<double> var,
                              std::span<Dtype> xhat, std::span<Dtype> output);

template <typename Dtype>
void batch_norm_eval_forward(const BatchNormGeometry& g, std::span<const Dtype> input,
                             std::span<const Dtype> scale, std::span<const Dtype> shift,
                             std::span<const Dtype> running_mean,
                             std::span<const Dtype> running_var, double eps,
                             std::span<Dtype> xhat, std::span<Dtype> output);

/// Backward through batch statistics. Accumulates into grad_input,
/// grad_scale, grad_shift; any of them may be empty to skip it.
template <typename Dtype>
void batch_norm_train_backward(const BatchNormGeometry& g, std::span<const Dtype> grad_output,
                               std::span<const Dtype> xhat, std::span<const Dtype> scale,
                               std::span<const double> var, double eps,
                               std::span<Dtype> grad_input, std::span<Dtype> grad_scale,
                               std::span<Dtype> grad_shift);

/// Backward with frozen running statistics.
template <typename Dtype>
void batch_norm_eval_backward(const BatchNormGeometry& g, std::span<const Dtype> grad_output,
                              std::span<const Dtype> xhat, std::span<const Dtype> scale,
                              std::span<const Dtype> running_var, double eps,
                              std::span<Dtype> grad_input, std::span<Dtype> grad_scale,
                              std::span<Dtype> grad_shift);

namespace reference {
template <typename Dtype>
void batch_norm_train_forward(const BatchNormGeometry& g, std::span<const Dtype> input,
                              std::span<const Dtype> scale, std::span<const Dtype> shift,
                              double eps, std::span<double> mean, std::span<double> var,
                              std::span<Dtype> xhat, std::span<Dtype> output);
template <typename Dtype>
void batch_norm_train_backward(const BatchNormGeometry& g, std::span<const Dtype> grad_output,
                               std::span<const Dtype> xhat, std::span<const Dtype> scale,
                               std::span<const double> var, double eps,
                               std::span<Dtype> grad_input, std::span<Dtype> grad_scale,
                               std::span<Dtype> grad_shift);
}  // namespace reference

}  // namespace cstrip::kernels

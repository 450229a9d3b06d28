#pragma once

#include <cstdint>
#include <span>

namespace cstrip::kernels {

/// 2x2, stride-2 max pooling over `planes` independent h x w planes.
/// argmax receives, per output element, the in-plane index of the first
/// maximum in row-major window order.
template <typename Dtype>
void max_pool2x2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                         std::span<const Dtype> input, std::span<Dtype> output,
                         std::span<std::int32_t> argmax);

/// Accumulates grad_output into grad_input at the recorded argmax positions.
template <typename Dtype>
void max_pool2x2_backward(std::int64_t planes, std::int64_t h, std::int64_t w,
                          std::span<const Dtype> grad_output, std::span<const std::int32_t> argmax,
                          std::span<Dtype> grad_input);

namespace reference {
template <typename Dtype>
void max_pool2x2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                         std::span<const Dtype> input, std::span<Dtype> output,
                         std::span<std::int32_t> argmax);
}  // namespace reference

}  // namespace cstrip::kernels

#pragma once

#include <cstdint>
#include <span>

namespace cstrip::kernels {

/// Stride-1 2-D convolution geometry over NCHW tensors with OIHW kernels.
struct Conv2dGeometry {
  std::int64_t batch = 0;
  std::int64_t in_channels = 0;
  std::int64_t in_h = 0;
  std::int64_t in_w = 0;
  std::int64_t out_channels = 0;
  std::int64_t kernel_h = 0;
  std::int64_t kernel_w = 0;
  std::int64_t pad_h = 0;
  std::int64_t pad_w = 0;

  std::int64_t out_h() const { return in_h + 2 * pad_h - kernel_h + 1; }
  std::int64_t out_w() const { return in_w + 2 * pad_w - kernel_w + 1; }
};

// OpenMP kernels. Every output element is reduced in a fixed order owned by a
// single thread, so results do not depend on the thread count.

template <typename Dtype>
void conv2d_forward(const Conv2dGeometry& g, std::span<const Dtype> input,
                    std::span<const Dtype> kernel, std::span<const Dtype> bias,
                    std::span<Dtype> output);

/// Accumulates into grad_input.
template <typename Dtype>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                           std::span<const Dtype> kernel, std::span<Dtype> grad_input);

/// Accumulates into grad_kernel and grad_bias (grad_bias may be empty).
template <typename Dtype>
void conv2d_backward_params(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                            std::span<const Dtype> input, std::span<Dtype> grad_kernel,
                            std::span<Dtype> grad_bias);

namespace reference {

// Serial element-at-a-time versions; kept as the oracle for the kernels above
// and as the baseline in bench/.

template <typename Dtype>
void conv2d_forward(const Conv2dGeometry& g, std::span<const Dtype> input,
                    std::span<const Dtype> kernel, std::span<const Dtype> bias,
                    std::span<Dtype> output);

template <typename Dtype>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                           std::span<const Dtype> kernel, std::span<Dtype> grad_input);

template <typename Dtype>
void conv2d_backward_params(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                            std::span<const Dtype> input, std::span<Dtype> grad_kernel,
                            std::span<Dtype> grad_bias);

}  // namespace reference
}  // namespace cstrip::kernels

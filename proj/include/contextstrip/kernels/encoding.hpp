#pragma once

#include <cstdint>
#include <span>

namespace cstrip::kernels {

/// Residual encoding over a learned codebook.
///
/// For each item n the feature map [channels, positions] is read as
/// `positions` descriptors x_i of length `channels`. With residuals
/// r_ik = x_i - c_k, soft assignments
///   a_ik = softmax_k(-s_k * |r_ik|^2)
/// and aggregates
///   E_k = (1 / positions) * sum_i a_ik * r_ik.
struct EncodingGeometry {
  std::int64_t batch = 0;
  std::int64_t channels = 0;
  std::int64_t positions = 0;
  std::int64_t codewords = 0;
};

/// input [batch, channels, positions], codewords [K, channels],
/// smoothing [K]; writes assign [batch, positions, K] and
/// output [batch, K, channels].
template <typename Dtype>
void encoding_forward(const EncodingGeometry& g, std::span<const Dtype> input,
                      std::span<const Dtype> codewords, std::span<const Dtype> smoothing,
                      std::span<Dtype> assign, std::span<Dtype> output);

/// Accumulates gradients for input, codewords and smoothing; any target may
/// be empty to skip it.
template <typename Dtype>
void encoding_backward(const EncodingGeometry& g, std::span<const Dtype> grad_output,
                       std::span<const Dtype> input, std::span<const Dtype> codewords,
                       std::span<const Dtype> smoothing, std::span<const Dtype> assign,
                       std::span<Dtype> grad_input, std::span<Dtype> grad_codewords,
                       std::span<Dtype> grad_smoothing);

namespace reference {
template <typename Dtype>
void encoding_forward(const EncodingGeometry& g, std::span<const Dtype> input,
                      std::span<const Dtype> codewords, std::span<const Dtype> smoothing,
                      std::span<Dtype> assign, std::span<Dtype> output);
template <typename Dtype>
void encoding_backward(const EncodingGeometry& g, std::span<const Dtype> grad_output,
                       std::span<const Dtype> input, std::span<const Dtype> codewords,
                       std::span<const Dtype> smoothing, std::span<const Dtype> assign,
                       std::span<Dtype> grad_input, std::span<Dtype> grad_codewords,
                       std::span<Dtype> grad_smoothing);
}  // namespace reference

}  // namespace cstrip::kernels

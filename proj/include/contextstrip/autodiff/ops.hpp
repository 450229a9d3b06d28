#pragma once

#include <cstdint>
#include <vector>

#include "contextstrip/autodiff/graph.hpp"
#include "contextstrip/autodiff/tensor.hpp"
#include "contextstrip/core/rng.hpp"

namespace cstrip::ops {

enum class Padding { Same, Valid };
enum class Mode { Train, Eval };
enum class Activation { Relu, Sigmoid };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

/// Stride-1 convolution. input [N,Cin,H,W], kernel [Cout,Cin,kH,kW],
/// bias [Cout]. Same padding keeps H and W and needs odd kernel extents.
template <typename Dtype>
Tensor<Dtype> conv2d(Graph<Dtype>& g, const Tensor<Dtype>& input, const Tensor<Dtype>& kernel,
                     const Tensor<Dtype>& bias, Padding padding = Padding::Same);

/// 2x2 window, stride 2. Ties route the gradient to the first row-major
/// maximum.
template <typename Dtype>
Tensor<Dtype> max_pool2d(Graph<Dtype>& g, const Tensor<Dtype>& input);

/// input [N,F] times weights [F,G] plus bias [G].
template <typename Dtype>
Tensor<Dtype> linear(Graph<Dtype>& g, const Tensor<Dtype>& input, const Tensor<Dtype>& weights,
                     const Tensor<Dtype>& bias);

template <typename Dtype>
Tensor<Dtype> relu(Graph<Dtype>& g, const Tensor<Dtype>& input);

/// Outputs are clamped into the open interval (0, 1) so downstream logs stay
/// finite even where the exact value rounds to 0 or 1.
template <typename Dtype>
Tensor<Dtype> sigmoid(Graph<Dtype>& g, const Tensor<Dtype>& input);

template <typename Dtype>
Tensor<Dtype> activation(Graph<Dtype>& g, const Tensor<Dtype>& input, Activation kind);

/// Softmax over axis 1 of a tensor [N,C,...]; max-shifted per slice.
template <typename Dtype>
Tensor<Dtype> softmax(Graph<Dtype>& g, const Tensor<Dtype>& input);

/// Per-channel normalization of [N,C,...] over every axis except 1.
/// In train mode the running statistics (plain tensors of shape [C]) are
/// updated in place: running = momentum * running + (1 - momentum) * batch,
/// using the unbiased batch variance.
template <typename Dtype>
Tensor<Dtype> batch_norm(Graph<Dtype>& g, const Tensor<Dtype>& input, const Tensor<Dtype>& scale,
                         const Tensor<Dtype>& shift, const Tensor<Dtype>& running_mean,
                         const Tensor<Dtype>& running_var, Mode mode,
                         double momentum = kBatchNormMomentum, double eps = kBatchNormEps);

/// Inverted dropout: eval mode and rate 0 return the input unchanged.
template <typename Dtype>
Tensor<Dtype> dropout(Graph<Dtype>& g, const Tensor<Dtype>& input, double rate, Mode mode,
                      Rng& rng);

/// Concatenation along axis 1.
template <typename Dtype>
Tensor<Dtype> concat(Graph<Dtype>& g, const std::vector<Tensor<Dtype>>& inputs);

/// Nearest-neighbour 2x upsampling of [N,C,H,W].
template <typename Dtype>
Tensor<Dtype> upsample2x(Graph<Dtype>& g, const Tensor<Dtype>& input);

/// y[n,c,h,w] = x[n,c,h,w] * gamma[n,c].
template <typename Dtype>
Tensor<Dtype> channel_scale(Graph<Dtype>& g, const Tensor<Dtype>& input,
                            const Tensor<Dtype>& gamma);

/// Soft-assigned residual aggregation: input [N,D,H,W], codewords [K,D],
/// smoothing [K] -> [N,K,D]. See kernels/encoding.hpp for the formulas.
template <typename Dtype>
Tensor<Dtype> encoding_aggregate(Graph<Dtype>& g, const Tensor<Dtype>& input,
                                 const Tensor<Dtype>& codewords, const Tensor<Dtype>& smoothing);

/// [N,K,...] -> [N,...], summing over axis 1.
template <typename Dtype>
Tensor<Dtype> sum_axis1(Graph<Dtype>& g, const Tensor<Dtype>& input);

/// Sum of all elements as a [1] tensor.
template <typename Dtype>
Tensor<Dtype> sum(Graph<Dtype>& g, const Tensor<Dtype>& input);

/// Sum of input * weights (weights are constants of the same shape).
template <typename Dtype>
Tensor<Dtype> weighted_sum(Graph<Dtype>& g, const Tensor<Dtype>& input,
                           const Tensor<Dtype>& weights);

template <typename Dtype>
Tensor<Dtype> scale(Graph<Dtype>& g, const Tensor<Dtype>& input, Dtype factor);

template <typename Dtype>
Tensor<Dtype> add(Graph<Dtype>& g, const Tensor<Dtype>& a, const Tensor<Dtype>& b);

}  // namespace cstrip::ops

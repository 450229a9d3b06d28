#pragma once

#include <string>
#include <vector>

#include "contextstrip/autodiff/graph.hpp"
#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/core/rng.hpp"
#include "contextstrip/network/arch_config.hpp"
#include "contextstrip/network/model_params.hpp"

namespace cstrip::net {

struct ForwardOptions {
  ops::Mode mode = ops::Mode::Eval;
  /// Applied after every dense-layer convolution in train mode.
  double dropout = 0.0;
  /// Required when mode is Train and dropout > 0.
  Rng* rng = nullptr;
};

template <typename Dtype>
struct EncoderOutput {
  Tensor<Dtype> bottleneck;
  /// Pre-pool feature of every stage, shallowest first.
  std::vector<Tensor<Dtype>> skips;
};

template <typename Dtype>
struct ContextScaling {
  Tensor<Dtype> output;
  Tensor<Dtype> gamma;
};

template <typename Dtype>
struct ForwardOutput {
  /// [N, classes, H, W], softmax over classes.
  Tensor<Dtype> pixel_probs;
  /// [N, classes], independent sigmoids for class presence.
  Tensor<Dtype> class_probs;
  /// [N, Cb] channel gates applied to the fused bottleneck.
  Tensor<Dtype> gamma;
  /// [N, Cf] encoded global context.
  Tensor<Dtype> encoding;
};

/// Random initialization: fan-in scaled uniform convolutions and linears,
/// zero biases, unit batch-norm scale, unit-normal codewords, smoothing 1.
template <typename Dtype>
ModelParams<Dtype> init_params(const ArchConfig& cfg, std::uint64_t seed);

/// Registers the parameters of one dense block under `prefix` and returns
/// its output channel count.
template <typename Dtype>
std::int64_t add_dense_block_params(ModelParams<Dtype>& params, const std::string& prefix,
                                    std::int64_t in_channels, const ArchConfig& cfg, Rng& rng);

/// block_layers x (BN -> ReLU -> 3x3 conv -> dropout); every layer sees the
/// concatenation of the block input and all earlier layer outputs, and the
/// block returns that full concatenation.
template <typename Dtype>
Tensor<Dtype> dense_block_forward(Graph<Dtype>& g, const Tensor<Dtype>& x,
                                  const ModelParams<Dtype>& params, const std::string& prefix,
                                  const ArchConfig& cfg, const ForwardOptions& opts);

/// 2-D path over a single slice [N,1,H,W].
template <typename Dtype>
EncoderOutput<Dtype> encoder2d_forward(Graph<Dtype>& g, const Tensor<Dtype>& slice,
                                       const ModelParams<Dtype>& params, const ArchConfig& cfg,
                                       const ForwardOptions& opts);

/// Same stage structure over the sub-volume [N,D,H,W] with depth read as
/// channels. Exports no skips.
template <typename Dtype>
Tensor<Dtype> spatial_encoder_forward(Graph<Dtype>& g, const Tensor<Dtype>& subvol,
                                      const ModelParams<Dtype>& params, const ArchConfig& cfg,
                                      const ForwardOptions& opts);

/// Channel concat of both bottlenecks, then 1x1 conv + BN + ReLU back to the
/// 2-D path's channel count.
template <typename Dtype>
Tensor<Dtype> fuse_features(Graph<Dtype>& g, const Tensor<Dtype>& f2d, const Tensor<Dtype>& f3d,
                            const ModelParams<Dtype>& params, const ForwardOptions& opts);

/// e = sum_k ReLU(BN(E_k)) with E from ops::encoding_aggregate and the batch
/// norm taken over the K aggregates. Returns [N, Cf].
template <typename Dtype>
Tensor<Dtype> encoding_layer_forward(Graph<Dtype>& g, const Tensor<Dtype>& x,
                                     const ModelParams<Dtype>& params,
                                     const ForwardOptions& opts);

/// gamma = sigmoid(e W + b); output = x scaled channel-wise by gamma.
template <typename Dtype>
ContextScaling<Dtype> context_scaling(Graph<Dtype>& g, const Tensor<Dtype>& x,
                                      const Tensor<Dtype>& e, const Tensor<Dtype>& weights,
                                      const Tensor<Dtype>& bias);

template <typename Dtype>
Tensor<Dtype> sec_head(Graph<Dtype>& g, const Tensor<Dtype>& e, const ModelParams<Dtype>& params);

/// Upsample -> concat skip -> dense block -> 1x1 reduction, once per stage,
/// then a 1x1 classifier. Returns logits [N, classes, H, W].
template <typename Dtype>
Tensor<Dtype> decoder_forward(Graph<Dtype>& g, const Tensor<Dtype>& y,
                              const std::vector<Tensor<Dtype>>& skips,
                              const ModelParams<Dtype>& params, const ArchConfig& cfg,
                              const ForwardOptions& opts);

template <typename Dtype>
ForwardOutput<Dtype> model_forward(Graph<Dtype>& g, const Tensor<Dtype>& slice,
                                   const Tensor<Dtype>& subvol, const ModelParams<Dtype>& params,
                                   const ArchConfig& cfg, const ForwardOptions& opts);

}  // namespace cstrip::net

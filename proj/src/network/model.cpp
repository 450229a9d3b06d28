#include "contextstrip/network/model.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "contextstrip/core/error.hpp"

namespace cstrip::net {

namespace {

template <typename Dtype>
void add_conv(ModelParams<Dtype>& params, const std::string& prefix, std::int64_t out_channels,
              std::int64_t in_channels, std::int64_t kernel, Rng& rng, bool bias = true) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_channels * kernel * kernel));
  Tensor<Dtype> w({out_channels, in_channels, kernel, kernel});
  for (auto& v : w.mutable_data()) v = static_cast<Dtype>(rng.uniform(-bound, bound));
  params.add(prefix + ".weight", w);
  if (bias) params.add(prefix + ".bias", Tensor<Dtype>::full({out_channels}, Dtype(0)));
}

template <typename Dtype>
void add_linear(ModelParams<Dtype>& params, const std::string& prefix, std::int64_t in_features,
                std::int64_t out_features, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
  Tensor<Dtype> w({in_features, out_features});
  for (auto& v : w.mutable_data()) v = static_cast<Dtype>(rng.uniform(-bound, bound));
  params.add(prefix + ".weight", w);
  params.add(prefix + ".bias", Tensor<Dtype>::full({out_features}, Dtype(0)));
}

template <typename Dtype>
void add_bn(ModelParams<Dtype>& params, const std::string& prefix, std::int64_t channels) {
  params.add(prefix + ".scale", Tensor<Dtype>::full({channels}, Dtype(1)));
  params.add(prefix + ".shift", Tensor<Dtype>::full({channels}, Dtype(0)));
  params.add(prefix + ".running_mean", Tensor<Dtype>::full({channels}, Dtype(0)), false);
  params.add(prefix + ".running_var", Tensor<Dtype>::full({channels}, Dtype(1)), false);
}

template <typename Dtype>
void add_encoder_params(ModelParams<Dtype>& params, const std::string& path,
                        std::int64_t in_channels, const ArchConfig& cfg, Rng& rng) {
  std::int64_t c = in_channels;
  for (int s = 0; s < cfg.stages; ++s) {
    const std::string stage = path + ".s" + std::to_string(s);
    const std::int64_t block_out = add_dense_block_params(params, stage + ".block", c, cfg, rng);
    add_conv(params, stage + ".trans.conv", cfg.stage_channels(s), block_out, 1, rng, false);
    add_bn(params, stage + ".trans.bn", cfg.stage_channels(s));
    c = cfg.stage_channels(s);
  }
}

template <typename Dtype>
Tensor<Dtype> bn(Graph<Dtype>& g, const Tensor<Dtype>& x, const ModelParams<Dtype>& params,
                 const std::string& prefix, const ForwardOptions& opts) {
  return ops::batch_norm(g, x, params.at(prefix + ".scale"), params.at(prefix + ".shift"),
                         params.at(prefix + ".running_mean"), params.at(prefix + ".running_var"),
                         opts.mode);
}

template <typename Dtype>
Tensor<Dtype> conv(Graph<Dtype>& g, const Tensor<Dtype>& x, const ModelParams<Dtype>& params,
                   const std::string& prefix) {
  const std::string bias = prefix + ".bias";
  return ops::conv2d(g, x, params.at(prefix + ".weight"),
                     params.contains(bias) ? params.at(bias) : Tensor<Dtype>{});
}

/// 1x1 conv -> BN -> ReLU. The conv has no bias: batch norm would cancel it.
template <typename Dtype>
Tensor<Dtype> project(Graph<Dtype>& g, const Tensor<Dtype>& x, const ModelParams<Dtype>& params,
                      const std::string& prefix, const ForwardOptions& opts) {
  auto y = conv(g, x, params, prefix + ".conv");
  y = bn(g, y, params, prefix + ".bn", opts);
  return ops::relu(g, y);
}

/// Runs one stage, re-raising errors with the stage named.
template <typename F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ShapeError& e) {
    throw ShapeError(stage + ": " + e.what());
  } catch (const ValueError& e) {
    throw ValueError(stage + ": " + e.what());
  } catch (const NumericError& e) {
    throw NumericError(stage + ": " + e.what());
  }
}

template <typename Dtype>
void check_input(const Tensor<Dtype>& x, std::int64_t channels, const ArchConfig& cfg,
                 const char* what) {
  if (x.ndim() != 4) {
    throw ShapeError(std::string(what) + " must be [N,C,H,W], got " + shape_str(x.shape()));
  }
  if (x.dim(1) != channels) {
    throw ShapeError(std::string(what) + " axis 1 has " + std::to_string(x.dim(1)) +
                     " channels, expected " + std::to_string(channels));
  }
  for (int axis : {2, 3}) {
    if (x.dim(axis) % (std::int64_t{1} << cfg.stages) != 0) {
      throw ShapeError(std::string(what) + " extent " + std::to_string(x.dim(axis)) +
                       " on axis " + std::to_string(axis) + " is not divisible by 2^" +
                       std::to_string(cfg.stages));
    }
    if (x.dim(axis) != cfg.input_hw) {
      throw ShapeError(std::string(what) + " extent " + std::to_string(x.dim(axis)) +
                       " on axis " + std::to_string(axis) + " differs from input_hw " +
                       std::to_string(cfg.input_hw));
    }
  }
}

template <typename Dtype>
Tensor<Dtype> encoder_stages(Graph<Dtype>& g, Tensor<Dtype> x, const ModelParams<Dtype>& params,
                             const std::string& path, const ArchConfig& cfg,
                             const ForwardOptions& opts, std::vector<Tensor<Dtype>>* skips) {
  for (int s = 0; s < cfg.stages; ++s) {
    const std::string stage = path + ".s" + std::to_string(s);
    x = dense_block_forward(g, x, params, stage + ".block", cfg, opts);
    x = project(g, x, params, stage + ".trans", opts);
    if (skips) skips->push_back(x);
    x = ops::max_pool2d(g, x);
  }
  return x;
}

}  // namespace

template <typename Dtype>
std::int64_t add_dense_block_params(ModelParams<Dtype>& params, const std::string& prefix,
                                    std::int64_t in_channels, const ArchConfig& cfg, Rng& rng) {
  std::int64_t c = in_channels;
  for (int j = 0; j < cfg.block_layers; ++j) {
    const std::string layer = prefix + ".l" + std::to_string(j);
    add_bn(params, layer + ".bn", c);
    add_conv(params, layer + ".conv", cfg.growth_rate(), c, 3, rng, false);
    c += cfg.growth_rate();
  }
  return c;
}

template <typename Dtype>
ModelParams<Dtype> init_params(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelParams<Dtype> params;
  add_encoder_params(params, "enc2d", 1, cfg, rng);
  add_encoder_params(params, "enc3d", cfg.depth, cfg, rng);

  const std::int64_t cb = cfg.bottleneck_channels();
  add_conv(params, "fuse.conv", cb, 2 * cb, 1, rng, false);
  add_bn(params, "fuse.bn", cb);

  Tensor<Dtype> codewords({cfg.codewords, cb});
  for (auto& v : codewords.mutable_data()) v = static_cast<Dtype>(rng.normal());
  params.add("encoding.codewords", codewords);
  params.add("encoding.smoothing", Tensor<Dtype>::full({cfg.codewords}, Dtype(1)));
  add_bn(params, "encoding.bn", cfg.codewords);

  add_linear(params, "scale_fc", cb, cb, rng);
  add_linear(params, "sec_fc", cb, cfg.classes, rng);

  std::int64_t c = cb;
  for (int s = cfg.stages - 1; s >= 0; --s) {
    const std::string stage = "dec.s" + std::to_string(s);
    const std::int64_t block_out =
        add_dense_block_params(params, stage + ".block", c + cfg.stage_channels(s), cfg, rng);
    add_conv(params, stage + ".reduce.conv", cfg.stage_channels(s), block_out, 1, rng, false);
    add_bn(params, stage + ".reduce.bn", cfg.stage_channels(s));
    c = cfg.stage_channels(s);
  }
  add_conv(params, "classifier", cfg.classes, c, 1, rng);
  return params;
}

template <typename Dtype>
Tensor<Dtype> dense_block_forward(Graph<Dtype>& g, const Tensor<Dtype>& x,
                                  const ModelParams<Dtype>& params, const std::string& prefix,
                                  const ArchConfig& cfg, const ForwardOptions& opts) {
  const bool drop = opts.mode == ops::Mode::Train && opts.dropout > 0.0;
  if (drop && opts.rng == nullptr) {
    throw ValueError(prefix + ": dropout in train mode needs an rng");
  }
  std::vector<Tensor<Dtype>> features{x};
  Tensor<Dtype> current = x;
  for (int j = 0; j < cfg.block_layers; ++j) {
    const std::string layer = prefix + ".l" + std::to_string(j);
    auto y = bn(g, current, params, layer + ".bn", opts);
    y = ops::relu(g, y);
    y = conv(g, y, params, layer + ".conv");
    if (drop) y = ops::dropout(g, y, opts.dropout, opts.mode, *opts.rng);
    features.push_back(y);
    current = ops::concat(g, features);
  }
  return current;
}

template <typename Dtype>
EncoderOutput<Dtype> encoder2d_forward(Graph<Dtype>& g, const Tensor<Dtype>& slice,
                                       const ModelParams<Dtype>& params, const ArchConfig& cfg,
                                       const ForwardOptions& opts) {
  check_input(slice, 1, cfg, "encoder2d: slice");
  EncoderOutput<Dtype> out;
  out.bottleneck = encoder_stages(g, slice, params, "enc2d", cfg, opts, &out.skips);
  return out;
}

template <typename Dtype>
Tensor<Dtype> spatial_encoder_forward(Graph<Dtype>& g, const Tensor<Dtype>& subvol,
                                      const ModelParams<Dtype>& params, const ArchConfig& cfg,
                                      const ForwardOptions& opts) {
  if (subvol.ndim() == 4 && subvol.dim(1) != cfg.depth) {
    throw ShapeError("spatial_encoder: sub-volume depth (axis 1) is " +
                     std::to_string(subvol.dim(1)) + ", expected depth " +
                     std::to_string(cfg.depth));
  }
  check_input(subvol, cfg.depth, cfg, "spatial_encoder: sub-volume");
  return encoder_stages<Dtype>(g, subvol, params, "enc3d", cfg, opts, nullptr);
}

template <typename Dtype>
Tensor<Dtype> fuse_features(Graph<Dtype>& g, const Tensor<Dtype>& f2d, const Tensor<Dtype>& f3d,
                            const ModelParams<Dtype>& params, const ForwardOptions& opts) {
  if (f2d.ndim() != 4 || f3d.ndim() != 4) {
    throw ShapeError("fuse: inputs must be [N,C,h,w], got " + shape_str(f2d.shape()) + " and " +
                     shape_str(f3d.shape()));
  }
  for (int axis : {0, 2, 3}) {
    if (f2d.dim(axis) != f3d.dim(axis)) {
      throw ShapeError("fuse: extent mismatch on axis " + std::to_string(axis) + " (" +
                       std::to_string(f2d.dim(axis)) + " vs " + std::to_string(f3d.dim(axis)) +
                       ")");
    }
  }
  auto x = ops::concat(g, std::vector<Tensor<Dtype>>{f2d, f3d});
  return project(g, x, params, "fuse", opts);
}

template <typename Dtype>
Tensor<Dtype> encoding_layer_forward(Graph<Dtype>& g, const Tensor<Dtype>& x,
                                     const ModelParams<Dtype>& params,
                                     const ForwardOptions& opts) {
  const auto& codewords = params.at("encoding.codewords");
  if (codewords.ndim() != 2 || codewords.dim(0) < 1) {
    throw ValueError("encoding: needs at least one codeword, got codewords " +
                     shape_str(codewords.shape()));
  }
  auto agg = ops::encoding_aggregate(g, x, codewords, params.at("encoding.smoothing"));
  agg = bn(g, agg, params, "encoding.bn", opts);
  agg = ops::relu(g, agg);
  return ops::sum_axis1(g, agg);
}

template <typename Dtype>
ContextScaling<Dtype> context_scaling(Graph<Dtype>& g, const Tensor<Dtype>& x,
                                      const Tensor<Dtype>& e, const Tensor<Dtype>& weights,
                                      const Tensor<Dtype>& bias) {
  if (x.ndim() != 4) {
    throw ShapeError("context_scaling: features must be [N,C,h,w], got " + shape_str(x.shape()));
  }
  if (weights.ndim() == 2 && weights.dim(1) != x.dim(1)) {
    throw ShapeError("context_scaling: weights axis 1 has " + std::to_string(weights.dim(1)) +
                     ", features carry " + std::to_string(x.dim(1)) + " channels");
  }
  ContextScaling<Dtype> out;
  out.gamma = ops::sigmoid(g, ops::linear(g, e, weights, bias));
  out.output = ops::channel_scale(g, x, out.gamma);
  return out;
}

template <typename Dtype>
Tensor<Dtype> sec_head(Graph<Dtype>& g, const Tensor<Dtype>& e,
                       const ModelParams<Dtype>& params) {
  return ops::sigmoid(g, ops::linear(g, e, params.at("sec_fc.weight"), params.at("sec_fc.bias")));
}

template <typename Dtype>
Tensor<Dtype> decoder_forward(Graph<Dtype>& g, const Tensor<Dtype>& y,
                              const std::vector<Tensor<Dtype>>& skips,
                              const ModelParams<Dtype>& params, const ArchConfig& cfg,
                              const ForwardOptions& opts) {
  if (static_cast<int>(skips.size()) != cfg.stages) {
    throw ShapeError("decoder: expected " + std::to_string(cfg.stages) + " skips, got " +
                     std::to_string(skips.size()));
  }
  Tensor<Dtype> x = y;
  for (int s = cfg.stages - 1; s >= 0; --s) {
    const std::string stage = "dec.s" + std::to_string(s);
    x = ops::upsample2x(g, x);
    x = ops::concat(g, std::vector<Tensor<Dtype>>{x, skips[static_cast<std::size_t>(s)]});
    x = dense_block_forward(g, x, params, stage + ".block", cfg, opts);
    x = project(g, x, params, stage + ".reduce", opts);
  }
  return conv(g, x, params, "classifier");
}

template <typename Dtype>
ForwardOutput<Dtype> model_forward(Graph<Dtype>& g, const Tensor<Dtype>& slice,
                                   const Tensor<Dtype>& subvol, const ModelParams<Dtype>& params,
                                   const ArchConfig& cfg, const ForwardOptions& opts) {
  if (slice.ndim() == 4 && subvol.ndim() == 4 && slice.dim(0) != subvol.dim(0)) {
    throw ShapeError("model: slice batch " + std::to_string(slice.dim(0)) +
                     " differs from sub-volume batch " + std::to_string(subvol.dim(0)));
  }
  auto enc = in_stage("encoder2d", [&] { return encoder2d_forward(g, slice, params, cfg, opts); });
  auto f3d = in_stage("spatial_encoder",
                      [&] { return spatial_encoder_forward(g, subvol, params, cfg, opts); });
  auto fused =
      in_stage("fuse", [&] { return fuse_features(g, enc.bottleneck, f3d, params, opts); });
  auto e = in_stage("encoding", [&] { return encoding_layer_forward(g, fused, params, opts); });
  auto scaled = in_stage("context_scaling", [&] {
    return context_scaling(g, fused, e, params.at("scale_fc.weight"), params.at("scale_fc.bias"));
  });
  auto logits =
      in_stage("decoder", [&] { return decoder_forward(g, scaled.output, enc.skips, params, cfg, opts); });

  ForwardOutput<Dtype> out;
  out.pixel_probs = ops::softmax(g, logits);
  out.class_probs = in_stage("sec_head", [&] { return sec_head(g, e, params); });
  out.gamma = scaled.gamma;
  out.encoding = e;
  return out;
}

#define CSTRIP_INSTANTIATE(Dtype)                                                                \
  template ModelParams<Dtype> init_params<Dtype>(const ArchConfig&, std::uint64_t);              \
  template std::int64_t add_dense_block_params(ModelParams<Dtype>&, const std::string&,          \
                                               std::int64_t, const ArchConfig&, Rng&);           \
  template Tensor<Dtype> dense_block_forward(Graph<Dtype>&, const Tensor<Dtype>&,               \
                                             const ModelParams<Dtype>&, const std::string&,      \
                                             const ArchConfig&, const ForwardOptions&);          \
  template EncoderOutput<Dtype> encoder2d_forward(Graph<Dtype>&, const Tensor<Dtype>&,          \
                                                  const ModelParams<Dtype>&, const ArchConfig&,  \
                                                  const ForwardOptions&);                        \
  template Tensor<Dtype> spatial_encoder_forward(Graph<Dtype>&, const Tensor<Dtype>&,           \
                                                 const ModelParams<Dtype>&, const ArchConfig&,   \
                                                 const ForwardOptions&);                         \
  template Tensor<Dtype> fuse_features(Graph<Dtype>&, const Tensor<Dtype>&, const Tensor<Dtype>&, \
                                       const ModelParams<Dtype>&, const ForwardOptions&);        \
  template Tensor<Dtype> encoding_layer_forward(Graph<Dtype>&, const Tensor<Dtype>&,            \
                                                const ModelParams<Dtype>&, const ForwardOptions&); \
  template ContextScaling<Dtype> context_scaling(Graph<Dtype>&, const Tensor<Dtype>&,           \
                                                 const Tensor<Dtype>&, const Tensor<Dtype>&,     \
                                                 const Tensor<Dtype>&);                          \
  template Tensor<Dtype> sec_head(Graph<Dtype>&, const Tensor<Dtype>&, const ModelParams<Dtype>&); \
  template Tensor<Dtype> decoder_forward(Graph<Dtype>&, const Tensor<Dtype>&,                   \
                                         const std::vector<Tensor<Dtype>>&,                      \
                                         const ModelParams<Dtype>&, const ArchConfig&,           \
                                         const ForwardOptions&);                                 \
  template ForwardOutput<Dtype> model_forward(Graph<Dtype>&, const Tensor<Dtype>&,              \
                                              const Tensor<Dtype>&, const ModelParams<Dtype>&,   \
                                              const ArchConfig&, const ForwardOptions&);

CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)

}  // namespace cstrip::net

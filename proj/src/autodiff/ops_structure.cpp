#include <memory>
#include <vector>

#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/kernels/encoding.hpp"
#include "op_support.hpp"

namespace cstrip::ops {

using detail::axis_mismatch;
using detail::grad_target;
using detail::require_rank;

template <typename Dtype>
Tensor<Dtype> concat(Graph<Dtype>& g, const std::vector<Tensor<Dtype>>& inputs) {
  if (inputs.empty()) throw ShapeError("concat: no inputs");
  const auto& first = inputs.front();
  if (first.ndim() < 2) throw ShapeError("concat: inputs need rank >= 2");
  const std::int64_t N = first.dim(0);
  const std::int64_t inner = first.numel() / (N * first.dim(1));
  std::int64_t channels = 0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& in = inputs[t];
    if (in.ndim() != first.ndim()) {
      throw ShapeError("concat: input " + std::to_string(t) + " has rank " +
                       std::to_string(in.ndim()) + ", expected " + std::to_string(first.ndim()));
    }
    for (int a = 0; a < first.ndim(); ++a) {
      if (a != 1 && in.dim(a) != first.dim(a)) {
        throw ShapeError(axis_mismatch("concat", "input " + std::to_string(t), a, in.dim(a),
                                       first.dim(a)));
      }
    }
    channels += in.dim(1);
  }
  if (inputs.size() == 1) return first;

  Shape out_shape = first.shape();
  out_shape[1] = channels;
  Tensor<Dtype> out(out_shape);
  auto y = out.mutable_data();
  for (std::int64_t n = 0; n < N; ++n) {
    std::int64_t offset = 0;
    for (const auto& in : inputs) {
      const std::int64_t block = in.dim(1) * inner;
      auto x = in.data();
      std::copy_n(x.data() + n * block, block, y.data() + (n * channels * inner) + offset);
      offset += block;
    }
  }

  if (g.tracks_any(inputs)) {
    g.record("concat", inputs, out, [inputs, out, N, channels, inner]() {
      auto go = out.grad();
      std::int64_t offset = 0;
      for (const auto& in : inputs) {
        const std::int64_t block = in.dim(1) * inner;
        if (auto gx = grad_target(in); !gx.empty()) {
          for (std::int64_t n = 0; n < N; ++n) {
            const Dtype* src = go.data() + n * channels * inner + offset;
            Dtype* dst = gx.data() + n * block;
            for (std::int64_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        offset += block;
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> upsample2x(Graph<Dtype>& g, const Tensor<Dtype>& input) {
  require_rank(input, 4, "upsample2x", "input");
  const std::int64_t planes = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  Tensor<Dtype> out({input.dim(0), input.dim(1), 2 * h, 2 * w});
  auto x = input.data();
  auto y = out.mutable_data();
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const Dtype* src = x.data() + p * h * w;
    Dtype* dst = y.data() + p * 4 * h * w;
    for (std::int64_t r = 0; r < 2 * h; ++r)
      for (std::int64_t c = 0; c < 2 * w; ++c) dst[r * 2 * w + c] = src[(r / 2) * w + c / 2];
  }

  if (g.tracks(input)) {
    g.record("upsample2x", {input}, out, [planes, h, w, input, out]() {
      auto go = out.grad();
      auto gx = input.mutable_grad();
#pragma omp parallel for schedule(static)
      for (std::int64_t p = 0; p < planes; ++p) {
        const Dtype* src = go.data() + p * 4 * h * w;
        Dtype* dst = gx.data() + p * h * w;
        for (std::int64_t r = 0; r < h; ++r)
          for (std::int64_t c = 0; c < w; ++c) {
            const Dtype* q = src + 2 * r * 2 * w + 2 * c;
            dst[r * w + c] += (q[0] + q[1]) + (q[2 * w] + q[2 * w + 1]);
          }
      }
    });
  }
  return out;
}

template <typename Dtype>
Tensor<Dtype> encoding_aggregate(Graph<Dtype>& g, const Tensor<Dtype>& input,
                                 const Tensor<Dtype>& codewords, const Tensor<Dtype>& smoothing) {
  require_rank(input, 4, "encoding", "input");
  require_rank(codewords, 2, "encoding", "codewords");
  require_rank(smoothing, 1, "encoding", "smoothing");
  const kernels::EncodingGeometry geo{input.dim(0), input.dim(1), input.dim(2) * input.dim(3),
                                      codewords.dim(0)};
  if (codewords.dim(1) != geo.channels) {
    throw ShapeError(axis_mismatch("encoding", "codewords", 1, codewords.dim(1), geo.channels));
  }
  if (smoothing.dim(0) != geo.codewords) {
    throw ShapeError(axis_mismatch("encoding", "smoothing", 0, smoothing.dim(0), geo.codewords));
  }

  Tensor<Dtype> out({geo.batch, geo.codewords, geo.channels});
  auto assign = std::make_shared<std::vector<Dtype>>(
      static_cast<std::size_t>(geo.batch * geo.positions * geo.codewords));
  kernels::encoding_forward<Dtype>(geo, input.data(), codewords.data(), smoothing.data(), *assign,
                                   out.mutable_data());

  if (g.tracks(input, codewords, smoothing)) {
    g.record("encoding", {input, codewords, smoothing}, out,
             [geo, input, codewords, smoothing, out, assign]() {
               kernels::encoding_backward<Dtype>(geo, out.grad(), input.data(), codewords.data(),
                                                 smoothing.data(), *assign, grad_target(input),
                                                 grad_target(codewords), grad_target(smoothing));
             });
  }
  return out;
}

#define CSTRIP_INSTANTIATE(Dtype)                                                              \
  template Tensor<Dtype> concat(Graph<Dtype>&, const std::vector<Tensor<Dtype>>&);            \
  template Tensor<Dtype> upsample2x(Graph<Dtype>&, const Tensor<Dtype>&);                     \
  template Tensor<Dtype> encoding_aggregate(Graph<Dtype>&, const Tensor<Dtype>&,              \
                                            const Tensor<Dtype>&, const Tensor<Dtype>&);

CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)

}  // namespace cstrip::ops

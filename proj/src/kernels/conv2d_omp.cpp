#include <algorithm>

#include "contextstrip/kernels/conv2d.hpp"

namespace cstrip::kernels {

namespace {

// Output rows/cols [lo, hi) for which input index o + k - pad stays inside
// [0, extent).
struct Range {
  std::int64_t lo;
  std::int64_t hi;
};

Range valid_outputs(std::int64_t k, std::int64_t pad, std::int64_t in_extent,
                    std::int64_t out_extent) {
  const std::int64_t shift = k - pad;
  return {std::max<std::int64_t>(0, -shift),
          std::min<std::int64_t>(out_extent, in_extent - shift)};
}

}  // namespace

template <typename Dtype>
void conv2d_forward(const Conv2dGeometry& g, std::span<const Dtype> input,
                    std::span<const Dtype> kernel, std::span<const Dtype> bias,
                    std::span<Dtype> output) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  const std::int64_t in_plane = g.in_h * g.in_w, out_plane = oh * ow;
  const std::int64_t kplane = g.kernel_h * g.kernel_w;

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t co = 0; co < g.out_channels; ++co) {
      Dtype* out = output.data() + (n * g.out_channels + co) * out_plane;
      const Dtype b = bias.empty() ? Dtype(0) : bias[static_cast<std::size_t>(co)];
      std::fill(out, out + out_plane, b);
      for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
        const Dtype* in = input.data() + (n * g.in_channels + ci) * in_plane;
        const Dtype* w = kernel.data() + (co * g.in_channels + ci) * kplane;
        for (std::int64_t kh = 0; kh < g.kernel_h; ++kh) {
          const Range rows = valid_outputs(kh, g.pad_h, g.in_h, oh);
          for (std::int64_t kw = 0; kw < g.kernel_w; ++kw) {
            const Range cols = valid_outputs(kw, g.pad_w, g.in_w, ow);
            const Dtype wv = w[kh * g.kernel_w + kw];
            const std::int64_t dh = kh - g.pad_h, dw = kw - g.pad_w;
            for (std::int64_t r = rows.lo; r < rows.hi; ++r) {
              Dtype* orow = out + r * ow;
              const Dtype* irow = in + (r + dh) * g.in_w + dw;
              for (std::int64_t c = cols.lo; c < cols.hi; ++c) orow[c] += wv * irow[c];
            }
          }
        }
      }
    }
  }
}

template <typename Dtype>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                           std::span<const Dtype> kernel, std::span<Dtype> grad_input) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  const std::int64_t in_plane = g.in_h * g.in_w, out_plane = oh * ow;
  const std::int64_t kplane = g.kernel_h * g.kernel_w;

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
      Dtype* gin = grad_input.data() + (n * g.in_channels + ci) * in_plane;
      for (std::int64_t co = 0; co < g.out_channels; ++co) {
        const Dtype* gout = grad_output.data() + (n * g.out_channels + co) * out_plane;
        const Dtype* w = kernel.data() + (co * g.in_channels + ci) * kplane;
        for (std::int64_t kh = 0; kh < g.kernel_h; ++kh) {
          const Range rows = valid_outputs(kh, g.pad_h, g.in_h, oh);
          for (std::int64_t kw = 0; kw < g.kernel_w; ++kw) {
            const Range cols = valid_outputs(kw, g.pad_w, g.in_w, ow);
            const Dtype wv = w[kh * g.kernel_w + kw];
            const std::int64_t dh = kh - g.pad_h, dw = kw - g.pad_w;
            for (std::int64_t r = rows.lo; r < rows.hi; ++r) {
              const Dtype* grow = gout + r * ow;
              Dtype* irow = gin + (r + dh) * g.in_w + dw;
              for (std::int64_t c = cols.lo; c < cols.hi; ++c) irow[c] += wv * grow[c];
            }
          }
        }
      }
    }
  }
}

template <typename Dtype>
void conv2d_backward_params(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                            std::span<const Dtype> input, std::span<Dtype> grad_kernel,
                            std::span<Dtype> grad_bias) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  const std::int64_t in_plane = g.in_h * g.in_w, out_plane = oh * ow;
  const std::int64_t kplane = g.kernel_h * g.kernel_w;

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t co = 0; co < g.out_channels; ++co) {
    for (std::int64_t ci = 0; ci < g.in_channels; ++ci) {
      Dtype* gw = grad_kernel.data() + (co * g.in_channels + ci) * kplane;
      for (std::int64_t kh = 0; kh < g.kernel_h; ++kh) {
        const Range rows = valid_outputs(kh, g.pad_h, g.in_h, oh);
        for (std::int64_t kw = 0; kw < g.kernel_w; ++kw) {
          const Range cols = valid_outputs(kw, g.pad_w, g.in_w, ow);
          const std::int64_t dh = kh - g.pad_h, dw = kw - g.pad_w;
          Dtype acc = 0;
          for (std::int64_t n = 0; n < g.batch; ++n) {
            const Dtype* gout = grad_output.data() + (n * g.out_channels + co) * out_plane;
            const Dtype* in = input.data() + (n * g.in_channels + ci) * in_plane;
            for (std::int64_t r = rows.lo; r < rows.hi; ++r) {
              const Dtype* grow = gout + r * ow;
              const Dtype* irow = in + (r + dh) * g.in_w + dw;
              Dtype row_acc = 0;
              for (std::int64_t c = cols.lo; c < cols.hi; ++c) row_acc += grow[c] * irow[c];
              acc += row_acc;
            }
          }
          gw[kh * g.kernel_w + kw] += acc;
        }
      }
    }
  }

  if (grad_bias.empty()) return;
#pragma omp parallel for schedule(static)
  for (std::int64_t co = 0; co < g.out_channels; ++co) {
    Dtype acc = 0;
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const Dtype* gout = grad_output.data() + (n * g.out_channels + co) * out_plane;
      for (std::int64_t i = 0; i < out_plane; ++i) acc += gout[i];
    }
    grad_bias[static_cast<std::size_t>(co)] += acc;
  }
}

#define CSTRIP_INSTANTIATE_CONV(Dtype)                                                        \
  template void conv2d_forward<Dtype>(const Conv2dGeometry&, std::span<const Dtype>,        \
                                      std::span<const Dtype>, std::span<const Dtype>,        \
                                      std::span<Dtype>);                                     \
  template void conv2d_backward_input<Dtype>(const Conv2dGeometry&, std::span<const Dtype>, \
                                             std::span<const Dtype>, std::span<Dtype>);     \
  template void conv2d_backward_params<Dtype>(const Conv2dGeometry&, std::span<const Dtype>, \
                                              std::span<const Dtype>, std::span<Dtype>,      \
                                              std::span<Dtype>);

CSTRIP_INSTANTIATE_CONV(float)
CSTRIP_INSTANTIATE_CONV(double)

}  // namespace cstrip::kernels

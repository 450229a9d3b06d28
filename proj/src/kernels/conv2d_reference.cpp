#include "contextstrip/kernels/conv2d.hpp"

namespace cstrip::kernels::reference {

namespace {

std::int64_t idx4(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d, std::int64_t B,
                  std::int64_t C, std::int64_t D) {
  return ((a * B + b) * C + c) * D + d;
}

}  // namespace

template <typename Dtype>
void conv2d_forward(const Conv2dGeometry& g, std::span<const Dtype> input,
                    std::span<const Dtype> kernel, std::span<const Dtype> bias,
                    std::span<Dtype> output) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  for (std::int64_t n = 0; n < g.batch; ++n)
    for (std::int64_t co = 0; co < g.out_channels; ++co)
      for (std::int64_t y = 0; y < oh; ++y)
        for (std::int64_t x = 0; x < ow; ++x) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[co]);
          for (std::int64_t ci = 0; ci < g.in_channels; ++ci)
            for (std::int64_t kh = 0; kh < g.kernel_h; ++kh)
              for (std::int64_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::int64_t iy = y + kh - g.pad_h, ix = x + kw - g.pad_w;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc += static_cast<double>(
                           input[idx4(n, ci, iy, ix, g.in_channels, g.in_h, g.in_w)]) *
                       static_cast<double>(
                           kernel[idx4(co, ci, kh, kw, g.in_channels, g.kernel_h, g.kernel_w)]);
              }
          output[idx4(n, co, y, x, g.out_channels, oh, ow)] = static_cast<Dtype>(acc);
        }
}

template <typename Dtype>
void conv2d_backward_input(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                           std::span<const Dtype> kernel, std::span<Dtype> grad_input) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  for (std::int64_t n = 0; n < g.batch; ++n)
    for (std::int64_t ci = 0; ci < g.in_channels; ++ci)
      for (std::int64_t iy = 0; iy < g.in_h; ++iy)
        for (std::int64_t ix = 0; ix < g.in_w; ++ix) {
          double acc = 0.0;
          for (std::int64_t co = 0; co < g.out_channels; ++co)
            for (std::int64_t kh = 0; kh < g.kernel_h; ++kh)
              for (std::int64_t kw = 0; kw < g.kernel_w; ++kw) {
                const std::int64_t y = iy - kh + g.pad_h, x = ix - kw + g.pad_w;
                if (y < 0 || y >= oh || x < 0 || x >= ow) continue;
                acc += static_cast<double>(grad_output[idx4(n, co, y, x, g.out_channels, oh, ow)]) *
                       static_cast<double>(
                           kernel[idx4(co, ci, kh, kw, g.in_channels, g.kernel_h, g.kernel_w)]);
              }
          grad_input[idx4(n, ci, iy, ix, g.in_channels, g.in_h, g.in_w)] +=
              static_cast<Dtype>(acc);
        }
}

template <typename Dtype>
void conv2d_backward_params(const Conv2dGeometry& g, std::span<const Dtype> grad_output,
                            std::span<const Dtype> input, std::span<Dtype> grad_kernel,
                            std::span<Dtype> grad_bias) {
  const std::int64_t oh = g.out_h(), ow = g.out_w();
  for (std::int64_t co = 0; co < g.out_channels; ++co)
    for (std::int64_t ci = 0; ci < g.in_channels; ++ci)
      for (std::int64_t kh = 0; kh < g.kernel_h; ++kh)
        for (std::int64_t kw = 0; kw < g.kernel_w; ++kw) {
          double acc = 0.0;
          for (std::int64_t n = 0; n < g.batch; ++n)
            for (std::int64_t y = 0; y < oh; ++y)
              for (std::int64_t x = 0; x < ow; ++x) {
                const std::int64_t iy = y + kh - g.pad_h, ix = x + kw - g.pad_w;
                if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
                acc += static_cast<double>(grad_output[idx4(n, co, y, x, g.out_channels, oh, ow)]) *
                       static_cast<double>(input[idx4(n, ci, iy, ix, g.in_channels, g.in_h, g.in_w)]);
              }
          grad_kernel[idx4(co, ci, kh, kw, g.in_channels, g.kernel_h, g.kernel_w)] +=
              static_cast<Dtype>(acc);
        }
  if (grad_bias.empty()) return;
  for (std::int64_t co = 0; co < g.out_channels; ++co) {
    double acc = 0.0;
    for (std::int64_t n = 0; n < g.batch; ++n)
      for (std::int64_t i = 0; i < oh * ow; ++i)
        acc += static_cast<double>(grad_output[(n * g.out_channels + co) * oh * ow + i]);
    grad_bias[co] += static_cast<Dtype>(acc);
  }
}

template void conv2d_forward<float>(const Conv2dGeometry&, std::span<const float>,
                                    std::span<const float>, std::span<const float>,
                                    std::span<float>);
template void conv2d_forward<double>(const Conv2dGeometry&, std::span<const double>,
                                     std::span<const double>, std::span<const double>,
                                     std::span<double>);
template void conv2d_backward_input<float>(const Conv2dGeometry&, std::span<const float>,
                                           std::span<const float>, std::span<float>);
template void conv2d_backward_input<double>(const Conv2dGeometry&, std::span<const double>,
                                            std::span<const double>, std::span<double>);
template void conv2d_backward_params<float>(const Conv2dGeometry&, std::span<const float>,
                                            std::span<const float>, std::span<float>,
                                            std::span<float>);
template void conv2d_backward_params<double>(const Conv2dGeometry&, std::span<const double>,
                                             std::span<const double>, std::span<double>,
                                             std::span<double>);

}  // namespace cstrip::kernels::reference

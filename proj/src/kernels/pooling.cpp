#include "contextstrip/kernels/pooling.hpp"

namespace cstrip::kernels {

template <typename Dtype>
void max_pool2x2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                         std::span<const Dtype> input, std::span<Dtype> output,
                         std::span<std::int32_t> argmax) {
  const std::int64_t oh = h / 2, ow = w / 2;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const Dtype* in = input.data() + p * h * w;
    Dtype* out = output.data() + p * oh * ow;
    std::int32_t* arg = argmax.data() + p * oh * ow;
    for (std::int64_t r = 0; r < oh; ++r) {
      const Dtype* top = in + 2 * r * w;
      const Dtype* bottom = top + w;
      for (std::int64_t c = 0; c < ow; ++c) {
        std::int64_t best = 2 * r * w + 2 * c;
        Dtype value = top[2 * c];
        if (top[2 * c + 1] > value) value = top[2 * c + 1], best = 2 * r * w + 2 * c + 1;
        if (bottom[2 * c] > value) value = bottom[2 * c], best = (2 * r + 1) * w + 2 * c;
        if (bottom[2 * c + 1] > value) value = bottom[2 * c + 1], best = (2 * r + 1) * w + 2 * c + 1;
        out[r * ow + c] = value;
        arg[r * ow + c] = static_cast<std::int32_t>(best);
      }
    }
  }
}

template <typename Dtype>
void max_pool2x2_backward(std::int64_t planes, std::int64_t h, std::int64_t w,
                          std::span<const Dtype> grad_output, std::span<const std::int32_t> argmax,
                          std::span<Dtype> grad_input) {
  const std::int64_t out_plane = (h / 2) * (w / 2);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    Dtype* gin = grad_input.data() + p * h * w;
    const Dtype* gout = grad_output.data() + p * out_plane;
    const std::int32_t* arg = argmax.data() + p * out_plane;
    for (std::int64_t i = 0; i < out_plane; ++i) gin[arg[i]] += gout[i];
  }
}

namespace reference {

template <typename Dtype>
void max_pool2x2_forward(std::int64_t planes, std::int64_t h, std::int64_t w,
                         std::span<const Dtype> input, std::span<Dtype> output,
                         std::span<std::int32_t> argmax) {
  const std::int64_t oh = h / 2, ow = w / 2;
  for (std::int64_t p = 0; p < planes; ++p)
    for (std::int64_t r = 0; r < oh; ++r)
      for (std::int64_t c = 0; c < ow; ++c) {
        std::int64_t best = -1;
        for (std::int64_t dr = 0; dr < 2; ++dr)
          for (std::int64_t dc = 0; dc < 2; ++dc) {
            const std::int64_t idx = (2 * r + dr) * w + (2 * c + dc);
            if (best < 0 || input[p * h * w + idx] > input[p * h * w + best]) best = idx;
          }
        output[p * oh * ow + r * ow + c] = input[p * h * w + best];
        argmax[p * oh * ow + r * ow + c] = static_cast<std::int32_t>(best);
      }
}

}  // namespace reference

template void max_pool2x2_forward<float>(std::int64_t, std::int64_t, std::int64_t,
                                         std::span<const float>, std::span<float>,
                                         std::span<std::int32_t>);
template void max_pool2x2_forward<double>(std::int64_t, std::int64_t, std::int64_t,
                                          std::span<const double>, std::span<double>,
                                          std::span<std::int32_t>);
template void max_pool2x2_backward<float>(std::int64_t, std::int64_t, std::int64_t,
                                          std::span<const float>, std::span<const std::int32_t>,
                                          std::span<float>);
template void max_pool2x2_backward<double>(std::int64_t, std::int64_t, std::int64_t,
                                           std::span<const double>,
                                           std::span<const std::int32_t>, std::span<double>);
template void reference::max_pool2x2_forward<float>(std::int64_t, std::int64_t, std::int64_t,
                                                    std::span<const float>, std::span<float>,
                                                    std::span<std::int32_t>);
template void reference::max_pool2x2_forward<double>(std::int64_t, std::int64_t, std::int64_t,
                                                     std::span<const double>, std::span<double>,
                                                     std::span<std::int32_t>);

}  // namespace cstrip::kernels

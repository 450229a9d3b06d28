#include "contextstrip/kernels/batch_norm.hpp"

#include <cmath>

#include "contextstrip/core/accumulate.hpp"

namespace cstrip::kernels {

template <typename Dtype>
void batch_norm_train_forward(const BatchNormGeometry& g, std::span<const Dtype> input,
                              std::span<const Dtype> scale, std::span<const Dtype> shift,
                              double eps, std::span<double> mean, std::span<double> var,
                              std::span<Dtype> xhat, std::span<Dtype> output) {
  const double count = static_cast<double>(g.count());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < g.channels; ++c) {
    CompensatedSum sum;
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const Dtype* x = input.data() + (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) sum += static_cast<double>(x[i]);
    }
    const double mu = sum.value() / count;
    CompensatedSum sq;
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const Dtype* x = input.data() + (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const double d = static_cast<double>(x[i]) - mu;
        sq += d * d;
      }
    }
    const double v = sq.value() / count;
    mean[c] = mu;
    var[c] = v;
    const double inv_std = 1.0 / std::sqrt(v + eps);
    const Dtype gamma = scale[c], beta = shift[c];
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const std::int64_t base = (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const Dtype h = static_cast<Dtype>((static_cast<double>(input[base + i]) - mu) * inv_std);
        xhat[base + i] = h;
        output[base + i] = gamma * h + beta;
      }
    }
  }
}

template <typename Dtype>
void batch_norm_eval_forward(const BatchNormGeometry& g, std::span<const Dtype> input,
                             std::span<const Dtype> scale, std::span<const Dtype> shift,
                             std::span<const Dtype> running_mean,
                             std::span<const Dtype> running_var, double eps,
                             std::span<Dtype> xhat, std::span<Dtype> output) {
#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t c = 0; c < g.channels; ++c) {
      const double mu = running_mean[c];
      const double inv_std = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
      const std::int64_t base = (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const Dtype h = static_cast<Dtype>((static_cast<double>(input[base + i]) - mu) * inv_std);
        xhat[base + i] = h;
        output[base + i] = scale[c] * h + shift[c];
      }
    }
  }
}

template <typename Dtype>
void batch_norm_train_backward(const BatchNormGeometry& g, std::span<const Dtype> grad_output,
                               std::span<const Dtype> xhat, std::span<const Dtype> scale,
                               std::span<const double> var, double eps,
                               std::span<Dtype> grad_input, std::span<Dtype> grad_scale,
                               std::span<Dtype> grad_shift) {
  const double count = static_cast<double>(g.count());
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < g.channels; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const std::int64_t base = (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) {
        sum_g += static_cast<double>(grad_output[base + i]);
        sum_gx += static_cast<double>(grad_output[base + i]) * static_cast<double>(xhat[base + i]);
      }
    }
    if (!grad_scale.empty()) grad_scale[c] += static_cast<Dtype>(sum_gx);
    if (!grad_shift.empty()) grad_shift[c] += static_cast<Dtype>(sum_g);
    if (grad_input.empty()) continue;
    // dx = gamma / sigma * (dy - mean(dy) - xhat * mean(dy * xhat))
    const double k = static_cast<double>(scale[c]) / std::sqrt(var[c] + eps);
    const double mean_g = sum_g / count, mean_gx = sum_gx / count;
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const std::int64_t base = (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) {
        grad_input[base + i] += static_cast<Dtype>(
            k * (static_cast<double>(grad_output[base + i]) - mean_g -
                 static_cast<double>(xhat[base + i]) * mean_gx));
      }
    }
  }
}

template <typename Dtype>
void batch_norm_eval_backward(const BatchNormGeometry& g, std::span<const Dtype> grad_output,
                              std::span<const Dtype> xhat, std::span<const Dtype> scale,
                              std::span<const Dtype> running_var, double eps,
                              std::span<Dtype> grad_input, std::span<Dtype> grad_scale,
                              std::span<Dtype> grad_shift) {
#pragma omp parallel for schedule(static)
  for (std::int64_t c = 0; c < g.channels; ++c) {
    double sum_g = 0.0, sum_gx = 0.0;
    const double k = static_cast<double>(scale[c]) /
                     std::sqrt(static_cast<double>(running_var[c]) + eps);
    for (std::int64_t n = 0; n < g.batch; ++n) {
      const std::int64_t base = (n * g.channels + c) * g.inner;
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const double go = static_cast<double>(grad_output[base + i]);
        sum_g += go;
        sum_gx += go * static_cast<double>(xhat[base + i]);
        if (!grad_input.empty()) grad_input[base + i] += static_cast<Dtype>(k * go);
      }
    }
    if (!grad_scale.empty()) grad_scale[c] += static_cast<Dtype>(sum_gx);
    if (!grad_shift.empty()) grad_shift[c] += static_cast<Dtype>(sum_g);
  }
}

namespace reference {

template <typename Dtype>
void batch_norm_train_forward(const BatchNormGeometry& g, std::span<const Dtype> input,
                              std::span<const Dtype> scale, std::span<const Dtype> shift,
                              double eps, std::span<double> mean, std::span<double> var,
                              std::span<Dtype> xhat, std::span<Dtype> output) {
  auto at = [&](std::int64_t n, std::int64_t c, std::int64_t i) {
    return (n * g.channels + c) * g.inner + i;
  };
  for (std::int64_t c = 0; c < g.channels; ++c) {
    double sum = 0.0;
    for (std::int64_t n = 0; n < g.batch; ++n)
      for (std::int64_t i = 0; i < g.inner; ++i) sum += input[at(n, c, i)];
    const double mu = sum / static_cast<double>(g.count());
    double sq = 0.0;
    for (std::int64_t n = 0; n < g.batch; ++n)
      for (std::int64_t i = 0; i < g.inner; ++i) sq += (input[at(n, c, i)] - mu) * (input[at(n, c, i)] - mu);
    mean[c] = mu;
    var[c] = sq / static_cast<double>(g.count());
    for (std::int64_t n = 0; n < g.batch; ++n)
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const double h = (input[at(n, c, i)] - mu) / std::sqrt(var[c] + eps);
        xhat[at(n, c, i)] = static_cast<Dtype>(h);
        output[at(n, c, i)] = static_cast<Dtype>(scale[c] * h + shift[c]);
      }
  }
}

template <typename Dtype>
void batch_norm_train_backward(const BatchNormGeometry& g, std::span<const Dtype> grad_output,
                               std::span<const Dtype> xhat, std::span<const Dtype> scale,
                               std::span<const double> var, double eps,
                               std::span<Dtype> grad_input, std::span<Dtype> grad_scale,
                               std::span<Dtype> grad_shift) {
  // Textbook form: differentiate through mean and variance separately.
  const double m = static_cast<double>(g.count());
  auto at = [&](std::int64_t n, std::int64_t c, std::int64_t i) {
    return (n * g.channels + c) * g.inner + i;
  };
  for (std::int64_t c = 0; c < g.channels; ++c) {
    const double sigma = std::sqrt(var[c] + eps);
    double dvar = 0.0, dmean = 0.0, dgamma = 0.0, dbeta = 0.0;
    for (std::int64_t n = 0; n < g.batch; ++n)
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const double dxhat = grad_output[at(n, c, i)] * static_cast<double>(scale[c]);
        const double centered = xhat[at(n, c, i)] * sigma;
        dvar += dxhat * centered * -0.5 / (sigma * sigma * sigma);
        dmean += -dxhat / sigma;
        dgamma += grad_output[at(n, c, i)] * static_cast<double>(xhat[at(n, c, i)]);
        dbeta += grad_output[at(n, c, i)];
      }
    // The centered values sum to zero, so dmean has no variance term.
    for (std::int64_t n = 0; n < g.batch; ++n)
      for (std::int64_t i = 0; i < g.inner; ++i) {
        const double dxhat = grad_output[at(n, c, i)] * static_cast<double>(scale[c]);
        const double centered = xhat[at(n, c, i)] * sigma;
        if (!grad_input.empty())
          grad_input[at(n, c, i)] +=
              static_cast<Dtype>(dxhat / sigma + dvar * 2.0 * centered / m + dmean / m);
      }
    if (!grad_scale.empty()) grad_scale[c] += static_cast<Dtype>(dgamma);
    if (!grad_shift.empty()) grad_shift[c] += static_cast<Dtype>(dbeta);
  }
}

}  // namespace reference

#define CSTRIP_INSTANTIATE_BN(Dtype)                                                            \
  template void batch_norm_train_forward<Dtype>(                                               \
      const BatchNormGeometry&, std::span<const Dtype>, std::span<const Dtype>,                 \
      std::span<const Dtype>, double, std::span<double>, std::span<double>, std::span<Dtype>,  \
      std::span<Dtype>);                                                                        \
  template void batch_norm_eval_forward<Dtype>(                                                \
      const BatchNormGeometry&, std::span<const Dtype>, std::span<const Dtype>,                 \
      std::span<const Dtype>, std::span<const Dtype>, std::span<const Dtype>, double,           \
      std::span<Dtype>, std::span<Dtype>);                                                      \
  template void batch_norm_train_backward<Dtype>(                                              \
      const BatchNormGeometry&, std::span<const Dtype>, std::span<const Dtype>,                 \
      std::span<const Dtype>, std::span<const double>, double, std::span<Dtype>,                \
      std::span<Dtype>, std::span<Dtype>);                                                      \
  template void batch_norm_eval_backward<Dtype>(                                               \
      const BatchNormGeometry&, std::span<const Dtype>, std::span<const Dtype>,                 \
      std::span<const Dtype>, std::span<const Dtype>, double, std::span<Dtype>,                 \
      std::span<Dtype>, std::span<Dtype>);                                                      \
  template void reference::batch_norm_train_forward<Dtype>(                                    \
      const BatchNormGeometry&, std::span<const Dtype>, std::span<const Dtype>,                 \
      std::span<const Dtype>, double, std::span<double>, std::span<double>, std::span<Dtype>,  \
      std::span<Dtype>);                                                                        \
  template void reference::batch_norm_train_backward<Dtype>(                                   \
      const BatchNormGeometry&, std::span<const Dtype>, std::span<const Dtype>,                 \
      std::span<const Dtype>, std::span<const double>, double, std::span<Dtype>,                \
      std::span<Dtype>, std::span<Dtype>);

CSTRIP_INSTANTIATE_BN(float)
CSTRIP_INSTANTIATE_BN(double)

}  // namespace cstrip::kernels

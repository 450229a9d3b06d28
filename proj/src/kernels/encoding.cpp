#include "contextstrip/kernels/encoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cstrip::kernels {

template <typename Dtype>
void encoding_forward(const EncodingGeometry& g, std::span<const Dtype> input,
                      std::span<const Dtype> codewords, std::span<const Dtype> smoothing,
                      std::span<Dtype> assign, std::span<Dtype> output) {
  const std::int64_t D = g.channels, M = g.positions, K = g.codewords;
  const Dtype inv_m = Dtype(1) / static_cast<Dtype>(M);

#pragma omp parallel for schedule(static)
  for (std::int64_t n = 0; n < g.batch; ++n) {
    // Descriptor-major copy so each x_i is contiguous.
    std::vector<Dtype> desc(static_cast<std::size_t>(M * D));
    const Dtype* x = input.data() + n * D * M;
    for (std::int64_t d = 0; d < D; ++d)
      for (std::int64_t i = 0; i < M; ++i) desc[i * D + d] = x[d * M + i];

    Dtype* a = assign.data() + n * M * K;
    std::vector<Dtype> logits(static_cast<std::size_t>(K));
    for (std::int64_t i = 0; i < M; ++i) {
      const Dtype* xi = desc.data() + i * D;
      Dtype best = -std::numeric_limits<Dtype>::infinity();
      for (std::int64_t k = 0; k < K; ++k) {
        const Dtype* ck = codewords.data() + k * D;
        Dtype dist = 0;
        for (std::int64_t d = 0; d < D; ++d) {
          const Dtype r = xi[d] - ck[d];
          dist += r * r;
        }
        logits[k] = -smoothing[k] * dist;
        best = std::max(best, logits[k]);
      }
      Dtype total = 0;
      for (std::int64_t k = 0; k < K; ++k) {
        a[i * K + k] = std::exp(logits[k] - best);
        total += a[i * K + k];
      }
      for (std::int64_t k = 0; k < K; ++k) a[i * K + k] /= total;
    }

    Dtype* e = output.data() + n * K * D;
    for (std::int64_t k = 0; k < K; ++k) {
      const Dtype* ck = codewords.data() + k * D;
      Dtype* ek = e + k * D;
      std::fill(ek, ek + D, Dtype(0));
      for (std::int64_t i = 0; i < M; ++i) {
        const Dtype aik = a[i * K + k];
        const Dtype* xi = desc.data() + i * D;
        for (std::int64_t d = 0; d < D; ++d) ek[d] += aik * (xi[d] - ck[d]);
      }
      for (std::int64_t d = 0; d < D; ++d) ek[d] *= inv_m;
    }
  }
}

template <typename Dtype>
void encoding_backward(const EncodingGeometry& g, std::span<const Dtype> grad_output,
                       std::span<const Dtype> input, std::span<const Dtype> codewords,
                       std::span<const Dtype> smoothing, std::span<const Dtype> assign,
                       std::span<Dtype> grad_input, std::span<Dtype> grad_codewords,
                       std::span<Dtype> grad_smoothing) {
  const std::int64_t D = g.channels, M = g.positions, K = g.codewords;
  const Dtype inv_m = Dtype(1) / static_cast<Dtype>(M);

  // Codebook gradients are summed per item and reduced in item order, which
  // keeps the result independent of the thread count.
  std::vector<Dtype> partial_code(static_cast<std::size_t>(g.batch * K * D), Dtype(0));
  std::vector<Dtype> partial_smooth(static_cast<std::size_t>(g.batch * K), Dtype(0));

#pragma omp parallel for schedule(static)
  for (std::int64_t n = 0; n < g.batch; ++n) {
    const Dtype* x = input.data() + n * D * M;
    const Dtype* a = assign.data() + n * M * K;
    const Dtype* ge = grad_output.data() + n * K * D;
    Dtype* pc = partial_code.data() + n * K * D;
    Dtype* ps = partial_smooth.data() + n * K;

    std::vector<Dtype> xi(static_cast<std::size_t>(D)), gxi(static_cast<std::size_t>(D));
    std::vector<Dtype> ga(static_cast<std::size_t>(K)), dist(static_cast<std::size_t>(K));
    for (std::int64_t i = 0; i < M; ++i) {
      for (std::int64_t d = 0; d < D; ++d) xi[d] = x[d * M + i];
      // d/da_ik of the aggregate, and the softmax Jacobian correction.
      Dtype weighted = 0;
      for (std::int64_t k = 0; k < K; ++k) {
        const Dtype* ck = codewords.data() + k * D;
        const Dtype* gek = ge + k * D;
        Dtype dot = 0, sq = 0;
        for (std::int64_t d = 0; d < D; ++d) {
          const Dtype r = xi[d] - ck[d];
          dot += gek[d] * r;
          sq += r * r;
        }
        ga[k] = dot * inv_m;
        dist[k] = sq;
        weighted += a[i * K + k] * ga[k];
      }
      std::fill(gxi.begin(), gxi.end(), Dtype(0));
      for (std::int64_t k = 0; k < K; ++k) {
        const Dtype aik = a[i * K + k];
        const Dtype glogit = aik * (ga[k] - weighted);
        ps[k] -= dist[k] * glogit;
        const Dtype direct = aik * inv_m;
        const Dtype radial = Dtype(-2) * smoothing[k] * glogit;
        const Dtype* ck = codewords.data() + k * D;
        const Dtype* gek = ge + k * D;
        Dtype* pck = pc + k * D;
        for (std::int64_t d = 0; d < D; ++d) {
          const Dtype gr = direct * gek[d] + radial * (xi[d] - ck[d]);
          gxi[d] += gr;
          pck[d] -= gr;
        }
      }
      if (!grad_input.empty()) {
        Dtype* gx = grad_input.data() + n * D * M;
        for (std::int64_t d = 0; d < D; ++d) gx[d * M + i] += gxi[d];
      }
    }
  }

  for (std::int64_t n = 0; n < g.batch; ++n) {
    if (!grad_codewords.empty())
      for (std::int64_t j = 0; j < K * D; ++j) grad_codewords[j] += partial_code[n * K * D + j];
    if (!grad_smoothing.empty())
      for (std::int64_t k = 0; k < K; ++k) grad_smoothing[k] += partial_smooth[n * K + k];
  }
}

namespace reference {

template <typename Dtype>
void encoding_forward(const EncodingGeometry& g, std::span<const Dtype> input,
                      std::span<const Dtype> codewords, std::span<const Dtype> smoothing,
                      std::span<Dtype> assign, std::span<Dtype> output) {
  const std::int64_t D = g.channels, M = g.positions, K = g.codewords;
  auto xv = [&](std::int64_t n, std::int64_t i, std::int64_t d) {
    return static_cast<double>(input[(n * D + d) * M + i]);
  };
  for (std::int64_t n = 0; n < g.batch; ++n) {
    for (std::int64_t i = 0; i < M; ++i) {
      std::vector<double> logit(static_cast<std::size_t>(K));
      for (std::int64_t k = 0; k < K; ++k) {
        double dist = 0.0;
        for (std::int64_t d = 0; d < D; ++d) {
          const double r = xv(n, i, d) - codewords[k * D + d];
          dist += r * r;
        }
        logit[k] = -static_cast<double>(smoothing[k]) * dist;
      }
      const double top = *std::max_element(logit.begin(), logit.end());
      double total = 0.0;
      for (auto& l : logit) total += (l = std::exp(l - top));
      for (std::int64_t k = 0; k < K; ++k)
        assign[(n * M + i) * K + k] = static_cast<Dtype>(logit[k] / total);
    }
    for (std::int64_t k = 0; k < K; ++k)
      for (std::int64_t d = 0; d < D; ++d) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < M; ++i)
          acc += static_cast<double>(assign[(n * M + i) * K + k]) *
                 (xv(n, i, d) - codewords[k * D + d]);
        output[(n * K + k) * D + d] = static_cast<Dtype>(acc / static_cast<double>(M));
      }
  }
}

template <typename Dtype>
void encoding_backward(const EncodingGeometry& g, std::span<const Dtype> grad_output,
                       std::span<const Dtype> input, std::span<const Dtype> codewords,
                       std::span<const Dtype> smoothing, std::span<const Dtype> assign,
                       std::span<Dtype> grad_input, std::span<Dtype> grad_codewords,
                       std::span<Dtype> grad_smoothing) {
  const std::int64_t D = g.channels, M = g.positions, K = g.codewords;
  const double m = static_cast<double>(M);
  for (std::int64_t n = 0; n < g.batch; ++n)
    for (std::int64_t i = 0; i < M; ++i) {
      auto r = [&](std::int64_t k, std::int64_t d) {
        return static_cast<double>(input[(n * D + d) * M + i]) - codewords[k * D + d];
      };
      auto a = [&](std::int64_t k) { return static_cast<double>(assign[(n * M + i) * K + k]); };
      auto ge = [&](std::int64_t k, std::int64_t d) {
        return static_cast<double>(grad_output[(n * K + k) * D + d]);
      };
      std::vector<double> ga(static_cast<std::size_t>(K));
      for (std::int64_t k = 0; k < K; ++k) {
        double dot = 0.0;
        for (std::int64_t d = 0; d < D; ++d) dot += ge(k, d) * r(k, d);
        ga[k] = dot / m;
      }
      for (std::int64_t k = 0; k < K; ++k) {
        // softmax Jacobian: d a_k / d logit_j = a_k (delta_kj - a_j)
        double glogit = 0.0;
        for (std::int64_t j = 0; j < K; ++j) glogit += ga[j] * a(j) * ((j == k ? 1.0 : 0.0) - a(k));
        double dist = 0.0;
        for (std::int64_t d = 0; d < D; ++d) dist += r(k, d) * r(k, d);
        if (!grad_smoothing.empty()) grad_smoothing[k] += static_cast<Dtype>(-dist * glogit);
        for (std::int64_t d = 0; d < D; ++d) {
          const double gr = a(k) * ge(k, d) / m - 2.0 * smoothing[k] * glogit * r(k, d);
          if (!grad_input.empty()) grad_input[(n * D + d) * M + i] += static_cast<Dtype>(gr);
          if (!grad_codewords.empty()) grad_codewords[k * D + d] -= static_cast<Dtype>(gr);
        }
      }
    }
}

}  // namespace reference

#define CSTRIP_INSTANTIATE_ENCODING(NS, Dtype)                                                    \
  template void NS::encoding_forward<Dtype>(const EncodingGeometry&, std::span<const Dtype>,     \
                                            std::span<const Dtype>, std::span<const Dtype>,      \
                                            std::span<Dtype>, std::span<Dtype>);                 \
  template void NS::encoding_backward<Dtype>(                                                    \
      const EncodingGeometry&, std::span<const Dtype>, std::span<const Dtype>,                    \
      std::span<const Dtype>, std::span<const Dtype>, std::span<const Dtype>, std::span<Dtype>,  \
      std::span<Dtype>, std::span<Dtype>);

CSTRIP_INSTANTIATE_ENCODING(cstrip::kernels, float)
CSTRIP_INSTANTIATE_ENCODING(cstrip::kernels, double)
CSTRIP_INSTANTIATE_ENCODING(cstrip::kernels::reference, float)
CSTRIP_INSTANTIATE_ENCODING(cstrip::kernels::reference, double)

}  // namespace cstrip::kernels

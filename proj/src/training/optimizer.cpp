#include "contextstrip/training/optimizer.hpp"

#include <cmath>
#include <string>

#include "contextstrip/core/error.hpp"

namespace cstrip {

double poly_lr(std::int64_t t, std::int64_t total, double lr0, double power) {
  if (total <= 0) throw ValueError("poly_lr: total steps must be positive");
  if (t < 0 || t > total) {
    throw ValueError("poly_lr: step " + std::to_string(t) + " outside [0, " +
                     std::to_string(total) + "]");
  }
  if (t == total) return 0.0;
  return lr0 * std::pow(1.0 - static_cast<double>(t) / static_cast<double>(total), power);
}

template <typename Dtype>
std::vector<Tensor<Dtype>> make_velocity(const ModelParams<Dtype>& params) {
  std::vector<Tensor<Dtype>> velocity;
  for (const auto& entry : params.entries()) {
    if (entry.trainable) velocity.emplace_back(entry.tensor.shape());
  }
  return velocity;
}

template <typename Dtype>
void sgd_step(const ModelParams<Dtype>& params, std::vector<Tensor<Dtype>>& velocity, double lr,
              const SgdOptions& options) {
  std::vector<const typename ModelParams<Dtype>::Entry*> trainable;
  for (const auto& entry : params.entries()) {
    if (entry.trainable) trainable.push_back(&entry);
  }
  if (trainable.size() != velocity.size()) {
    throw ShapeError("sgd_step: " + std::to_string(velocity.size()) + " momentum buffers for " +
                     std::to_string(trainable.size()) + " trainable parameters");
  }
  const Dtype mu = static_cast<Dtype>(options.momentum);
  const Dtype wd = static_cast<Dtype>(options.weight_decay);
  const Dtype rate = static_cast<Dtype>(lr);

  std::vector<std::vector<Dtype>> next_v(trainable.size()), next_theta(trainable.size());
  for (std::size_t i = 0; i < trainable.size(); ++i) {
    const auto& entry = *trainable[i];
    const auto& theta = entry.tensor;
    if (velocity[i].shape() != theta.shape()) {
      throw ShapeError("sgd_step: momentum buffer of '" + entry.name + "' has the wrong shape");
    }
    const auto value = theta.data();
    const auto v = velocity[i].data();
    const bool has_grad = theta.has_grad();
    const auto grad = has_grad ? theta.grad() : std::span<const Dtype>{};
    if (has_grad && grad.size() != value.size()) {
      throw ShapeError("sgd_step: gradient of '" + entry.name + "' has the wrong size");
    }
    next_v[i].resize(value.size());
    next_theta[i].resize(value.size());
    for (std::size_t k = 0; k < value.size(); ++k) {
      const Dtype g = has_grad ? grad[k] : Dtype(0);
      if (!std::isfinite(g)) {
        throw NumericError("sgd_step: non-finite gradient in '" + entry.name + "'");
      }
      const Dtype nv = mu * v[k] - rate * (g + wd * value[k]);
      const Dtype nt = value[k] + nv;
      if (!std::isfinite(nv) || !std::isfinite(nt)) {
        throw NumericError("sgd_step: non-finite update for '" + entry.name + "'");
      }
      next_v[i][k] = nv;
      next_theta[i][k] = nt;
    }
  }
  for (std::size_t i = 0; i < trainable.size(); ++i) {
    auto value = trainable[i]->tensor.mutable_data();
    auto v = velocity[i].mutable_data();
    std::copy(next_theta[i].begin(), next_theta[i].end(), value.begin());
    std::copy(next_v[i].begin(), next_v[i].end(), v.begin());
  }
  params.zero_grad();
}

template std::vector<Tensor<float>> make_velocity(const ModelParams<float>&);
template std::vector<Tensor<double>> make_velocity(const ModelParams<double>&);
template void sgd_step(const ModelParams<float>&, std::vector<Tensor<float>>&, double,
                       const SgdOptions&);
template void sgd_step(const ModelParams<double>&, std::vector<Tensor<double>>&, double,
                       const SgdOptions&);

}  // namespace cstrip

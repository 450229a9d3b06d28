#include "contextstrip/network/model_params.hpp"

#include <cmath>

#include "contextstrip/core/error.hpp"

namespace cstrip {

template <typename Dtype>
void ModelParams<Dtype>::add(std::string name, Tensor<Dtype> tensor, bool trainable) {
  if (!tensor.defined()) throw ValueError("ModelParams: tensor '" + name + "' is undefined");
  if (index_.count(name)) throw ValueError("ModelParams: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  tensor.set_requires_grad(trainable);
  entries_.push_back(Entry{std::move(name), std::move(tensor), trainable});
}

template <typename Dtype>
bool ModelParams<Dtype>::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

template <typename Dtype>
const Tensor<Dtype>& ModelParams<Dtype>::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw ValueError("ModelParams: no parameter named '" + std::string(name) + "'");
  }
  return entries_[it->second].tensor;
}

template <typename Dtype>
std::int64_t ModelParams<Dtype>::trainable_count() const {
  std::int64_t total = 0;
  for (const auto& e : entries_) {
    if (e.trainable) total += e.tensor.numel();
  }
  return total;
}

template <typename Dtype>
NamedTensors<Dtype> ModelParams<Dtype>::trainable() const {
  NamedTensors<Dtype> out;
  for (const auto& e : entries_) {
    if (e.trainable) out.emplace_back(e.name, e.tensor);
  }
  return out;
}

template <typename Dtype>
void ModelParams<Dtype>::zero_grad() const {
  for (const auto& e : entries_) e.tensor.zero_grad();
}

template <typename Dtype>
ModelParams<Dtype> ModelParams<Dtype>::clone() const {
  ModelParams copy;
  for (const auto& e : entries_) copy.add(e.name, e.tensor.clone(), e.trainable);
  return copy;
}

template <typename Dtype>
bool ModelParams<Dtype>::all_finite() const {
  for (const auto& e : entries_) {
    for (Dtype v : e.tensor.data()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template class ModelParams<float>;
template class ModelParams<double>;

}  // namespace cstrip

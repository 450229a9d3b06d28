#include "contextstrip/autodiff/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "contextstrip/core/error.hpp"

namespace cstrip {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void validate_shape(const Shape& shape) {
  for (auto extent : shape) {
    if (extent <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
}

}  // namespace

template <typename Dtype>
Tensor<Dtype>::Tensor(Shape shape, bool requires_grad) : shape_(std::move(shape)) {
  validate_shape(shape_);
  storage_ = std::make_shared<Storage>();
  storage_->values.assign(static_cast<std::size_t>(shape_numel(shape_)), Dtype(0));
  storage_->requires_grad = requires_grad;
}

template <typename Dtype>
Tensor<Dtype>::Tensor(Shape shape, std::vector<Dtype> values, bool requires_grad)
    : shape_(std::move(shape)) {
  validate_shape(shape_);
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape_)) {
    throw ShapeError("tensor of shape " + shape_str(shape_) + " needs " +
                     std::to_string(shape_numel(shape_)) + " values, got " +
                     std::to_string(values.size()));
  }
  storage_ = std::make_shared<Storage>();
  storage_->values = std::move(values);
  storage_->requires_grad = requires_grad;
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::full(Shape shape, Dtype value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.storage_->values.begin(), t.storage_->values.end(), value);
  return t;
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::scalar(Dtype value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

template <typename Dtype>
std::int64_t Tensor<Dtype>::dim(int axis) const {
  const int n = ndim();
  const int resolved = axis < 0 ? axis + n : axis;
  if (resolved < 0 || resolved >= n) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
  }
  return shape_[static_cast<std::size_t>(resolved)];
}

template <typename Dtype>
std::int64_t Tensor<Dtype>::numel() const {
  return storage_ ? static_cast<std::int64_t>(storage_->values.size()) : 0;
}

template <typename Dtype>
std::span<const Dtype> Tensor<Dtype>::data() const {
  if (!storage_) return {};
  return {storage_->values.data(), storage_->values.size()};
}

template <typename Dtype>
std::span<Dtype> Tensor<Dtype>::mutable_data() const {
  if (!storage_) return {};
  return {storage_->values.data(), storage_->values.size()};
}

template <typename Dtype>
Dtype Tensor<Dtype>::item() const {
  if (numel() != 1) throw ShapeError("item() needs a one-element tensor, got " + shape_str(shape_));
  return storage_->values[0];
}

template <typename Dtype>
bool Tensor<Dtype>::requires_grad() const {
  return storage_ && storage_->requires_grad;
}

template <typename Dtype>
void Tensor<Dtype>::set_requires_grad(bool flag) const {
  if (storage_) storage_->requires_grad = flag;
}

template <typename Dtype>
bool Tensor<Dtype>::has_grad() const {
  return storage_ && !storage_->grad.empty();
}

template <typename Dtype>
std::span<const Dtype> Tensor<Dtype>::grad() const {
  if (!storage_) return {};
  return {storage_->grad.data(), storage_->grad.size()};
}

template <typename Dtype>
std::span<Dtype> Tensor<Dtype>::mutable_grad() const {
  if (!storage_) throw ShapeError("gradient requested on an undefined tensor");
  if (storage_->grad.empty()) storage_->grad.assign(storage_->values.size(), Dtype(0));
  return {storage_->grad.data(), storage_->grad.size()};
}

template <typename Dtype>
void Tensor<Dtype>::zero_grad() const {
  if (storage_ && !storage_->grad.empty()) {
    std::fill(storage_->grad.begin(), storage_->grad.end(), Dtype(0));
  }
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::reshape(Shape shape) const {
  validate_shape(shape);
  if (shape_numel(shape) != numel()) {
    throw ShapeError("cannot reshape " + shape_str(shape_) + " into " + shape_str(shape));
  }
  Tensor view;
  view.shape_ = std::move(shape);
  view.storage_ = storage_;
  return view;
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::clone() const {
  if (!storage_) return {};
  return Tensor(shape_, storage_->values, false);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace cstrip

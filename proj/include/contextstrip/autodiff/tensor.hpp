#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cstrip {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// N-dimensional row-major array with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, and reshape() returns a view over
/// the same values and gradient. The const accessors follow handle semantics
/// (like std::shared_ptr), so mutable_data() and mutable_grad() are callable
/// through a const handle. Values produced by operations are never mutated
/// afterwards; only parameters are updated in place by the optimizer.
template <typename Dtype>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<Dtype> values, bool requires_grad = false);

  static Tensor full(Shape shape, Dtype value, bool requires_grad = false);
  static Tensor scalar(Dtype value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  /// Extent of one axis; negative axes count from the back.
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;

  std::span<const Dtype> data() const;
  std::span<Dtype> mutable_data() const;
  /// Value of a one-element tensor.
  Dtype item() const;

  bool requires_grad() const;
  void set_requires_grad(bool flag) const;

  bool has_grad() const;
  /// Empty span when no gradient has been allocated yet.
  std::span<const Dtype> grad() const;
  /// Allocates a zero gradient on first use.
  std::span<Dtype> mutable_grad() const;
  void zero_grad() const;

  /// View with a new shape over the same values and gradient.
  Tensor reshape(Shape shape) const;
  /// Deep copy of the values without gradient tracking.
  Tensor clone() const;

  bool shares_storage_with(const Tensor& other) const {
    return storage_ != nullptr && storage_ == other.storage_;
  }

 private:
  struct Storage {
    std::vector<Dtype> values;
    std::vector<Dtype> grad;
    bool requires_grad = false;
  };

  Shape shape_;
  std::shared_ptr<Storage> storage_;
};

}  // namespace cstrip

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "contextstrip/autodiff/grad_check.hpp"
#include "contextstrip/autodiff/tensor.hpp"

namespace cstrip {

/// Ordered, uniquely named collection of the tensors that define one network
/// instance. Trainable entries are optimized; the rest are buffers (batch-norm
/// running statistics) that are saved and restored with the parameters.
template <typename Dtype>
class ModelParams {
 public:
  struct Entry {
    std::string name;
    Tensor<Dtype> tensor;
    bool trainable = true;
  };

  void add(std::string name, Tensor<Dtype> tensor, bool trainable = true);

  bool contains(std::string_view name) const;
  const Tensor<Dtype>& at(std::string_view name) const;

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Scalar count over trainable entries.
  std::int64_t trainable_count() const;
  NamedTensors<Dtype> trainable() const;
  void zero_grad() const;

  /// Deep copy; the copy shares no storage with this one.
  ModelParams clone() const;

  bool all_finite() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace cstrip

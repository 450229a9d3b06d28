#pragma once

#include <string>
#include <string_view>

#include "contextstrip/autodiff/tensor.hpp"
#include "contextstrip/core/error.hpp"

namespace cstrip::ops::detail {

template <typename Dtype>
void require_rank(const Tensor<Dtype>& t, int rank, std::string_view op, std::string_view what) {
  if (!t.defined()) throw ShapeError(std::string(op) + ": " + std::string(what) + " is undefined");
  if (t.ndim() != rank) {
    throw ShapeError(std::string(op) + ": " + std::string(what) + " must have rank " +
                     std::to_string(rank) + ", got " + shape_str(t.shape()));
  }
}

inline std::string axis_mismatch(std::string_view op, std::string_view what, int axis,
                                 std::int64_t got, std::int64_t expected) {
  return std::string(op) + ": " + std::string(what) + " axis " + std::to_string(axis) + " has " +
         std::to_string(got) + ", expected " + std::to_string(expected);
}

/// Gradient target for an input, or an empty span when it needs none.
template <typename Dtype>
std::span<Dtype> grad_target(const Tensor<Dtype>& t) {
  return t.defined() && t.requires_grad() ? t.mutable_grad() : std::span<Dtype>{};
}

}  // namespace cstrip::ops::detail

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "contextstrip/autodiff/tensor.hpp"

namespace cstrip {

/// Tape of executed operations. Each differentiable op appends one node whose
/// backward closure reads the output gradient and accumulates into the
/// gradients of its inputs. backward() replays the tape in exact reverse
/// execution order.
template <typename Dtype>
class Graph {
 public:
  struct Node {
    std::string op;
    std::vector<Tensor<Dtype>> inputs;
    Tensor<Dtype> output;
    std::function<void()> backward;
  };

  /// A non-recording graph evaluates ops without keeping a tape.
  explicit Graph(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }

  /// True when an op over these inputs has to be taped.
  template <typename... Ts>
  bool tracks(const Ts&... inputs) const {
    return recording_ && (inputs.requires_grad() || ...);
  }
  bool tracks_any(const std::vector<Tensor<Dtype>>& inputs) const;

  void record(std::string op, std::vector<Tensor<Dtype>> inputs, Tensor<Dtype> output,
              std::function<void()> backward);

  /// Seeds d(loss)/d(loss) = 1 and runs every node's backward in reverse.
  /// Throws ShapeError if loss is not a one-element tensor.
  void backward(const Tensor<Dtype>& loss);

  /// While on, piecewise ops (relu, max pooling) fold the branch every
  /// element took into a fingerprint. Two evaluations with equal
  /// fingerprints lie in the same smooth piece of the function.
  void track_branches(bool on) { branch_tracking_ = on; }
  bool tracks_branches() const { return branch_tracking_; }
  void fold_branch(std::uint64_t word) {
    fingerprint_ = (fingerprint_ ^ word) * 0x100000001b3ULL;
    fingerprint_ ^= fingerprint_ >> 29;
  }
  std::uint64_t branch_fingerprint() const { return fingerprint_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  bool recording_;
  bool branch_tracking_ = false;
  std::uint64_t fingerprint_ = 0xcbf29ce484222325ULL;
  std::vector<Node> nodes_;
};

}  // namespace cstrip

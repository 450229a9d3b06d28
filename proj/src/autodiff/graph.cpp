#include "contextstrip/autodiff/graph.hpp"

#include <ranges>

#include "contextstrip/core/error.hpp"

namespace cstrip {

template <typename Dtype>
bool Graph<Dtype>::tracks_any(const std::vector<Tensor<Dtype>>& inputs) const {
  if (!recording_) return false;
  for (const auto& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

template <typename Dtype>
void Graph<Dtype>::record(std::string op, std::vector<Tensor<Dtype>> inputs, Tensor<Dtype> output,
                          std::function<void()> backward) {
  output.set_requires_grad(true);
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(backward)});
}

template <typename Dtype>
void Graph<Dtype>::backward(const Tensor<Dtype>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward needs a scalar loss, got " + shape_str(loss.shape()));
  }
  loss.mutable_grad()[0] += Dtype(1);
  for (auto& node : std::views::reverse(nodes_)) {
    if (node.output.has_grad()) node.backward();
  }
}

template class Graph<float>;
template class Graph<double>;

}  // namespace cstrip

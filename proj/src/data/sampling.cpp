#include "contextstrip/data/sampling.hpp"

#include <algorithm>

#include "contextstrip/core/error.hpp"
#include "contextstrip/losses/losses.hpp"

namespace cstrip {

std::vector<std::int64_t> subvolume_indices(std::int64_t index, int depth, std::int64_t count) {
  if (depth < 1) throw ValueError("sub-volume depth must be positive");
  if (count < 1) throw ValueError("sub-volume: empty coronal axis");
  std::vector<std::int64_t> out(static_cast<std::size_t>(depth));
  const std::int64_t first = index - subvolume_center(depth);
  for (int p = 0; p < depth; ++p) {
    out[static_cast<std::size_t>(p)] = std::clamp<std::int64_t>(first + p, 0, count - 1);
  }
  return out;
}

SamplePair sample_training_pair(const Volume& volume, std::int64_t index, int depth,
                                int classes) {
  if (index < 0 || index >= volume.coronal_count()) {
    throw ValueError("sample_training_pair: coronal index " + std::to_string(index) +
                     " outside [0, " + std::to_string(volume.coronal_count()) + ") for '" +
                     volume.subject_id + "'");
  }
  SamplePair pair;
  pair.height = volume.plane_height();
  pair.width = volume.plane_width();
  pair.depth = depth;
  pair.subject_id = volume.subject_id;
  pair.coronal_index = index;
  pair.center_position = subvolume_center(depth);
  pair.slice = volume.coronal_slice(index);
  pair.subvol.reserve(static_cast<std::size_t>(depth) * pair.slice.size());
  for (std::int64_t y : subvolume_indices(index, depth, volume.coronal_count())) {
    const auto plane = volume.coronal_slice(y);
    pair.subvol.insert(pair.subvol.end(), plane.begin(), plane.end());
  }
  if (volume.mask) {
    pair.mask_slice = volume.coronal_mask(index);
    pair.y = loss::class_presence_labels(pair.mask_slice, classes);
  }
  return pair;
}

template <typename Dtype>
Batch<Dtype> make_batch(std::span<const SamplePair> pairs, int classes) {
  if (pairs.empty()) throw ValueError("make_batch: no pairs");
  const auto& first = pairs.front();
  const std::int64_t N = static_cast<std::int64_t>(pairs.size());
  const std::int64_t H = first.height, W = first.width, D = first.depth;
  const bool labelled = !first.mask_slice.empty();
  Batch<Dtype> batch;
  batch.slice = Tensor<Dtype>({N, 1, H, W});
  batch.subvol = Tensor<Dtype>({N, D, H, W});
  std::vector<std::uint8_t> labels;
  if (labelled) {
    batch.y = Tensor<Dtype>({N, classes});
    labels.reserve(static_cast<std::size_t>(N * H * W));
  }
  auto s = batch.slice.mutable_data();
  auto v = batch.subvol.mutable_data();
  const auto plane = static_cast<std::size_t>(H * W);
  for (std::size_t n = 0; n < pairs.size(); ++n) {
    const auto& p = pairs[n];
    if (p.height != H || p.width != W || p.depth != D || p.mask_slice.empty() == labelled) {
      throw ShapeError("make_batch: pair " + std::to_string(n) + " differs in geometry");
    }
    std::copy(p.slice.begin(), p.slice.end(), s.begin() + static_cast<std::ptrdiff_t>(n * plane));
    std::copy(p.subvol.begin(), p.subvol.end(),
              v.begin() + static_cast<std::ptrdiff_t>(n * plane * static_cast<std::size_t>(D)));
    if (labelled) {
      labels.insert(labels.end(), p.mask_slice.begin(), p.mask_slice.end());
      auto y = batch.y.mutable_data();
      for (int c = 0; c < classes; ++c) {
        y[n * static_cast<std::size_t>(classes) + static_cast<std::size_t>(c)] =
            static_cast<Dtype>(p.y[static_cast<std::size_t>(c)]);
      }
    }
  }
  if (labelled) batch.target = loss::one_hot<Dtype>(labels, N, classes, H, W);
  return batch;
}

template Batch<float> make_batch<float>(std::span<const SamplePair>, int);
template Batch<double> make_batch<double>(std::span<const SamplePair>, int);

}  // namespace cstrip

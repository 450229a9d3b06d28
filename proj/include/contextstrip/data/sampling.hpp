#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "contextstrip/autodiff/tensor.hpp"
#include "contextstrip/data/volume.hpp"

namespace cstrip {

/// One network input: a coronal slice, its surrounding sub-volume with depth
/// read as channels, and the matching labels.
struct SamplePair {
  std::int64_t height = 0;
  std::int64_t width = 0;
  int depth = 0;
  /// [H, W]
  std::vector<float> slice;
  /// [D, H, W]; plane `center_position` equals `slice`.
  std::vector<float> subvol;
  /// [H, W]; empty when the volume has no mask.
  std::vector<std::uint8_t> mask_slice;
  /// Class-presence indicators derived from mask_slice.
  std::vector<std::uint8_t> y;
  std::string subject_id;
  std::int64_t coronal_index = 0;
  int center_position = 0;
};

/// Coronal indices covered by the sub-volume around `index`: from
/// index - ceil(D/2) + 1 to index + floor(D/2), clamped to [0, count).
std::vector<std::int64_t> subvolume_indices(std::int64_t index, int depth, std::int64_t count);

/// Position of the target slice inside the sub-volume: ceil(D/2) - 1.
inline int subvolume_center(int depth) { return (depth + 1) / 2 - 1; }

/// Throws ValueError if index is outside [0, coronal_count).
SamplePair sample_training_pair(const Volume& volume, std::int64_t index, int depth,
                                int classes = 2);

/// Network-ready stack of pairs.
template <typename Dtype>
struct Batch {
  Tensor<Dtype> slice;   // [N,1,H,W]
  Tensor<Dtype> subvol;  // [N,D,H,W]
  Tensor<Dtype> target;  // [N,C,H,W] one-hot; undefined without masks
  Tensor<Dtype> y;       // [N,C]; undefined without masks
};

template <typename Dtype>
Batch<Dtype> make_batch(std::span<const SamplePair> pairs, int classes);

}  // namespace cstrip

#pragma once

#include "contextstrip/data/volume.hpp"
#include "contextstrip/network/arch_config.hpp"
#include "contextstrip/network/model_params.hpp"

namespace cstrip {

struct PredictOptions {
  /// Keep only the largest 6-connected brain component.
  bool largest_component = false;
  /// Coronal slices per forward pass; results do not depend on it.
  int batch_size = 8;
};

/// Segments every coronal slice of `volume`: the volume is normalized and
/// resampled to the network's in-plane size, each slice goes through the
/// model in eval mode with its sub-volume, the per-pixel argmax is taken and
/// the labels are mapped back to the original grid by nearest neighbour.
/// The result has the input's extents, spacing and id, with the labels in
/// both `mask` and `intensities`. Throws ValueError if the parameters do not
/// fit `cfg`.
template <typename Dtype>
Volume predict_volume(const ModelParams<Dtype>& params, const ArchConfig& cfg,
                      const Volume& volume, const PredictOptions& options = {});

/// Largest 6-connected component of label 1; ties keep the first found.
std::vector<std::uint8_t> largest_component(std::span<const std::uint8_t> labels,
                                            const std::array<std::int64_t, 3>& extents);

}  // namespace cstrip

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "contextstrip/data/volume.hpp"

namespace cstrip {

/// Percentile q in [0, 1] with linear interpolation between order
/// statistics (position q * (n - 1)).
double percentile(std::span<const float> values, double q);

/// Clamps to [p1, p99] and rescales to [0, 1]. A zero range maps every voxel
/// to 0. The mask is carried over unchanged.
Volume normalize_volume(const Volume& volume);

/// Resizes the coronal planes (x and z) to hw x hw; y is left alone.
/// Intensities are interpolated bilinearly (pixel-centre aligned), the mask
/// by nearest neighbour. Spacing is scaled to keep the physical extent.
Volume resample_inplane(const Volume& volume, std::int64_t hw);

/// Network input preparation: normalize_volume followed by
/// resample_inplane to hw.
Volume prepare_volume(const Volume& volume, std::int64_t hw);

/// Bilinear resize of one row-major plane.
std::vector<float> resize_bilinear(std::span<const float> plane, std::int64_t h, std::int64_t w,
                                   std::int64_t out_h, std::int64_t out_w);

/// Nearest-neighbour resize of one row-major label plane.
std::vector<std::uint8_t> resize_nearest(std::span<const std::uint8_t> plane, std::int64_t h,
                                         std::int64_t w, std::int64_t out_h, std::int64_t out_w);

}  // namespace cstrip

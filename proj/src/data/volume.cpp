#include "contextstrip/data/volume.hpp"

#include <cmath>

#include "contextstrip/core/error.hpp"

namespace cstrip {

Volume::Volume(std::array<std::int64_t, 3> ext, std::array<double, 3> sp)
    : extents(ext), spacing(sp) {
  for (auto e : extents) {
    if (e <= 0) throw ValueError("Volume: extents must be positive");
  }
  intensities.assign(static_cast<std::size_t>(voxel_count()), 0.0f);
}

std::vector<float> Volume::coronal_slice(std::int64_t y) const {
  if (y < 0 || y >= extents[1]) {
    throw ValueError("coronal index " + std::to_string(y) + " outside [0, " +
                     std::to_string(extents[1]) + ")");
  }
  std::vector<float> plane(static_cast<std::size_t>(extents[2] * extents[0]));
  for (std::int64_t z = 0; z < extents[2]; ++z) {
    for (std::int64_t x = 0; x < extents[0]; ++x) {
      plane[static_cast<std::size_t>(z * extents[0] + x)] = at(x, y, z);
    }
  }
  return plane;
}

std::vector<std::uint8_t> Volume::coronal_mask(std::int64_t y) const {
  if (!mask) throw ValueError("volume '" + subject_id + "' has no mask");
  if (y < 0 || y >= extents[1]) {
    throw ValueError("coronal index " + std::to_string(y) + " outside [0, " +
                     std::to_string(extents[1]) + ")");
  }
  std::vector<std::uint8_t> plane(static_cast<std::size_t>(extents[2] * extents[0]));
  for (std::int64_t z = 0; z < extents[2]; ++z) {
    for (std::int64_t x = 0; x < extents[0]; ++x) {
      plane[static_cast<std::size_t>(z * extents[0] + x)] = (*mask)[index(x, y, z)];
    }
  }
  return plane;
}

void Volume::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (extents[static_cast<std::size_t>(a)] <= 0) {
      throw ValueError("volume '" + subject_id + "': extent on axis " + std::to_string(a) +
                       " is not positive");
    }
    if (!(spacing[static_cast<std::size_t>(a)] > 0.0)) {
      throw ValueError("volume '" + subject_id + "': spacing on axis " + std::to_string(a) +
                       " is not positive");
    }
  }
  const auto n = static_cast<std::size_t>(voxel_count());
  if (intensities.size() != n) {
    throw ValueError("volume '" + subject_id + "': " + std::to_string(intensities.size()) +
                     " intensities for " + std::to_string(n) + " voxels");
  }
  for (float v : intensities) {
    if (!std::isfinite(v)) throw ValueError("volume '" + subject_id + "': non-finite intensity");
  }
  if (mask) {
    if (mask->size() != n) {
      throw ValueError("volume '" + subject_id + "': mask extents differ from intensities");
    }
    for (auto l : *mask) {
      if (l > 1) throw ValueError("volume '" + subject_id + "': mask label outside {0, 1}");
    }
  }
}

}  // namespace cstrip

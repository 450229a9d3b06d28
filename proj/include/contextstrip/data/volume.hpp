#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cstrip {

/// Scalar 3-D grid stored x-fastest (x + X * (y + Y * z)), the NIfTI voxel
/// order. The coronal axis is y: a coronal plane has height Z and width X.
struct Volume {
  std::array<std::int64_t, 3> extents{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::vector<float> intensities;
  /// Label grid of the same extents; 1 = brain.
  std::optional<std::vector<std::uint8_t>> mask;
  std::string subject_id;

  Volume() = default;
  Volume(std::array<std::int64_t, 3> ext, std::array<double, 3> sp = {1.0, 1.0, 1.0});

  std::int64_t voxel_count() const { return extents[0] * extents[1] * extents[2]; }
  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>(x + extents[0] * (y + extents[1] * z));
  }
  float at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return intensities[index(x, y, z)];
  }

  std::int64_t coronal_count() const { return extents[1]; }
  std::int64_t plane_height() const { return extents[2]; }
  std::int64_t plane_width() const { return extents[0]; }

  /// Coronal plane y as a row-major [Z, X] grid.
  std::vector<float> coronal_slice(std::int64_t y) const;
  std::vector<std::uint8_t> coronal_mask(std::int64_t y) const;

  /// Throws ValueError on non-positive extents, a size mismatch, a
  /// non-finite intensity or a label outside {0, 1}.
  void validate() const;
};

}  // namespace cstrip

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "contextstrip/data/volume.hpp"

namespace cstrip::nifti {

enum Datatype : std::int16_t {
  kUInt8 = 2,
  kInt16 = 4,
  kFloat32 = 16,
  kFloat64 = 64,
  kUInt16 = 512,
};

inline constexpr std::int32_t kHeaderSize = 348;
inline constexpr std::int64_t kVoxOffset = 352;

/// Decoded image content: scaled voxel values in file order.
struct Image {
  std::array<std::int64_t, 3> extents{0, 0, 0};
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::int16_t datatype = kFloat32;
  std::vector<float> values;
};

struct WriteOptions {
  std::int16_t datatype = kFloat32;
  /// Deflate the file; defaults to true for paths ending in ".gz".
  std::optional<bool> gzip;
  /// Emit the opposite of host byte order (for fixtures).
  bool swap_bytes = false;
};

/// Reads a single-file NIfTI-1 image (.nii or .nii.gz). Byte order is taken
/// from sizeof_hdr; scl_slope/scl_inter are applied when the slope is
/// non-zero. Throws FormatError for a bad magic, an unsupported datatype
/// (named) or a truncated data section, and IoError if the file cannot be
/// read.
Image read_image(const std::filesystem::path& path);

/// Writes header + 4 zero extension bytes + data at offset 352. Integer
/// datatypes round to nearest and saturate.
void write_image(const Image& image, const std::filesystem::path& path,
                 const WriteOptions& options = {});

/// Intensity volume from a file.
Volume read_nifti(const std::filesystem::path& path);

/// Label grid from a file; values are rounded and must be 0 or 1.
std::vector<std::uint8_t> read_nifti_mask(const std::filesystem::path& path,
                                          const std::array<std::int64_t, 3>& expected_extents);

/// Intensities as float32 (or options.datatype).
void write_nifti(const Volume& volume, const std::filesystem::path& path,
                 WriteOptions options = {});

/// The volume's mask as uint8. Throws ValueError if it has none.
void write_nifti_mask(const Volume& volume, const std::filesystem::path& path,
                      WriteOptions options = {});

}  // namespace cstrip::nifti

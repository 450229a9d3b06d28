#pragma once

#include <filesystem>
#include <string>

#include "contextstrip/training/trainer.hpp"

namespace cstrip {

/// Precision tag stored in a manifest: "float32" or "float64".
template <typename Dtype>
std::string precision_tag();

/// Writes `<dir>/manifest.json` (format version, code version, precision,
/// seed, configuration, step counters, generator state, history and the name,
/// shape and role of every tensor) and `<dir>/params.bin`, the little-endian
/// values of every parameter in manifest order followed by the momentum
/// buffers. The directory is created if needed.
template <typename Dtype>
void save_checkpoint(const TrainState<Dtype>& state, const std::filesystem::path& dir);

/// Inverse of save_checkpoint. Throws FormatError for an unknown or
/// mismatching precision tag and for a blob whose length disagrees with the
/// manifest, IoError if a file cannot be read.
template <typename Dtype>
TrainState<Dtype> load_checkpoint(const std::filesystem::path& dir);

/// Precision tag of a checkpoint without loading its blob.
std::string checkpoint_precision(const std::filesystem::path& dir);

}  // namespace cstrip

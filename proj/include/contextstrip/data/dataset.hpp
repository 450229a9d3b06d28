#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "contextstrip/data/phantom.hpp"
#include "contextstrip/data/volume.hpp"

namespace cstrip {

struct Dataset {
  std::string name;
  std::vector<Volume> subjects;

  std::vector<std::string> ids() const;
  const Volume& find(const std::string& subject_id) const;
  Dataset subset(const std::vector<std::string>& subject_ids) const;
};

/// Loads `<root>/<subject_id>/t1.nii[.gz]` with an optional `mask.nii[.gz]`
/// next to it, subjects sorted by id. Throws IoError if root has none.
Dataset load_dataset(const std::filesystem::path& root);

/// Writes the layout load_dataset reads.
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// `count` phantoms named phantom_000, phantom_001, ...; subject i uses a
/// seed derived from (seed, i).
Dataset generate_phantom_dataset(int count, std::int64_t extent, std::uint64_t seed,
                                 PhantomFamily family = PhantomFamily::A);

}  // namespace cstrip

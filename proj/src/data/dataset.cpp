#include "contextstrip/data/dataset.hpp"

#include <algorithm>
#include <cstdio>

#include "contextstrip/core/error.hpp"
#include "contextstrip/core/rng.hpp"
#include "contextstrip/data/nifti.hpp"

namespace cstrip {

namespace fs = std::filesystem;

namespace {

std::optional<fs::path> find_image(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".nii", ".nii.gz"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

}  // namespace

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(subjects.size());
  for (const auto& v : subjects) out.push_back(v.subject_id);
  return out;
}

const Volume& Dataset::find(const std::string& subject_id) const {
  for (const auto& v : subjects) {
    if (v.subject_id == subject_id) return v;
  }
  throw ValueError("dataset '" + name + "' has no subject '" + subject_id + "'");
}

Dataset Dataset::subset(const std::vector<std::string>& subject_ids) const {
  Dataset out;
  out.name = name;
  for (const auto& id : subject_ids) out.subjects.push_back(find(id));
  return out;
}

Dataset load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root '" + root.string() + "' is not a directory");
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && find_image(entry.path(), "t1")) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) {
    throw IoError("dataset root '" + root.string() + "' has no <subject>/t1.nii entries");
  }
  Dataset ds;
  ds.name = root.filename().string();
  if (ds.name.empty()) ds.name = root.parent_path().filename().string();
  for (const auto& dir : dirs) {
    Volume v = nifti::read_nifti(*find_image(dir, "t1"));
    v.subject_id = dir.filename().string();
    if (auto mask = find_image(dir, "mask")) v.mask = nifti::read_nifti_mask(*mask, v.extents);
    v.validate();
    ds.subjects.push_back(std::move(v));
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  for (const auto& v : dataset.subjects) {
    const fs::path dir = root / v.subject_id;
    fs::create_directories(dir);
    nifti::write_nifti(v, dir / "t1.nii");
    if (v.mask) nifti::write_nifti_mask(v, dir / "mask.nii");
  }
}

Dataset generate_phantom_dataset(int count, std::int64_t extent, std::uint64_t seed,
                                 PhantomFamily family) {
  if (count < 1) throw ValueError("phantom dataset: count must be positive");
  Dataset ds;
  ds.name = "phantom" + to_string(family);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t tag = (family == PhantomFamily::A ? 0x1000000ULL : 0x2000000ULL) +
                              static_cast<std::uint64_t>(i);
    Volume v = generate_phantom(Rng::derive(seed, tag), extent, family);
    char id[32];
    std::snprintf(id, sizeof(id), "phantom_%03d", i);
    v.subject_id = id;
    ds.subjects.push_back(std::move(v));
  }
  return ds;
}

}  // namespace cstrip

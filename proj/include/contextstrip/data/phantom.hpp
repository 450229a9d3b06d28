#pragma once

#include <cstdint>
#include <string>

#include "contextstrip/data/volume.hpp"

namespace cstrip {

/// Two generator families with disjoint parameter ranges, for transfer
/// experiments. A is the default.
enum class PhantomFamily { A, B };

PhantomFamily parse_phantom_family(const std::string& name);
std::string to_string(PhantomFamily family);

/// Synthetic head: textured ellipsoidal brain (the mask) in a randomly posed
/// frame, a dark fluid gap, a bright ellipsoidal skull shell, scalp blobs
/// outside it and Gaussian noise (sigma 0.03 for A, 0.06 for B). Pure in
/// (seed, extent, family). Throws ValueError for extent < 32.
Volume generate_phantom(std::uint64_t seed, std::int64_t extent,
                        PhantomFamily family = PhantomFamily::A);

}  // namespace cstrip

#include "contextstrip/data/phantom.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "contextstrip/core/error.hpp"
#include "contextstrip/core/rng.hpp"

namespace cstrip {

namespace {

struct Range {
  double lo, hi;
  double draw(Rng& rng) const { return rng.uniform(lo, hi); }
};

/// Generator parameter ranges of one family. Radii are in units of the
/// brain's own normalized radius (1 = brain surface).
struct FamilyRanges {
  Range semi_axis;      // fraction of the extent
  Range brain;          // base tissue intensity
  double texture_amp;   // amplitude of the smooth texture
  Range texture_freq;   // cycles per extent
  Range core_boost;     // brighter inner core (r < 0.6)
  Range fluid;          // intensity of the gap between brain and skull
  Range gap;            // gap thickness
  Range skull;          // shell intensity
  Range shell;          // shell thickness
  Range scalp;          // scalp layer intensity
  int blobs_lo, blobs_hi;
  double noise;         // sigma of the additive Gaussian noise
};

const FamilyRanges& ranges(PhantomFamily family) {
  static const FamilyRanges a{{0.24, 0.33}, {0.60, 0.80}, 0.05, {1.5, 3.0}, {0.03, 0.08},
                              {0.12, 0.22}, {0.09, 0.13}, {0.85, 1.00}, {0.08, 0.12},
                              {0.35, 0.50}, 4,  8,  0.03};
  static const FamilyRanges b{{0.235, 0.29}, {0.50, 0.58}, 0.09, {3.5, 5.5}, {0.09, 0.13},
                              {0.23, 0.30}, {0.14, 0.18}, {0.85, 1.00}, {0.13, 0.16},
                              {0.25, 0.34}, 9, 14, 0.06};
  return family == PhantomFamily::A ? a : b;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rotation(double ax, double ay, double az) {
  const double cx = std::cos(ax), sx = std::sin(ax);
  const double cy = std::cos(ay), sy = std::sin(ay);
  const double cz = std::cos(az), sz = std::sin(az);
  const Mat3 rx{{{1, 0, 0}, {0, cx, -sx}, {0, sx, cx}}};
  const Mat3 ry{{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rz{{{cz, -sz, 0}, {sz, cz, 0}, {0, 0, 1}}};
  auto mul = [](const Mat3& p, const Mat3& q) {
    Mat3 r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r[i][j] += p[i][k] * q[k][j];
    return r;
  };
  return mul(rz, mul(ry, rx));
}

struct Wave {
  std::array<double, 3> direction;
  double frequency;
  double phase;
};

struct Blob {
  std::array<double, 3> center;
  double radius;
  double intensity;
};

}  // namespace

PhantomFamily parse_phantom_family(const std::string& name) {
  if (name == "A" || name == "a") return PhantomFamily::A;
  if (name == "B" || name == "b") return PhantomFamily::B;
  throw ValueError("unknown phantom family '" + name + "' (expected A or B)");
}

std::string to_string(PhantomFamily family) { return family == PhantomFamily::A ? "A" : "B"; }

Volume generate_phantom(std::uint64_t seed, std::int64_t extent, PhantomFamily family) {
  if (extent < 32) {
    throw ValueError("generate_phantom: extent " + std::to_string(extent) + " is below 32");
  }
  const FamilyRanges& fr = ranges(family);
  Rng rng(seed);
  const double E = static_cast<double>(extent);

  std::array<double, 3> axes{};
  for (auto& a : axes) a = fr.semi_axis.draw(rng) * E;
  std::array<double, 3> center{};
  for (auto& c : center) c = 0.5 * (E - 1.0) + rng.uniform(-0.03, 0.03) * E;
  const Mat3 R = rotation(rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35),
                          rng.uniform(-0.35, 0.35));

  const double brain = fr.brain.draw(rng);
  const double core = fr.core_boost.draw(rng);
  const double fluid = fr.fluid.draw(rng);
  const double gap = fr.gap.draw(rng);
  const double skull = fr.skull.draw(rng);
  const double shell = fr.shell.draw(rng);
  const double scalp = fr.scalp.draw(rng);
  const double fluid_outer = 1.0 + gap;
  const double skull_outer = fluid_outer + shell;
  const double scalp_outer = skull_outer + 0.08;

  std::vector<Wave> waves(3);
  for (auto& w : waves) {
    double n = 0;
    for (auto& d : w.direction) {
      d = rng.normal();
      n += d * d;
    }
    n = std::sqrt(n) + 1e-12;
    for (auto& d : w.direction) d /= n;
    w.frequency = fr.texture_freq.draw(rng);
    w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  // Blobs sit just outside the skull along random directions of the brain
  // frame, so they never touch the brain.
  const int blob_count = fr.blobs_lo + static_cast<int>(rng.below(
                                           static_cast<std::uint64_t>(fr.blobs_hi - fr.blobs_lo + 1)));
  std::vector<Blob> blobs(static_cast<std::size_t>(blob_count));
  for (auto& b : blobs) {
    std::array<double, 3> u{};
    double n = 0;
    for (auto& d : u) {
      d = rng.normal();
      n += d * d;
    }
    n = std::sqrt(n) + 1e-12;
    const double r = scalp_outer + rng.uniform(0.0, 0.06);
    std::array<double, 3> local{};
    for (int i = 0; i < 3; ++i) local[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(i)] / n * r * axes[static_cast<std::size_t>(i)];
    for (int i = 0; i < 3; ++i) {
      double v = center[static_cast<std::size_t>(i)];
      for (int k = 0; k < 3; ++k) v += R[i][k] * local[static_cast<std::size_t>(k)];
      b.center[static_cast<std::size_t>(i)] = v;
    }
    b.radius = rng.uniform(0.03, 0.06) * E;
    b.intensity = rng.uniform(0.5, 0.85);
  }

  Volume vol({extent, extent, extent});
  vol.subject_id = "phantom";
  vol.mask.emplace(static_cast<std::size_t>(vol.voxel_count()), 0);
  for (std::int64_t z = 0; z < extent; ++z) {
    for (std::int64_t y = 0; y < extent; ++y) {
      for (std::int64_t x = 0; x < extent; ++x) {
        const std::array<double, 3> p{static_cast<double>(x), static_cast<double>(y),
                                      static_cast<double>(z)};
        std::array<double, 3> d{};
        for (int i = 0; i < 3; ++i) d[static_cast<std::size_t>(i)] = p[static_cast<std::size_t>(i)] - center[static_cast<std::size_t>(i)];
        double r2 = 0;
        for (int i = 0; i < 3; ++i) {
          // local = R^T d
          double q = 0;
          for (int k = 0; k < 3; ++k) q += R[k][i] * d[static_cast<std::size_t>(k)];
          q /= axes[static_cast<std::size_t>(i)];
          r2 += q * q;
        }
        const double r = std::sqrt(r2);

        double value = 0.0;
        bool is_brain = false;
        if (r <= 1.0) {
          is_brain = true;
          double tex = 0.0;
          for (const auto& w : waves) {
            double proj = 0;
            for (int i = 0; i < 3; ++i) proj += w.direction[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(i)] / E;
            tex += std::cos(2.0 * std::numbers::pi * w.frequency * proj + w.phase);
          }
          value = brain + fr.texture_amp * tex / 3.0 + (r < 0.6 ? core : 0.0);
        } else if (r <= fluid_outer) {
          value = fluid;
        } else if (r <= skull_outer) {
          value = skull;
        } else if (r <= scalp_outer) {
          value = scalp;
        }
        if (!is_brain && r > skull_outer) {
          for (const auto& b : blobs) {
            double dist2 = 0;
            for (int i = 0; i < 3; ++i) {
              const double t = p[static_cast<std::size_t>(i)] - b.center[static_cast<std::size_t>(i)];
              dist2 += t * t;
            }
            if (dist2 <= b.radius * b.radius) value = std::max(value, b.intensity);
          }
        }
        const auto k = vol.index(x, y, z);
        vol.intensities[k] = static_cast<float>(value);
        (*vol.mask)[k] = is_brain ? 1 : 0;
      }
    }
  }
  for (auto& v : vol.intensities) v = static_cast<float>(v + fr.noise * rng.normal());
  return vol;
}

}  // namespace cstrip

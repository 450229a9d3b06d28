#include "contextstrip/data/normalize.hpp"

#include <algorithm>
#include <cmath>

#include "contextstrip/core/error.hpp"

namespace cstrip {

double percentile(std::span<const float> values, double q) {
  if (values.empty()) throw ValueError("percentile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw ValueError("percentile: q outside [0, 1]");
  std::vector<float> sorted(values.begin(), values.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(lo), sorted.end());
  const double a = sorted[lo];
  double b = a;
  if (hi != lo) b = *std::min_element(sorted.begin() + static_cast<std::ptrdiff_t>(hi), sorted.end());
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

Volume normalize_volume(const Volume& volume) {
  Volume out = volume;
  if (volume.intensities.empty()) return out;
  const double lo = percentile(volume.intensities, 0.01);
  const double hi = percentile(volume.intensities, 0.99);
  const double range = hi - lo;
  for (auto& v : out.intensities) {
    if (!(range > 0.0)) {
      v = 0.0f;
      continue;
    }
    const double c = std::clamp(static_cast<double>(v), lo, hi);
    v = static_cast<float>((c - lo) / range);
  }
  return out;
}

std::vector<float> resize_bilinear(std::span<const float> plane, std::int64_t h, std::int64_t w,
                                   std::int64_t out_h, std::int64_t out_w) {
  if (static_cast<std::int64_t>(plane.size()) != h * w || out_h <= 0 || out_w <= 0) {
    throw ShapeError("resize_bilinear: bad plane geometry");
  }
  std::vector<float> out(static_cast<std::size_t>(out_h * out_w));
  if (h == out_h && w == out_w) {
    std::copy(plane.begin(), plane.end(), out.begin());
    return out;
  }
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  for (std::int64_t r = 0; r < out_h; ++r) {
    const double fy = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const auto y0 = static_cast<std::int64_t>(std::floor(fy));
    const std::int64_t y1 = std::min(y0 + 1, h - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::int64_t c = 0; c < out_w; ++c) {
      const double fx = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const auto x0 = static_cast<std::int64_t>(std::floor(fx));
      const std::int64_t x1 = std::min(x0 + 1, w - 1);
      const double tx = fx - static_cast<double>(x0);
      auto at = [&](std::int64_t y, std::int64_t x) {
        return static_cast<double>(plane[static_cast<std::size_t>(y * w + x)]);
      };
      const double top = at(y0, x0) + tx * (at(y0, x1) - at(y0, x0));
      const double bottom = at(y1, x0) + tx * (at(y1, x1) - at(y1, x0));
      out[static_cast<std::size_t>(r * out_w + c)] = static_cast<float>(top + ty * (bottom - top));
    }
  }
  return out;
}

std::vector<std::uint8_t> resize_nearest(std::span<const std::uint8_t> plane, std::int64_t h,
                                         std::int64_t w, std::int64_t out_h, std::int64_t out_w) {
  if (static_cast<std::int64_t>(plane.size()) != h * w || out_h <= 0 || out_w <= 0) {
    throw ShapeError("resize_nearest: bad plane geometry");
  }
  std::vector<std::uint8_t> out(static_cast<std::size_t>(out_h * out_w));
  for (std::int64_t r = 0; r < out_h; ++r) {
    const std::int64_t y = std::min(h - 1, (2 * r + 1) * h / (2 * out_h));
    for (std::int64_t c = 0; c < out_w; ++c) {
      const std::int64_t x = std::min(w - 1, (2 * c + 1) * w / (2 * out_w));
      out[static_cast<std::size_t>(r * out_w + c)] = plane[static_cast<std::size_t>(y * w + x)];
    }
  }
  return out;
}

Volume resample_inplane(const Volume& volume, std::int64_t hw) {
  if (hw <= 0) throw ValueError("resample_inplane: target extent must be positive");
  const std::int64_t X = volume.extents[0], Y = volume.extents[1], Z = volume.extents[2];
  if (X == hw && Z == hw) return volume;
  Volume out({hw, Y, hw}, {volume.spacing[0] * static_cast<double>(X) / static_cast<double>(hw),
                           volume.spacing[1],
                           volume.spacing[2] * static_cast<double>(Z) / static_cast<double>(hw)});
  out.subject_id = volume.subject_id;
  if (volume.mask) out.mask.emplace(static_cast<std::size_t>(out.voxel_count()), 0);
  for (std::int64_t y = 0; y < Y; ++y) {
    const auto plane = resize_bilinear(volume.coronal_slice(y), Z, X, hw, hw);
    std::vector<std::uint8_t> labels;
    if (volume.mask) labels = resize_nearest(volume.coronal_mask(y), Z, X, hw, hw);
    for (std::int64_t z = 0; z < hw; ++z) {
      for (std::int64_t x = 0; x < hw; ++x) {
        const auto k = static_cast<std::size_t>(z * hw + x);
        out.intensities[out.index(x, y, z)] = plane[k];
        if (volume.mask) (*out.mask)[out.index(x, y, z)] = labels[k];
      }
    }
  }
  return out;
}

Volume prepare_volume(const Volume& volume, std::int64_t hw) {
  return resample_inplane(normalize_volume(volume), hw);
}

}  // namespace cstrip

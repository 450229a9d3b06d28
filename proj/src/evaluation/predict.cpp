#include "contextstrip/evaluation/predict.hpp"

#include <algorithm>
#include <deque>

#include "contextstrip/core/error.hpp"
#include "contextstrip/data/normalize.hpp"
#include "contextstrip/data/sampling.hpp"
#include "contextstrip/network/model.hpp"

namespace cstrip {

namespace {

template <typename Dtype>
void check_params_fit(const ModelParams<Dtype>& params, const ArchConfig& cfg) {
  const auto expected = net::init_params<Dtype>(cfg, 0);
  if (expected.size() != params.size()) {
    throw ValueError("parameters hold " + std::to_string(params.size()) + " tensors, the " +
                     "architecture needs " + std::to_string(expected.size()));
  }
  for (const auto& e : expected.entries()) {
    if (!params.contains(e.name)) throw ValueError("parameters lack '" + e.name + "'");
    if (params.at(e.name).shape() != e.tensor.shape()) {
      throw ValueError("parameter '" + e.name + "' does not match the architecture's shape");
    }
  }
}

}  // namespace

std::vector<std::uint8_t> largest_component(std::span<const std::uint8_t> labels,
                                            const std::array<std::int64_t, 3>& extents) {
  const auto [X, Y, Z] = extents;
  if (static_cast<std::int64_t>(labels.size()) != X * Y * Z) {
    throw ShapeError("largest_component: label count does not match the extents");
  }
  std::vector<std::int32_t> component(labels.size(), -1);
  std::vector<std::int64_t> sizes;
  std::deque<std::int64_t> queue;
  for (std::int64_t start = 0; start < static_cast<std::int64_t>(labels.size()); ++start) {
    if (!labels[static_cast<std::size_t>(start)] || component[static_cast<std::size_t>(start)] >= 0) continue;
    const auto id = static_cast<std::int32_t>(sizes.size());
    std::int64_t size = 0;
    component[static_cast<std::size_t>(start)] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::int64_t k = queue.front();
      queue.pop_front();
      ++size;
      const std::int64_t x = k % X, y = (k / X) % Y, z = k / (X * Y);
      const std::int64_t nb[6][3] = {{x - 1, y, z}, {x + 1, y, z}, {x, y - 1, z},
                                     {x, y + 1, z}, {x, y, z - 1}, {x, y, z + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= X || n[1] < 0 || n[1] >= Y || n[2] < 0 || n[2] >= Z) continue;
        const auto j = static_cast<std::size_t>(n[0] + X * (n[1] + Y * n[2]));
        if (labels[j] && component[j] < 0) {
          component[j] = id;
          queue.push_back(static_cast<std::int64_t>(j));
        }
      }
    }
    sizes.push_back(size);
  }
  std::vector<std::uint8_t> out(labels.size(), 0);
  if (sizes.empty()) return out;
  const auto keep = static_cast<std::int32_t>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = component[i] == keep ? 1 : 0;
  return out;
}

template <typename Dtype>
Volume predict_volume(const ModelParams<Dtype>& params, const ArchConfig& cfg,
                      const Volume& volume, const PredictOptions& options) {
  cfg.validate();
  check_params_fit(params, cfg);
  if (options.batch_size < 1) throw ValueError("predict_volume: batch size must be positive");
  Volume prepared = prepare_volume(volume, cfg.input_hw);
  prepared.mask.reset();

  const std::int64_t X = volume.extents[0], Y = volume.extents[1], Z = volume.extents[2];
  const std::int64_t hw = cfg.input_hw;
  Volume out(volume.extents, volume.spacing);
  out.subject_id = volume.subject_id;
  out.mask.emplace(static_cast<std::size_t>(out.voxel_count()), 0);

  net::ForwardOptions fwd;
  for (std::int64_t first = 0; first < Y; first += options.batch_size) {
    const std::int64_t last = std::min<std::int64_t>(Y, first + options.batch_size);
    std::vector<SamplePair> pairs;
    for (std::int64_t y = first; y < last; ++y) {
      pairs.push_back(sample_training_pair(prepared, y, cfg.depth, cfg.classes));
    }
    const auto batch = make_batch<Dtype>(pairs, cfg.classes);
    Graph<Dtype> g(false);
    const auto result = net::model_forward(g, batch.slice, batch.subvol, params, cfg, fwd);
    const auto probs = result.pixel_probs.data();
    const std::int64_t plane = hw * hw;
    for (std::int64_t n = 0; n < last - first; ++n) {
      std::vector<std::uint8_t> labels(static_cast<std::size_t>(plane));
      for (std::int64_t p = 0; p < plane; ++p) {
        int best = 0;
        Dtype best_value = probs[static_cast<std::size_t>(n * cfg.classes * plane + p)];
        for (int c = 1; c < cfg.classes; ++c) {
          const Dtype v = probs[static_cast<std::size_t>((n * cfg.classes + c) * plane + p)];
          if (v > best_value) {
            best = c;
            best_value = v;
          }
        }
        labels[static_cast<std::size_t>(p)] = best > 0 ? 1 : 0;
      }
      const auto back = resize_nearest(labels, hw, hw, Z, X);
      const std::int64_t y = first + n;
      for (std::int64_t z = 0; z < Z; ++z) {
        for (std::int64_t x = 0; x < X; ++x) {
          (*out.mask)[out.index(x, y, z)] = back[static_cast<std::size_t>(z * X + x)];
        }
      }
    }
  }
  if (options.largest_component) *out.mask = largest_component(*out.mask, out.extents);
  for (std::size_t i = 0; i < out.intensities.size(); ++i) {
    out.intensities[i] = static_cast<float>((*out.mask)[i]);
  }
  return out;
}

template Volume predict_volume(const ModelParams<float>&, const ArchConfig&, const Volume&,
                               const PredictOptions&);
template Volume predict_volume(const ModelParams<double>&, const ArchConfig&, const Volume&,
                               const PredictOptions&);

}  // namespace cstrip

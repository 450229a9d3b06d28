#include "contextstrip/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "contextstrip/core/error.hpp"
#include "contextstrip/core/rng.hpp"

namespace cstrip {

namespace {

struct Evaluation {
  double value;
  std::uint64_t fingerprint;
};

template <typename Dtype>
Evaluation evaluate(const LossBuilder<Dtype>& build) {
  Graph<Dtype> graph(false);
  graph.track_branches(true);
  const double value = static_cast<double>(build(graph).item());
  if (!std::isfinite(value)) throw NumericError("grad_check: loss is not finite");
  return {value, graph.branch_fingerprint()};
}

/// Yields distinct coordinates in random order; every coordinate when the
/// total is small.
class CoordinateStream {
 public:
  CoordinateStream(std::int64_t total, std::size_t samples, std::uint64_t seed)
      : total_(total), exhaustive_(static_cast<std::int64_t>(samples) >= total), rng_(seed) {}

  bool next(std::int64_t& out) {
    if (static_cast<std::int64_t>(seen_.size()) >= total_) return false;
    if (exhaustive_) {
      out = static_cast<std::int64_t>(seen_.size());
      seen_.insert(out);
      return true;
    }
    do {
      out = static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(total_)));
    } while (!seen_.insert(out).second);
    return true;
  }

 private:
  std::int64_t total_;
  bool exhaustive_;
  Rng rng_;
  std::unordered_set<std::int64_t> seen_;
};

}  // namespace

template <typename Dtype>
GradCheckReport grad_check(const LossBuilder<Dtype>& build, const NamedTensors<Dtype>& leaves,
                           const GradCheckOptions& options) {
  GradCheckReport report;
  for (const auto& [name, leaf] : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    Graph<Dtype> graph;
    auto loss = build(graph);
    if (!std::isfinite(static_cast<double>(loss.item()))) {
      throw NumericError("grad_check: loss is not finite");
    }
    graph.backward(loss);
  }

  std::vector<std::int64_t> offsets{0};
  for (const auto& [name, leaf] : leaves) offsets.push_back(offsets.back() + leaf.numel());
  if (options.samples == 0 || offsets.back() == 0) return report;

  const std::uint64_t base = evaluate(build).fingerprint;
  CoordinateStream stream(offsets.back(), options.samples, options.seed);
  // Bounded so that a function that is kinked almost everywhere terminates.
  const std::size_t max_draws = std::max<std::size_t>(options.samples * 16, 64);
  std::int64_t flat = 0;
  for (std::size_t draws = 0;
       report.checked < options.samples && draws < max_draws && stream.next(flat); ++draws) {
    const auto which = static_cast<std::size_t>(
        std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const auto& [name, leaf] = leaves[which];
    const auto index = static_cast<std::size_t>(flat - offsets[which]);

    const double analytic = leaf.has_grad() ? static_cast<double>(leaf.grad()[index]) : 0.0;
    auto values = leaf.mutable_data();
    const Dtype original = values[index];
    values[index] = static_cast<Dtype>(original + options.step);
    const auto plus = evaluate(build);
    values[index] = static_cast<Dtype>(original - options.step);
    const auto minus = evaluate(build);
    values[index] = original;
    if (plus.fingerprint != base || minus.fingerprint != base) {
      ++report.skipped_kinks;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * options.step);

    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic - numeric) / denom;
    ++report.checked;
    if (err >= report.max_relative_error || report.worst_index < 0) {
      report.max_relative_error = err;
      report.worst_leaf = name;
      report.worst_index = static_cast<std::int64_t>(index);
      report.worst_analytic = analytic;
      report.worst_numeric = numeric;
    }
  }
  return report;
}

template GradCheckReport grad_check<float>(const LossBuilder<float>&, const NamedTensors<float>&,
                                           const GradCheckOptions&);
template GradCheckReport grad_check<double>(const LossBuilder<double>&,
                                            const NamedTensors<double>&, const GradCheckOptions&);

}  // namespace cstrip

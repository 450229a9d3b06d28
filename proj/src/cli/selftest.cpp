#include "contextstrip/cli/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/core/rng.hpp"
#include "contextstrip/evaluation/metrics.hpp"
#include "contextstrip/losses/losses.hpp"
#include "contextstrip/network/model.hpp"

namespace cstrip {

namespace {

using T = double;

struct MaskPair {
  std::vector<std::uint8_t> pred;
  std::vector<std::uint8_t> truth;
};

MaskPair random_masks(Rng& rng) {
  std::size_t n = 1;
  for (int a = 0; a < 3; ++a) n *= 1 + rng.below(16);
  const double p_pred = rng.uniform(), p_truth = rng.uniform();
  MaskPair m{std::vector<std::uint8_t>(n), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    m.pred[i] = rng.uniform() < p_pred;
    m.truth[i] = rng.uniform() < p_truth;
  }
  return m;
}

/// Number of trials where a metric disagrees with the rational recount
/// num/den evaluated as a double, or where definedness differs.
struct MetricMismatches {
  int dice = 0, sens = 0, spec = 0;
};

void compare(int& mismatches, const std::optional<double>& got, std::int64_t num, std::int64_t den) {
  if (den == 0) {
    if (got.has_value()) ++mismatches;
    return;
  }
  if (!got || *got != static_cast<double>(num) / static_cast<double>(den)) ++mismatches;
}

}  // namespace

bool SelftestRow::passed() const {
  if (!std::isfinite(value)) return false;
  return tolerance == 0.0 ? value == expected : std::abs(value - expected) <= tolerance;
}

bool SelftestResult::passed() const {
  for (const auto& r : rows) {
    if (!r.passed()) return false;
  }
  return !rows.empty();
}

SelftestResult run_selftest(std::uint64_t seed, int metric_trials) {
  SelftestResult result;
  auto& rows = result.rows;
  Rng rng(seed);
  Graph<T> g(false);

  const std::int64_t n = 2, h = 8, w = 8;
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n * h * w));
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
  labels[0] = 0;
  labels[1] = 1;
  const auto target = loss::one_hot<T>(labels, n, 2, h, w);
  const auto ce = loss::cross_entropy(g, target, target);
  const auto dc = loss::dice(g, target, target);
  const auto presence = loss::class_presence_labels(labels, 2);
  Tensor<T> y({1, 2}, std::vector<T>{T(presence[0]), T(presence[1])});
  const auto sc = loss::sec(g, y, y);
  const auto total = loss::total_loss(g, ce, dc, sc, 0.1).total;
  rows.push_back({"loss.ce(one-hot)", ce.item(), 0.0, 1e-10});
  rows.push_back({"loss.dice(one-hot)", dc.item(), -1.0, 1e-6});
  rows.push_back({"loss.sec(one-hot)", sc.item(), 0.0, 1e-10});
  rows.push_back({"loss.total(one-hot)", total.item(), -1.0, 1e-6});
  const auto uniform = Tensor<T>::full({n, 2, h, w}, T(0.5));
  rows.push_back({"loss.ce(uniform)", loss::cross_entropy(g, uniform, target).item(), std::log(2.0),
                  1e-6});

  MetricMismatches mm;
  double worst_soft = 0.0;
  for (int t = 0; t < metric_trials; ++t) {
    const auto m = random_masks(rng);
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < m.pred.size(); ++i) {
      const bool p = m.pred[i] != 0, q = m.truth[i] != 0;
      tp += p && q;
      fp += p && !q;
      tn += !p && !q;
      fn += !p && q;
    }
    const auto c = confusion(m.pred, m.truth);
    compare(mm.dice, dice_score(c), 2 * tp, 2 * tp + fp + fn);
    compare(mm.sens, sensitivity(c), tp, tp + fn);
    compare(mm.spec, specificity(c), tn, tn + fp);
    if (t < 100 && tp + fp + fn > 0) {
      // Single-class soft Dice on hard masks reduces to the hard score.
      const auto size = static_cast<std::int64_t>(m.pred.size());
      Tensor<T> p({1, 1, 1, size}), q({1, 1, 1, size});
      for (std::int64_t i = 0; i < size; ++i) {
        p.mutable_data()[i] = m.pred[i];
        q.mutable_data()[i] = m.truth[i];
      }
      worst_soft = std::max(worst_soft, std::abs(-loss::dice(g, p, q).item() - *dice_score(c)));
    }
  }
  rows.push_back({"metric.dice recount mismatches", T(mm.dice), 0.0, 0.0});
  rows.push_back({"metric.sensitivity recount mismatches", T(mm.sens), 0.0, 0.0});
  rows.push_back({"metric.specificity recount mismatches", T(mm.spec), 0.0, 0.0});
  rows.push_back({"metric.dice vs -dice loss", worst_soft, 0.0, 1e-5});

  const std::int64_t cf = 4;
  Tensor<T> x({2, cf, 3, 3}), e({2, cf}), wt({cf, cf});
  for (auto& v : x.mutable_data()) v = rng.uniform(-5, 5);
  for (auto& v : e.mutable_data()) v = rng.uniform(-1, 1);
  for (auto& v : wt.mutable_data()) v = rng.uniform(-0.1, 0.1);
  const auto open = net::context_scaling(g, x, e, wt, Tensor<T>::full({cf}, T(20)));
  double worst_open = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    worst_open = std::max(worst_open, std::abs(open.output.data()[i] - x.data()[i]));
  }
  rows.push_back({"context.bias+20 passthrough", worst_open, 0.0, 1e-6});
  const auto half =
      net::context_scaling(g, x, Tensor<T>::full({2, cf}, T(0)), wt, Tensor<T>::full({cf}, T(0)));
  double half_mismatch = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    half_mismatch += half.output.data()[i] != 0.5 * x.data()[i];
  }
  rows.push_back({"context.e=0 halving mismatches", half_mismatch, 0.0, 0.0});
  return result;
}

std::string format_selftest(const SelftestResult& result) {
  std::ostringstream os;
  char line[200];
  for (const auto& r : result.rows) {
    std::snprintf(line, sizeof(line), "%-40s %14.6g  expected %-10.6g tol %-8.0e %s\n", r.name.c_str(),
                  r.value, r.expected, r.tolerance, r.passed() ? "ok" : "FAIL");
    os << line;
  }
  os << (result.passed() ? "all passed\n" : "FAILED\n");
  return os.str();
}

void to_json(nlohmann::json& j, const SelftestResult& result) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : result.rows) {
    rows.push_back({{"name", r.name},
                    {"value", r.value},
                    {"expected", r.expected},
                    {"tolerance", r.tolerance},
                    {"passed", r.passed()}});
  }
  j = nlohmann::json{{"checks", rows}, {"passed", result.passed()}};
}

}  // namespace cstrip

#include "contextstrip/cli/gradcheck_suite.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "contextstrip/autodiff/grad_check.hpp"
#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/core/rng.hpp"
#include "contextstrip/losses/losses.hpp"
#include "contextstrip/network/model.hpp"

namespace cstrip {

namespace {

using T = double;
constexpr int kDraws = 3;
/// Balances truncation (O(h^2)) against cancellation (O(eps/h)) error.
constexpr double kStep = 1e-4;

Tensor<T> uniform(Rng& rng, const Shape& shape, double lo, double hi) {
  Tensor<T> t(shape, true);
  for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
  return t;
}

/// Magnitudes in [0.05, 1) with random sign, so relu kinks are not straddled.
Tensor<T> off_zero(Rng& rng, const Shape& shape) {
  Tensor<T> t(shape, true);
  for (auto& v : t.mutable_data()) v = rng.uniform(0.05, 1.0) * (rng.uniform() < 0.5 ? -1 : 1);
  return t;
}

/// A permutation of evenly spaced values, so every pooling window has a
/// strict maximum.
Tensor<T> distinct(Rng& rng, const Shape& shape) {
  Tensor<T> t(shape, true);
  auto v = t.mutable_data();
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = -1.0 + 2.0 * static_cast<double>(order[i]) / static_cast<double>(v.size());
  }
  return t;
}

Shape nchw(Rng& rng) {
  return {1 + static_cast<std::int64_t>(rng.below(2)), 1 + static_cast<std::int64_t>(rng.below(4)),
          2 * (1 + static_cast<std::int64_t>(rng.below(4))),
          2 * (1 + static_cast<std::int64_t>(rng.below(4)))};
}

Tensor<T> one_hot_target(Rng& rng, std::int64_t n, int c, std::int64_t h, std::int64_t w) {
  std::vector<T> values(static_cast<std::size_t>(n * c * h * w), 0.0);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t p = 0; p < h * w; ++p) {
      const auto k = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(c)));
      values[static_cast<std::size_t>((i * c + k) * h * w + p)] = 1.0;
    }
  return Tensor<T>({n, c, h, w}, std::move(values));
}

void fill_worst(GradcheckRow& row, const GradCheckReport& report) {
  row.max_relative_error = report.max_relative_error;
  row.worst = report.worst_leaf + "[" + std::to_string(report.worst_index) + "]";
  row.worst_analytic = report.worst_analytic;
  row.worst_numeric = report.worst_numeric;
}

struct Case {
  LossBuilder<T> build;
  NamedTensors<T> leaves;
};

class Suite {
 public:
  explicit Suite(std::uint64_t seed) : rng_(seed) {}

  /// Checks `make` kDraws times; the op output is reduced with fixed random
  /// weights unless `scalar` says it already is a loss. Strongly curved ops
  /// take a smaller step, ops whose gradients cancel a larger one.
  void op(const std::string& name, const std::function<Case(Rng&)>& make, bool scalar = false,
          double step = kStep) {
    GradcheckRow row;
    row.name = name;
    row.tolerance = kOpGradTolerance;
    for (int d = 0; d < kDraws; ++d) {
      Case c = make(rng_);
      LossBuilder<T> build = c.build;
      if (!scalar) {
        Graph<T> probe(false);
        const Shape shape = c.build(probe).shape();
        Tensor<T> w(shape);
        // Bounded away from zero so no output coordinate is silently ignored.
        for (auto& v : w.mutable_data()) v = rng_.uniform(0.5, 1.0) * (rng_.uniform() < 0.5 ? -1 : 1);
        auto inner = c.build;
        build = [inner, w](Graph<T>& g) { return ops::weighted_sum(g, inner(g), w); };
      }
      GradCheckOptions opt;
      opt.step = step;
      opt.samples = 64;
      opt.seed = rng_.next();
      const auto report = grad_check<T>(build, c.leaves, opt);
      row.checked += report.checked;
      row.skipped_kinks += report.skipped_kinks;
      if (report.max_relative_error >= row.max_relative_error) fill_worst(row, report);
    }
    rows_.push_back(row);
  }

  std::vector<GradcheckRow> rows() const { return rows_; }
  Rng& rng() { return rng_; }

 private:
  Rng rng_;
  std::vector<GradcheckRow> rows_;
};

GradcheckRow full_model_row(std::uint64_t seed) {
  ArchConfig cfg;
  cfg.stages = 3;
  cfg.input_hw = 32;
  auto params = net::init_params<T>(cfg, seed);
  Rng rng(seed);
  Tensor<T> slice({2, 1, 32, 32}), subvol({2, cfg.depth, 32, 32});
  for (auto& v : slice.mutable_data()) v = rng.uniform();
  for (auto& v : subvol.mutable_data()) v = rng.uniform();
  const auto target = one_hot_target(rng, 2, 2, 32, 32);
  Tensor<T> y({2, 2}, std::vector<T>{1, 1, 1, 1});
  const net::ForwardOptions opts{ops::Mode::Train, 0.0, nullptr};
  LossBuilder<T> build = [&](Graph<T>& g) {
    const auto out = net::model_forward(g, slice, subvol, params, cfg, opts);
    const auto ce = loss::cross_entropy(g, out.pixel_probs, target);
    const auto dc = loss::dice(g, out.pixel_probs, target);
    const auto sc = loss::sec(g, out.class_probs, y);
    return loss::total_loss(g, ce, dc, sc, 0.1).total;
  };
  GradCheckOptions opt;
  opt.step = kStep;
  opt.samples = 64;
  opt.seed = seed;
  const auto report = grad_check<T>(build, params.trainable(), opt);
  GradcheckRow row;
  row.name = "full_model";
  row.tolerance = kModelGradTolerance;
  row.checked = report.checked;
  row.skipped_kinks = report.skipped_kinks;
  fill_worst(row, report);
  return row;
}

}  // namespace

bool GradcheckSuiteResult::passed() const {
  for (const auto& r : ops) {
    if (!r.passed()) return false;
  }
  return full_model.checked == 0 || full_model.passed();
}

GradcheckSuiteResult run_gradcheck_suite(std::uint64_t seed, bool include_model) {
  const auto start = std::chrono::steady_clock::now();
  Suite s(seed);
  s.op("conv2d_3x3", [](Rng& r) {
    const Shape x = nchw(r);
    const std::int64_t co = 1 + static_cast<std::int64_t>(r.below(4));
    auto in = uniform(r, x, -1, 1), k = uniform(r, {co, x[1], 3, 3}, -1, 1), b = uniform(r, {co}, -1, 1);
    return Case{[=](Graph<T>& g) { return ops::conv2d(g, in, k, b); }, {{"x", in}, {"w", k}, {"b", b}}};
  });
  s.op("conv2d_1x1", [](Rng& r) {
    const Shape x = nchw(r);
    const std::int64_t co = 1 + static_cast<std::int64_t>(r.below(4));
    auto in = uniform(r, x, -1, 1), k = uniform(r, {co, x[1], 1, 1}, -1, 1), b = uniform(r, {co}, -1, 1);
    return Case{[=](Graph<T>& g) { return ops::conv2d(g, in, k, b); }, {{"x", in}, {"w", k}, {"b", b}}};
  });
  s.op("max_pool2d", [](Rng& r) {
    auto in = distinct(r, nchw(r));
    return Case{[=](Graph<T>& g) { return ops::max_pool2d(g, in); }, {{"x", in}}};
  });
  s.op("linear", [](Rng& r) {
    const std::int64_t n = 1 + r.below(2), f = 1 + r.below(8), o = 1 + r.below(8);
    auto in = uniform(r, {n, f}, -1, 1), w = uniform(r, {f, o}, -1, 1), b = uniform(r, {o}, -1, 1);
    return Case{[=](Graph<T>& g) { return ops::linear(g, in, w, b); }, {{"x", in}, {"w", w}, {"b", b}}};
  });
  s.op("relu", [](Rng& r) {
    auto in = off_zero(r, nchw(r));
    return Case{[=](Graph<T>& g) { return ops::relu(g, in); }, {{"x", in}}};
  });
  s.op("sigmoid", [](Rng& r) {
    auto in = uniform(r, nchw(r), -4, 4);
    return Case{[=](Graph<T>& g) { return ops::sigmoid(g, in); }, {{"x", in}}};
  });
  s.op("softmax", [](Rng& r) {
    auto in = uniform(r, nchw(r), -3, 3);
    return Case{[=](Graph<T>& g) { return ops::softmax(g, in); }, {{"x", in}}};
  }, false, 1e-3);
  for (auto mode : {ops::Mode::Train, ops::Mode::Eval}) {
    s.op(mode == ops::Mode::Train ? "batch_norm_train" : "batch_norm_eval", [mode](Rng& r) {
      const Shape x = nchw(r);
      auto in = uniform(r, x, -2, 2), sc = uniform(r, {x[1]}, 0.5, 1.5), sh = uniform(r, {x[1]}, -1, 1);
      Tensor<T> rm({x[1]}), rv({x[1]});
      for (auto& v : rm.mutable_data()) v = r.uniform(-0.5, 0.5);
      for (auto& v : rv.mutable_data()) v = r.uniform(0.5, 2.0);
      return Case{[=](Graph<T>& g) { return ops::batch_norm(g, in, sc, sh, rm, rv, mode); },
                  {{"x", in}, {"scale", sc}, {"shift", sh}}};
    });
  }
  s.op("dropout", [](Rng& r) {
    auto in = uniform(r, nchw(r), -1, 1);
    const std::uint64_t mask_seed = r.next();
    return Case{[=](Graph<T>& g) {
                  Rng mask(mask_seed);
                  return ops::dropout(g, in, 0.1, ops::Mode::Train, mask);
                },
                {{"x", in}}};
  });
  s.op("concat", [](Rng& r) {
    const Shape a = nchw(r);
    Shape b = a;
    b[1] = 1 + static_cast<std::int64_t>(r.below(4));
    auto x = uniform(r, a, -1, 1), y = uniform(r, b, -1, 1);
    return Case{[=](Graph<T>& g) { return ops::concat(g, std::vector<Tensor<T>>{x, y}); },
                {{"a", x}, {"b", y}}};
  });
  s.op("upsample2x", [](Rng& r) {
    auto in = uniform(r, nchw(r), -1, 1);
    return Case{[=](Graph<T>& g) { return ops::upsample2x(g, in); }, {{"x", in}}};
  });
  s.op("channel_scale", [](Rng& r) {
    const Shape x = nchw(r);
    auto in = uniform(r, x, -1, 1), gamma = uniform(r, {x[0], x[1]}, 0, 1);
    return Case{[=](Graph<T>& g) { return ops::channel_scale(g, in, gamma); },
                {{"x", in}, {"gamma", gamma}}};
  });
  s.op("encoding_aggregate", [](Rng& r) {
    const Shape x = nchw(r);
    const std::int64_t k = 1 + static_cast<std::int64_t>(r.below(4));
    auto in = uniform(r, x, -1, 1), c = uniform(r, {k, x[1]}, -1, 1), sm = uniform(r, {k}, 0.5, 1.5);
    return Case{[=](Graph<T>& g) { return ops::encoding_aggregate(g, in, c, sm); },
                {{"x", in}, {"codewords", c}, {"smoothing", sm}}};
  }, false, 2e-5);
  s.op("sum_axis1", [](Rng& r) {
    auto in = uniform(r, nchw(r), -1, 1);
    return Case{[=](Graph<T>& g) { return ops::sum_axis1(g, in); }, {{"x", in}}};
  });
  s.op("sum", [](Rng& r) {
    auto in = uniform(r, nchw(r), -1, 1);
    return Case{[=](Graph<T>& g) { return ops::sum(g, in); }, {{"x", in}}};
  });
  s.op("scale", [](Rng& r) {
    auto in = uniform(r, nchw(r), -1, 1);
    const T f = r.uniform(-2, 2);
    return Case{[=](Graph<T>& g) { return ops::scale(g, in, f); }, {{"x", in}}};
  });
  s.op("add", [](Rng& r) {
    const Shape x = nchw(r);
    auto a = uniform(r, x, -1, 1), b = uniform(r, x, -1, 1);
    return Case{[=](Graph<T>& g) { return ops::add(g, a, b); }, {{"a", a}, {"b", b}}};
  });
  // Loss terms are checked against the probabilities they consume.
  auto probs_case = [](Rng& r, Shape& shape) {
    shape = nchw(r);
    shape[1] = 2 + static_cast<std::int64_t>(r.below(2));
    return uniform(r, shape, 0.2, 0.8);
  };
  s.op(
      "cross_entropy",
      [probs_case](Rng& r) {
        Shape shape;
        auto probs = probs_case(r, shape);
        const auto target = one_hot_target(r, shape[0], static_cast<int>(shape[1]), shape[2], shape[3]);
        Tensor<T> weights({shape[0], shape[2], shape[3]});
        for (auto& v : weights.mutable_data()) v = r.uniform(1.0, 3.0);
        return Case{[=](Graph<T>& g) { return loss::cross_entropy(g, probs, target, weights); },
                    {{"probs", probs}}};
      },
      true);
  s.op(
      "dice",
      [probs_case](Rng& r) {
        Shape shape;
        auto probs = probs_case(r, shape);
        const auto target = one_hot_target(r, shape[0], static_cast<int>(shape[1]), shape[2], shape[3]);
        return Case{[=](Graph<T>& g) { return loss::dice(g, probs, target); }, {{"probs", probs}}};
      },
      true);
  s.op(
      "sec",
      [](Rng& r) {
        const std::int64_t n = 1 + r.below(3), c = 2 + r.below(2);
        auto probs = uniform(r, {n, c}, 0.2, 0.8);
        Tensor<T> y({n, c});
        for (auto& v : y.mutable_data()) v = r.uniform() < 0.5 ? 0.0 : 1.0;
        return Case{[=](Graph<T>& g) { return loss::sec(g, probs, y); }, {{"probs", probs}}};
      },
      true);

  GradcheckSuiteResult result;
  result.ops = s.rows();
  if (include_model) {
    result.full_model = full_model_row(seed);
  } else {
    result.full_model.name = "full_model";
    result.full_model.tolerance = kModelGradTolerance;
    result.full_model.worst = "not run";
  }
  result.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::string format_gradcheck(const GradcheckSuiteResult& result) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-20s %14s %10s %6s %7s %6s  %s\n", "op", "max rel error",
                "tolerance", "status", "checked", "kinks", "worst coordinate (analytic / numeric)");
  os << line;
  auto emit = [&](const GradcheckRow& r) {
    std::snprintf(line, sizeof(line), "%-20s %14.3e %10.0e %6s %7zu %6zu  %s (%.6e / %.6e)\n",
                  r.name.c_str(), r.max_relative_error, r.tolerance, r.passed() ? "ok" : "FAIL",
                  r.checked, r.skipped_kinks, r.worst.c_str(), r.worst_analytic, r.worst_numeric);
    os << line;
  };
  for (const auto& r : result.ops) emit(r);
  if (result.full_model.checked > 0) emit(result.full_model);
  std::snprintf(line, sizeof(line), "%s in %.1f s\n", result.passed() ? "all passed" : "FAILED",
                result.seconds);
  os << line;
  return os.str();
}

void to_json(nlohmann::json& j, const GradcheckSuiteResult& result) {
  auto row = [](const GradcheckRow& r) {
    return nlohmann::json{{"name", r.name},
                          {"max_relative_error", r.max_relative_error},
                          {"tolerance", r.tolerance},
                          {"checked", r.checked},
                          {"skipped_kinks", r.skipped_kinks},
                          {"worst", r.worst},
                          {"worst_analytic", r.worst_analytic},
                          {"worst_numeric", r.worst_numeric},
                          {"passed", r.passed()}};
  };
  nlohmann::json ops = nlohmann::json::array();
  for (const auto& r : result.ops) ops.push_back(row(r));
  j = nlohmann::json{{"ops", ops},
                     {"full_model", row(result.full_model)},
                     {"passed", result.passed()},
                     {"seconds", result.seconds}};
}

}  // namespace cstrip

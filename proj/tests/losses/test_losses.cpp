#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "contextstrip/autodiff/grad_check.hpp"
#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/core/error.hpp"
#include "contextstrip/losses/losses.hpp"
#include "support/generators.hpp"

namespace cstrip {

namespace {

/// Random valid distributions over axis 1 via softmax of random logits.
template <typename Dtype>
Tensor<Dtype> random_probs(Rng& rng, const Shape& shape, bool requires_grad = false) {
  Graph<Dtype> g(false);
  auto logits = testing::random_tensor<Dtype>(rng, shape, -3, 3);
  auto p = ops::softmax(g, logits).clone();
  p.set_requires_grad(requires_grad);
  return p;
}

}  // namespace

template <typename Dtype>
class LossTest : public ::testing::Test {
 protected:
  Graph<Dtype> g{false};
};

using Dtypes = ::testing::Types<float, double>;
TYPED_TEST_SUITE(LossTest, Dtypes);

TYPED_TEST(LossTest, CrossEntropyExamples) {
  using T = TypeParam;
  Rng rng(1);
  auto labels = testing::random_labels(rng, 2 * 4 * 4, 0.5);
  auto target = loss::one_hot<T>(labels, 2, 2, 4, 4);
  EXPECT_NEAR(loss::cross_entropy(this->g, target, target).item(), 0.0, 1e-10);

  auto uniform = Tensor<T>::full({2, 2, 4, 4}, T(0.5));
  EXPECT_NEAR(loss::cross_entropy(this->g, uniform, target).item(), std::log(2.0), 1e-6);

  auto probs = random_probs<T>(rng, {2, 2, 4, 4});
  const double base = loss::cross_entropy(this->g, probs, target).item();
  auto w2 = Tensor<T>::full({2, 4, 4}, T(2));
  EXPECT_NEAR(loss::cross_entropy(this->g, probs, target, w2).item(), 2 * base, 1e-5 * base);

  auto bad = target.clone();
  bad.mutable_data()[0] = T(0.5);
  EXPECT_THROW(loss::cross_entropy(this->g, probs, bad), ValueError);
}

TYPED_TEST(LossTest, DiceExamples) {
  using T = TypeParam;
  Rng rng(2);
  auto labels = testing::random_labels(rng, 3 * 5 * 5, 0.3);
  labels[0] = 1;
  labels[1] = 0;
  auto target = loss::one_hot<T>(labels, 3, 2, 5, 5);
  EXPECT_NEAR(loss::dice(this->g, target, target).item(), -1.0, 1e-6);

  // binary, disjoint supports in every class
  std::vector<std::uint8_t> a{1, 1, 0, 0}, b{0, 0, 1, 1};
  auto pa = loss::one_hot<T>(a, 1, 2, 2, 2);
  auto pb = loss::one_hot<T>(b, 1, 2, 2, 2);
  EXPECT_NEAR(loss::dice(this->g, pa, pb).item(), 0.0, 1e-6);

  // foreground: prediction covers 3 px, target 2 px, overlap 2 -> -0.8
  std::vector<std::uint8_t> pred{1, 1, 1, 0, 0, 0}, truth{1, 1, 0, 0, 0, 0};
  auto pp = loss::one_hot<T>(pred, 1, 2, 2, 3);
  auto pt = loss::one_hot<T>(truth, 1, 2, 2, 3);
  // background: prediction 3 px, target 4 px, overlap 3 -> -6/7
  EXPECT_NEAR(loss::dice(this->g, pp, pt).item(), 0.5 * (-0.8 - 6.0 / 7.0), 1e-6);
}

TYPED_TEST(LossTest, SecExamples) {
  using T = TypeParam;
  Tensor<T> y({2, 2}, {1, 0, 1, 1});
  EXPECT_NEAR(loss::sec(this->g, y, y).item(), 0.0, 1e-10);

  Tensor<T> ones({1, 2}, {1, 1});
  auto half = Tensor<T>::full({1, 2}, T(0.5));
  EXPECT_NEAR(loss::sec(this->g, half, ones).item(), std::log(2.0), 1e-6);

  Tensor<T> y10({1, 2}, {1, 0});
  double previous = 1e9;
  for (double eps : {0.1, 0.01, 0.001, 1e-5}) {
    Tensor<T> p({1, 2}, {static_cast<T>(1 - eps), static_cast<T>(eps)});
    const double v = loss::sec(this->g, p, y10).item();
    EXPECT_LT(v, previous);
    previous = v;
  }
  EXPECT_LT(previous, 1e-4);
}

TYPED_TEST(LossTest, TotalLossExamples) {
  using T = TypeParam;
  const auto b = loss::total_loss(0.5, -0.8, 0.7, 0.1);
  EXPECT_NEAR(b.total, -0.23, 1e-12);
  EXPECT_EQ(loss::total_loss(0.5, -0.8, 0.7, 0.0).total, 0.5 + -0.8);

  Rng rng(3);
  auto labels = testing::random_labels(rng, 16, 0.5);
  labels[0] = 1;
  labels[1] = 0;
  auto target = loss::one_hot<T>(labels, 1, 2, 4, 4);
  Tensor<T> y({1, 2}, {1, 1});
  auto terms = loss::total_loss(this->g, loss::cross_entropy(this->g, target, target),
                                loss::dice(this->g, target, target), loss::sec(this->g, y, y),
                                0.1);
  EXPECT_NEAR(terms.breakdown().total, -1.0, 1e-6);
  EXPECT_THROW(loss::total_loss(0.0, 0.0, 0.0, -1.0), ValueError);
}

TYPED_TEST(LossTest, TotalIsExactAffineCombination) {
  using T = TypeParam;
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto ce = Tensor<T>::scalar(static_cast<T>(rng.uniform(0, 2)));
    auto dc = Tensor<T>::scalar(static_cast<T>(rng.uniform(-1, 0)));
    auto sc = Tensor<T>::scalar(static_cast<T>(rng.uniform(0, 2)));
    const double lambda = rng.uniform(0, 3);
    auto terms = loss::total_loss(this->g, ce, dc, sc, lambda);
    const T expected = (ce.item() + dc.item()) + static_cast<T>(lambda) * sc.item();
    EXPECT_EQ(terms.total.item(), expected);
  }
}

TYPED_TEST(LossTest, RangesHoldOnRandomInputs) {
  using T = TypeParam;
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Shape s{1 + static_cast<std::int64_t>(rng.below(2)), 2 + static_cast<std::int64_t>(rng.below(2)),
                  1 + static_cast<std::int64_t>(rng.below(6)), 1 + static_cast<std::int64_t>(rng.below(6))};
    auto probs = random_probs<T>(rng, s);
    std::vector<std::uint8_t> labels(static_cast<std::size_t>(s[0] * s[2] * s[3]));
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(s[1])));
    auto target = loss::one_hot<T>(labels, s[0], static_cast<int>(s[1]), s[2], s[3]);
    const double d = loss::dice(this->g, probs, target).item();
    EXPECT_GT(d, -1.0);
    EXPECT_LE(d, 0.0);
    EXPECT_GE(loss::cross_entropy(this->g, probs, target).item(), 0.0);
    auto cp = testing::random_tensor<T>(rng, {s[0], s[1]}, 0.01, 0.99);
    Tensor<T> y({s[0], s[1]});
    for (auto& v : y.mutable_data()) v = static_cast<T>(rng.below(2));
    EXPECT_GE(loss::sec(this->g, cp, y).item(), 0.0);
  }
}

TYPED_TEST(LossTest, DiceSymmetricUnderClassPermutation) {
  using T = TypeParam;
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t C = 3, P = 9;
    auto probs = random_probs<T>(rng, {2, C, 3, 3});
    std::vector<std::uint8_t> labels(2 * P);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(C));
    auto target = loss::one_hot<T>(labels, 2, 3, 3, 3);
    std::vector<std::int64_t> perm{0, 1, 2};
    rng.shuffle(perm);
    auto permute = [&](const Tensor<T>& t) {
      Tensor<T> out(t.shape());
      for (std::int64_t n = 0; n < 2; ++n)
        for (std::int64_t c = 0; c < C; ++c)
          for (std::int64_t i = 0; i < P; ++i)
            out.mutable_data()[static_cast<std::size_t>((n * C + perm[static_cast<std::size_t>(c)]) * P + i)] =
                t.data()[static_cast<std::size_t>((n * C + c) * P + i)];
      return out;
    };
    EXPECT_NEAR(loss::dice(this->g, probs, target).item(),
                loss::dice(this->g, permute(probs), permute(target)).item(), 1e-6);
  }
}

TYPED_TEST(LossTest, CrossEntropyInvariantUnderPixelPermutation) {
  using T = TypeParam;
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t C = 2, P = 16;
    auto probs = random_probs<T>(rng, {1, C, 4, 4});
    auto labels = testing::random_labels(rng, P, 0.5);
    auto target = loss::one_hot<T>(labels, 1, 2, 4, 4);
    std::vector<std::int64_t> perm(P);
    for (std::int64_t i = 0; i < P; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    auto permute = [&](const Tensor<T>& t) {
      Tensor<T> out(t.shape());
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t i = 0; i < P; ++i)
          out.mutable_data()[static_cast<std::size_t>(c * P + perm[static_cast<std::size_t>(i)])] =
              t.data()[static_cast<std::size_t>(c * P + i)];
      return out;
    };
    EXPECT_NEAR(loss::cross_entropy(this->g, probs, target).item(),
                loss::cross_entropy(this->g, permute(probs), permute(target)).item(), 1e-6);
  }
}

TEST(LossGradientTest, EachLossMatchesFiniteDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Shape s{1 + static_cast<std::int64_t>(rng.below(2)), 2, 4, 4};
    auto probs = testing::random_tensor<double>(rng, s, 0.05, 0.95, true);
    auto labels = testing::random_labels(rng, static_cast<std::size_t>(s[0] * 16), 0.5);
    auto target = loss::one_hot<double>(labels, s[0], 2, 4, 4);
    auto weights = testing::random_tensor<double>(rng, {s[0], 4, 4}, 0.5, 2.0);
    auto cp = testing::random_tensor<double>(rng, {s[0], 2}, 0.05, 0.95, true);
    Tensor<double> y({s[0], 2});
    for (auto& v : y.mutable_data()) v = static_cast<double>(rng.below(2));

    const LossBuilder<double> builders[] = {
        [&](Graph<double>& g) { return loss::cross_entropy(g, probs, target); },
        [&](Graph<double>& g) { return loss::cross_entropy(g, probs, target, weights); },
        [&](Graph<double>& g) { return loss::dice(g, probs, target); },
    };
    for (const auto& build : builders) {
      EXPECT_LT(grad_check<double>(build, {{"probs", probs}}).max_relative_error, 1e-6);
    }
    LossBuilder<double> sec = [&](Graph<double>& g) { return loss::sec(g, cp, y); };
    EXPECT_LT(grad_check<double>(sec, {{"p", cp}}).max_relative_error, 1e-6);
  }
}

TEST(ClassPresenceTest, Examples) {
  std::vector<std::uint8_t> mixed{0, 1, 1, 0};
  EXPECT_EQ(loss::class_presence_labels(mixed, 2), (std::vector<std::uint8_t>{1, 1}));
  std::vector<std::uint8_t> background(9, 0);
  EXPECT_EQ(loss::class_presence_labels(background, 2), (std::vector<std::uint8_t>{1, 0}));
  background[4] = 1;
  EXPECT_EQ(loss::class_presence_labels(background, 2), (std::vector<std::uint8_t>{1, 1}));
  std::vector<std::uint8_t> bad{0, 2};
  EXPECT_THROW(loss::class_presence_labels(bad, 2), ValueError);
}

TEST(BoundaryWeightTest, PeaksOnBoundaryAndDecays) {
  // left half 0, right half 1 on an 1x8 strip
  std::vector<std::uint8_t> labels{0, 0, 0, 0, 1, 1, 1, 1};
  auto w = loss::boundary_weight_map(labels, 1, 8, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(w[3], 3.0);
  EXPECT_DOUBLE_EQ(w[4], 3.0);
  EXPECT_DOUBLE_EQ(w[2], 1.0 + 2.0 * std::exp(-0.5));
  EXPECT_GT(w[1], 1.0);
  EXPECT_LT(w[0], w[1]);
  auto flat = loss::boundary_weight_map(labels, 1, 8, 0.0, 1.0);
  for (double v : flat) EXPECT_EQ(v, 1.0);
}

}  // namespace cstrip

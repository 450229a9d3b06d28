#include <cmath>

#include <gtest/gtest.h>

#include "contextstrip/autodiff/graph.hpp"
#include "contextstrip/autodiff/ops.hpp"
#include "contextstrip/core/error.hpp"
#include "support/generators.hpp"

namespace cstrip {

template <typename Dtype>
class OpsTest : public ::testing::Test {
 protected:
  Graph<Dtype> g{false};
};

using Dtypes = ::testing::Types<float, double>;
TYPED_TEST_SUITE(OpsTest, Dtypes);

TYPED_TEST(OpsTest, ConvScalarKernelScales) {
  using T = TypeParam;
  auto x = Tensor<T>::full({1, 1, 2, 2}, T(1));
  Tensor<T> k({1, 1, 1, 1}, std::vector<T>{T(2)});
  auto b = Tensor<T>::full({1}, T(0));
  auto y = ops::conv2d(this->g, x, k, b);
  for (auto v : y.data()) EXPECT_EQ(v, T(2));
}

TYPED_TEST(OpsTest, ConvOnesSamePaddingCountsNeighbours) {
  using T = TypeParam;
  auto x = Tensor<T>::full({1, 1, 3, 3}, T(1));
  auto k = Tensor<T>::full({1, 1, 3, 3}, T(1));
  auto b = Tensor<T>::full({1}, T(0));
  auto y = ops::conv2d(this->g, x, k, b, ops::Padding::Same);
  const std::vector<T> expected{4, 6, 4, 6, 9, 6, 4, 6, 4};
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(y.data()[i], expected[i]);
}

TYPED_TEST(OpsTest, ConvZeroKernelGivesZeros) {
  using T = TypeParam;
  Rng rng(2);
  auto x = testing::random_tensor<T>(rng, {2, 3, 6, 5});
  auto k = Tensor<T>::full({4, 3, 3, 3}, T(0));
  auto b = Tensor<T>::full({4}, T(0));
  auto y = ops::conv2d(this->g, x, k, b, ops::Padding::Valid);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 4, 3}));
  for (auto v : y.data()) EXPECT_EQ(v, T(0));
}

TYPED_TEST(OpsTest, ConvShapeErrorsNameTheAxis) {
  using T = TypeParam;
  auto x = Tensor<T>::full({1, 2, 4, 4}, T(1));
  auto k = Tensor<T>::full({1, 3, 3, 3}, T(1));
  auto b = Tensor<T>::full({1}, T(0));
  try {
    ops::conv2d(this->g, x, k, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("axis 1"), std::string::npos) << e.what();
  }
  auto even = Tensor<T>::full({1, 2, 2, 2}, T(1));
  EXPECT_THROW(ops::conv2d(this->g, x, even, b, ops::Padding::Same), ShapeError);
}

TYPED_TEST(OpsTest, MaxPoolExamples) {
  using T = TypeParam;
  Tensor<T> x({1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(ops::max_pool2d(this->g, x).item(), T(4));

  auto c = Tensor<T>::full({2, 3, 4, 6}, T(0.7));
  auto yc = ops::max_pool2d(this->g, c);
  EXPECT_EQ(yc.shape(), (Shape{2, 3, 2, 3}));
  for (auto v : yc.data()) EXPECT_EQ(v, T(0.7));

  std::vector<T> seq(16);
  for (int i = 0; i < 16; ++i) seq[static_cast<std::size_t>(i)] = T(i + 1);
  auto y = ops::max_pool2d(this->g, Tensor<T>({1, 1, 4, 4}, seq));
  const std::vector<T> expected{6, 8, 14, 16};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y.data()[i], expected[i]);

  EXPECT_THROW(ops::max_pool2d(this->g, Tensor<T>({1, 1, 3, 4})), ShapeError);
}

TYPED_TEST(OpsTest, MaxPoolTieRoutesToFirstArgmax) {
  using T = TypeParam;
  Graph<T> g;
  auto x = Tensor<T>::full({1, 1, 2, 2}, T(1), true);
  g.backward(ops::sum(g, ops::max_pool2d(g, x)));
  const std::vector<T> expected{1, 0, 0, 0};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(x.grad()[i], expected[i]);
}

TYPED_TEST(OpsTest, LinearExamples) {
  using T = TypeParam;
  Rng rng(4);
  auto x = testing::random_tensor<T>(rng, {3, 2});
  Tensor<T> eye({2, 2}, {1, 0, 0, 1});
  auto zero = Tensor<T>::full({2}, T(0));
  auto y = ops::linear(this->g, x, eye, zero);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(y.data()[i], x.data()[i]);

  Tensor<T> b({2}, {T(0.5), T(-1)});
  auto yb = ops::linear(this->g, x, Tensor<T>::full({2, 2}, T(0)), b);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(yb.data()[static_cast<std::size_t>(2 * r)], T(0.5));
    EXPECT_EQ(yb.data()[static_cast<std::size_t>(2 * r + 1)], T(-1));
  }

  Tensor<T> v({1, 2}, {1, 2});
  Tensor<T> w({2, 2}, {1, 0, 1, 1});
  Tensor<T> c({2}, {0, 1});
  auto out = ops::linear(this->g, v, w, c);
  EXPECT_EQ(out.data()[0], T(3));
  EXPECT_EQ(out.data()[1], T(3));

  EXPECT_THROW(ops::linear(this->g, Tensor<T>({1, 3}), w, c), ShapeError);
}

TYPED_TEST(OpsTest, ActivationExamples) {
  using T = TypeParam;
  Tensor<T> x({3}, {T(0), T(-3), T(3)});
  auto s = ops::activation(this->g, x, ops::Activation::Sigmoid);
  EXPECT_EQ(s.data()[0], T(0.5));
  auto r = ops::activation(this->g, x, ops::Activation::Relu);
  EXPECT_EQ(r.data()[1], T(0));
  EXPECT_EQ(r.data()[2], T(3));
  Tensor<T> one({1}, std::vector<T>{T(1)});
  EXPECT_NEAR(ops::sigmoid(this->g, one).item(), 1.0 / (1.0 + std::exp(-1.0)), 1e-6);
  EXPECT_NEAR(ops::sigmoid(this->g, one).item(), 0.73106, 1e-5);
}

TYPED_TEST(OpsTest, SigmoidStaysInOpenInterval) {
  using T = TypeParam;
  Tensor<T> x({4}, {T(-1000), T(-40), T(40), T(1000)});
  auto s = ops::sigmoid(this->g, x);
  for (auto v : s.data()) {
    EXPECT_GT(v, T(0));
    EXPECT_LT(v, T(1));
  }
}

TYPED_TEST(OpsTest, SoftmaxExamples) {
  using T = TypeParam;
  Tensor<T> eq({1, 2, 1, 1}, {T(0.3), T(0.3)});
  auto p = ops::softmax(this->g, eq);
  EXPECT_EQ(p.data()[0], T(0.5));
  EXPECT_EQ(p.data()[1], T(0.5));

  Tensor<T> shifted({1, 2, 1, 1}, {T(5), T(7)});
  Tensor<T> base({1, 2, 1, 1}, {T(0), T(2)});
  auto a = ops::softmax(this->g, shifted);
  auto b = ops::softmax(this->g, base);
  EXPECT_NEAR(a.data()[0], b.data()[0], 1e-7);
  EXPECT_NEAR(a.data()[1], b.data()[1], 1e-7);

  Tensor<T> l3({1, 2}, {T(0), static_cast<T>(std::log(3.0))});
  auto q = ops::softmax(this->g, l3);
  EXPECT_NEAR(q.data()[0], 0.25, 1e-7);
  EXPECT_NEAR(q.data()[1], 0.75, 1e-7);
}

TYPED_TEST(OpsTest, SoftmaxRowsSumToOne) {
  using T = TypeParam;
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Shape shape = testing::random_shape(rng, {2, 5, 6, 6});
    auto x = testing::random_tensor<T>(rng, shape, -30, 30);
    auto p = ops::softmax(this->g, x);
    const std::int64_t N = shape[0], C = shape[1], P = shape[2] * shape[3];
    for (std::int64_t n = 0; n < N; ++n) {
      for (std::int64_t i = 0; i < P; ++i) {
        double s = 0;
        for (std::int64_t c = 0; c < C; ++c) {
          const T v = p.data()[static_cast<std::size_t>((n * C + c) * P + i)];
          EXPECT_GT(v, T(0));
          s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-6);
      }
    }
  }
}

TYPED_TEST(OpsTest, BatchNormExamples) {
  using T = TypeParam;
  auto scale = Tensor<T>::full({2}, T(1));
  auto rm = Tensor<T>::full({2}, T(0));
  auto rv = Tensor<T>::full({2}, T(1));

  auto constant = Tensor<T>::full({2, 2, 3, 3}, T(4));
  auto y = ops::batch_norm(this->g, constant, scale, Tensor<T>::full({2}, T(0)), rm, rv,
                           ops::Mode::Train);
  for (auto v : y.data()) EXPECT_LE(std::abs(v), 1e-2);

  Rng rng(6);
  auto x = testing::random_tensor<T>(rng, {3, 2, 4, 4}, -2, 5);
  Tensor<T> beta({2}, {T(0.25), T(-1.5)});
  auto rm2 = Tensor<T>::full({2}, T(0));
  auto rv2 = Tensor<T>::full({2}, T(1));
  auto yb = ops::batch_norm(this->g, x, scale, beta, rm2, rv2, ops::Mode::Train);
  for (int c = 0; c < 2; ++c) {
    double m = 0;
    for (int n = 0; n < 3; ++n)
      for (int i = 0; i < 16; ++i) m += yb.data()[static_cast<std::size_t>((n * 2 + c) * 16 + i)];
    EXPECT_NEAR(m / 48.0, beta.data()[static_cast<std::size_t>(c)], 1e-5);
  }

  // per channel {-1, 1}: batch mean 0, biased variance 1
  Tensor<T> pm({2, 1, 1, 1}, {T(-1), T(1)});
  auto rm3 = Tensor<T>::full({1}, T(0));
  auto rv3 = Tensor<T>::full({1}, T(1));
  auto y3 = ops::batch_norm(this->g, pm, Tensor<T>::full({1}, T(1)), Tensor<T>::full({1}, T(0)),
                            rm3, rv3, ops::Mode::Train);
  EXPECT_NEAR(y3.data()[0], -1.0, 1e-4);
  EXPECT_NEAR(y3.data()[1], 1.0, 1e-4);
}

TYPED_TEST(OpsTest, BatchNormRunningStatistics) {
  using T = TypeParam;
  Tensor<T> x({4, 1, 1, 1}, {T(1), T(2), T(3), T(4)});
  auto rm = Tensor<T>::full({1}, T(0));
  auto rv = Tensor<T>::full({1}, T(1));
  auto one = Tensor<T>::full({1}, T(1));
  auto zero = Tensor<T>::full({1}, T(0));
  ops::batch_norm(this->g, x, one, zero, rm, rv, ops::Mode::Train);
  // mean 2.5, unbiased variance 5/3
  EXPECT_NEAR(rm.data()[0], 0.1 * 2.5, 1e-6);
  EXPECT_NEAR(rv.data()[0], 0.9 + 0.1 * (5.0 / 3.0), 1e-6);

  auto y = ops::batch_norm(this->g, x, one, zero, rm, rv, ops::Mode::Eval);
  const double expect0 = (1.0 - rm.data()[0]) / std::sqrt(rv.data()[0] + 1e-5);
  EXPECT_NEAR(y.data()[0], expect0, 1e-5);
}

TYPED_TEST(OpsTest, DropoutExamples) {
  using T = TypeParam;
  Rng rng(7);
  auto x = testing::random_tensor<T>(rng, {4, 5});
  for (auto mode : {ops::Mode::Train, ops::Mode::Eval}) {
    auto y = ops::dropout(this->g, x, 0.0, mode, rng);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(y.data()[i], x.data()[i]);
  }
  auto ye = ops::dropout(this->g, x, 0.5, ops::Mode::Eval, rng);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(ye.data()[i], x.data()[i]);

  auto big = Tensor<T>::full({100000}, T(1));
  auto yd = ops::dropout(this->g, big, 0.1, ops::Mode::Train, rng);
  std::size_t zeros = 0;
  for (auto v : yd.data()) {
    if (v == T(0)) {
      ++zeros;
    } else {
      EXPECT_NEAR(v, 1.0 / 0.9, 1e-6);
    }
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 1e5, 0.1, 0.01);

  EXPECT_THROW(ops::dropout(this->g, x, 1.0, ops::Mode::Train, rng), ValueError);
  EXPECT_THROW(ops::dropout(this->g, x, -0.1, ops::Mode::Train, rng), ValueError);
}

TYPED_TEST(OpsTest, DropoutIsDeterministicInSeed) {
  using T = TypeParam;
  auto x = Tensor<T>::full({1000}, T(1));
  Rng a(99), b(99);
  auto ya = ops::dropout(this->g, x, 0.1, ops::Mode::Train, a);
  auto yb = ops::dropout(this->g, x, 0.1, ops::Mode::Train, b);
  for (std::size_t i = 0; i < 1000; ++i) EXPECT_EQ(ya.data()[i], yb.data()[i]);
}

TYPED_TEST(OpsTest, ConcatExamples) {
  using T = TypeParam;
  Rng rng(8);
  auto a = testing::random_tensor<T>(rng, {2, 16, 3, 3});
  auto single = ops::concat(this->g, std::vector<Tensor<T>>{a});
  for (std::size_t i = 0; i < a.data().size(); ++i) EXPECT_EQ(single.data()[i], a.data()[i]);
  auto b = testing::random_tensor<T>(rng, {2, 16, 3, 3});
  auto ab = ops::concat(this->g, std::vector<Tensor<T>>{a, b});
  EXPECT_EQ(ab.shape(), (Shape{2, 32, 3, 3}));
  // order preserved: item 1 channel 16 is b's item 1 channel 0
  EXPECT_EQ(ab.data()[static_cast<std::size_t>((1 * 32 + 16) * 9)],
            b.data()[static_cast<std::size_t>((1 * 16 + 0) * 9)]);
  EXPECT_THROW(ops::concat(this->g, std::vector<Tensor<T>>{a, Tensor<T>({2, 1, 3, 4})}),
               ShapeError);
}

TYPED_TEST(OpsTest, ConcatBackwardSplitsGradient) {
  using T = TypeParam;
  Graph<T> g;
  Rng rng(9);
  auto a = testing::random_tensor<T>(rng, {2, 3, 2, 2}, -1, 1, true);
  auto b = testing::random_tensor<T>(rng, {2, 5, 2, 2}, -1, 1, true);
  auto w = testing::random_tensor<T>(rng, {2, 8, 2, 2});
  g.backward(ops::weighted_sum(g, ops::concat(g, std::vector<Tensor<T>>{a, b}), w));
  double pieces = 0, upstream = 0;
  for (auto v : a.grad()) pieces += v;
  for (auto v : b.grad()) pieces += v;
  for (auto v : w.data()) upstream += v;
  EXPECT_NEAR(pieces, upstream, 1e-5);
  EXPECT_EQ(b.grad()[0], w.data()[3 * 4]);
}

TYPED_TEST(OpsTest, UpsampleOfConstantIsConstant) {
  using T = TypeParam;
  auto x = Tensor<T>::full({1, 2, 3, 3}, T(1.5));
  auto y = ops::upsample2x(this->g, x);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 6, 6}));
  for (auto v : y.data()) EXPECT_EQ(v, T(1.5));
}

TYPED_TEST(OpsTest, EncodingAggregateHandExample) {
  using T = TypeParam;
  Tensor<T> x({1, 1, 1, 2}, {T(0), T(2)});
  Tensor<T> c({1, 1}, std::vector<T>{T(1)});
  Tensor<T> s({1}, std::vector<T>{T(1)});
  auto e = ops::encoding_aggregate(this->g, x, c, s);
  ASSERT_EQ(e.shape(), (Shape{1, 1, 1}));
  EXPECT_EQ(e.item(), T(0));
}

TYPED_TEST(OpsTest, EncodingAnnihilatesWhenDescriptorsEqualCodeword) {
  using T = TypeParam;
  Tensor<T> x({2, 3, 2, 2});
  Tensor<T> c({1, 3}, {T(0.5), T(-1), T(2)});
  auto xv = x.mutable_data();
  for (std::int64_t n = 0; n < 2; ++n)
    for (std::int64_t d = 0; d < 3; ++d)
      for (std::int64_t i = 0; i < 4; ++i) xv[static_cast<std::size_t>((n * 3 + d) * 4 + i)] = c.data()[static_cast<std::size_t>(d)];
  auto e = ops::encoding_aggregate(this->g, x, c, Tensor<T>::full({1}, T(1)));
  for (auto v : e.data()) EXPECT_EQ(v, T(0));
}

TYPED_TEST(OpsTest, EncodingEquidistantCodewordsSplitEvenly) {
  using T = TypeParam;
  // codewords at -1 and +1, descriptors on the bisector (0 in channel 0)
  Tensor<T> x({1, 2, 1, 3}, {T(0), T(0), T(0), T(1), T(-2), T(0.5)});
  Tensor<T> c({2, 2}, {T(-1), T(0), T(1), T(0)});
  auto s = Tensor<T>::full({2}, T(0.7));
  auto e = ops::encoding_aggregate(this->g, x, c, s);
  // equal weights 0.5: E_k = 0.5 * mean_i (x_i - c_k)
  const double mean_y = (1.0 - 2.0 + 0.5) / 3.0;
  EXPECT_NEAR(e.data()[0], 0.5 * 1.0, 1e-6);
  EXPECT_NEAR(e.data()[1], 0.5 * mean_y, 1e-6);
  EXPECT_NEAR(e.data()[2], 0.5 * -1.0, 1e-6);
  EXPECT_NEAR(e.data()[3], 0.5 * mean_y, 1e-6);
}

TYPED_TEST(OpsTest, ChannelScaleExample) {
  using T = TypeParam;
  Tensor<T> x({1, 2, 1, 2}, {T(1), T(2), T(3), T(4)});
  Tensor<T> gamma({1, 2}, {T(0.5), T(0.75)});
  auto y = ops::channel_scale(this->g, x, gamma);
  const std::vector<T> expected{T(0.5), T(1), T(2.25), T(3)};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(y.data()[i], expected[i]);
}

}  // namespace cstrip

#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "contextstrip/core/error.hpp"
#include "contextstrip/core/rng.hpp"
#include "contextstrip/data/sampling.hpp"
#include "contextstrip/losses/losses.hpp"

namespace cstrip {
namespace {

// Every voxel holds its coronal index, so sub-volume planes reveal which
// slice they came from.
Volume indexed_volume(std::int64_t x, std::int64_t y, std::int64_t z) {
  Volume v({x, y, z});
  for (std::int64_t k = 0; k < z; ++k)
    for (std::int64_t j = 0; j < y; ++j)
      for (std::int64_t i = 0; i < x; ++i) v.intensities[v.index(i, j, k)] = static_cast<float>(j);
  return v;
}

Volume random_volume(Rng& rng, std::int64_t x, std::int64_t y, std::int64_t z) {
  Volume v({x, y, z});
  for (auto& a : v.intensities) a = static_cast<float>(rng.uniform());
  v.mask.emplace(v.intensities.size());
  const double p = rng.uniform();
  for (auto& m : *v.mask) m = rng.uniform() < p ? 1 : 0;
  return v;
}

TEST(SubvolumeTest, DepthTenAroundFifty) {
  const auto idx = subvolume_indices(50, 10, 100);
  std::vector<std::int64_t> expected(10);
  std::iota(expected.begin(), expected.end(), 46);
  EXPECT_EQ(idx, expected);
  EXPECT_EQ(subvolume_center(10), 4);
  EXPECT_EQ(idx[static_cast<std::size_t>(subvolume_center(10))], 50);
}

TEST(SubvolumeTest, CentreForOddAndUnitDepth) {
  EXPECT_EQ(subvolume_center(1), 0);
  EXPECT_EQ(subvolume_center(3), 1);
  EXPECT_EQ(subvolume_center(9), 4);
  EXPECT_EQ(subvolume_indices(7, 3, 20), (std::vector<std::int64_t>{6, 7, 8}));
}

TEST(SubvolumeTest, LeadingPositionsClampToFirstSlice) {
  const auto idx = subvolume_indices(0, 10, 64);
  for (int p = 0; p <= 4; ++p) EXPECT_EQ(idx[static_cast<std::size_t>(p)], 0);
  EXPECT_EQ(idx[5], 1);
  EXPECT_EQ(idx[9], 5);
}

TEST(SubvolumeTest, TrailingPositionsClampToLastSlice) {
  const auto idx = subvolume_indices(63, 10, 64);
  for (int p = 4; p < 10; ++p) EXPECT_EQ(idx[static_cast<std::size_t>(p)], 63);
  EXPECT_EQ(idx[0], 59);
}

TEST(SampleTest, DepthTenPairUsesSlices46To55) {
  Volume v = indexed_volume(4, 100, 3);
  const SamplePair pair = sample_training_pair(v, 50, 10);
  ASSERT_EQ(pair.subvol.size(), 10u * 3u * 4u);
  EXPECT_EQ(pair.center_position, 4);
  for (int d = 0; d < 10; ++d) {
    for (int p = 0; p < 12; ++p) EXPECT_EQ(pair.subvol[static_cast<std::size_t>(d * 12 + p)], 46.0f + d);
  }
  for (float s : pair.slice) EXPECT_EQ(s, 50.0f);
  EXPECT_EQ(pair.height, 3);
  EXPECT_EQ(pair.width, 4);
  EXPECT_EQ(pair.coronal_index, 50);
}

TEST(SampleTest, IndexZeroReplicatesSliceZero) {
  Volume v = indexed_volume(2, 20, 2);
  const SamplePair pair = sample_training_pair(v, 0, 10);
  for (int d = 0; d <= 4; ++d)
    for (int p = 0; p < 4; ++p) EXPECT_EQ(pair.subvol[static_cast<std::size_t>(d * 4 + p)], 0.0f);
}

TEST(SampleTest, UnitDepthSubvolumeEqualsSlice) {
  Rng rng(2);
  Volume v = random_volume(rng, 5, 6, 7);
  const SamplePair pair = sample_training_pair(v, 3, 1);
  EXPECT_EQ(pair.subvol, pair.slice);
}

TEST(SampleTest, SliceIsTheCoronalPlane) {
  Rng rng(4);
  Volume v = random_volume(rng, 5, 6, 7);
  const SamplePair pair = sample_training_pair(v, 2, 3);
  ASSERT_EQ(pair.slice.size(), 35u);
  for (std::int64_t z = 0; z < 7; ++z)
    for (std::int64_t x = 0; x < 5; ++x)
      EXPECT_EQ(pair.slice[static_cast<std::size_t>(z * 5 + x)], v.at(x, 2, z));
  EXPECT_EQ(pair.mask_slice, v.coronal_mask(2));
}

TEST(SampleTest, OutOfRangeIndexIsRejected) {
  Volume v({3, 4, 5});
  EXPECT_THROW(sample_training_pair(v, -1, 3), ValueError);
  EXPECT_THROW(sample_training_pair(v, 4, 3), ValueError);
  EXPECT_THROW(sample_training_pair(v, 0, 0), ValueError);
}

TEST(SampleTest, VolumeWithoutMaskHasNoLabels) {
  Volume v({3, 4, 5});
  const SamplePair pair = sample_training_pair(v, 1, 3);
  EXPECT_TRUE(pair.mask_slice.empty());
  EXPECT_TRUE(pair.y.empty());
}

TEST(SamplePropertyTest, CentreSliceAndPresenceLabelsAreConsistent) {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = 1 + static_cast<std::int64_t>(rng.below(6));
    const auto y = 1 + static_cast<std::int64_t>(rng.below(12));
    const auto z = 1 + static_cast<std::int64_t>(rng.below(6));
    Volume v = random_volume(rng, x, y, z);
    const int depth = 1 + static_cast<int>(rng.below(12));
    const auto index = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(y)));
    const SamplePair pair = sample_training_pair(v, index, depth);
    const auto plane = static_cast<std::size_t>(x * z);
    ASSERT_EQ(pair.subvol.size(), plane * static_cast<std::size_t>(depth));
    const auto c = static_cast<std::size_t>(pair.center_position);
    EXPECT_TRUE(std::equal(pair.slice.begin(), pair.slice.end(), pair.subvol.begin() + c * plane));
    EXPECT_EQ(pair.y, loss::class_presence_labels(pair.mask_slice, 2));
    const auto idx = subvolume_indices(index, depth, y);
    for (std::size_t d = 0; d < idx.size(); ++d) {
      const auto expected = v.coronal_slice(idx[d]);
      EXPECT_TRUE(std::equal(expected.begin(), expected.end(), pair.subvol.begin() + d * plane));
    }
  }
}

template <typename T>
class BatchTest : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(BatchTest, Precisions);

TYPED_TEST(BatchTest, StacksPairsIntoTensors) {
  Rng rng(6);
  Volume v = random_volume(rng, 4, 8, 3);
  std::vector<SamplePair> pairs{sample_training_pair(v, 1, 5), sample_training_pair(v, 6, 5)};
  const auto batch = make_batch<TypeParam>(pairs, 2);
  EXPECT_EQ(batch.slice.shape(), (Shape{2, 1, 3, 4}));
  EXPECT_EQ(batch.subvol.shape(), (Shape{2, 5, 3, 4}));
  EXPECT_EQ(batch.target.shape(), (Shape{2, 2, 3, 4}));
  EXPECT_EQ(batch.y.shape(), (Shape{2, 2}));
  const auto target = batch.target.data();
  const auto slice = batch.slice.data();
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t p = 0; p < 12; ++p) {
      const auto label = pairs[n].mask_slice[p];
      EXPECT_EQ(target[n * 24 + p], label == 0 ? 1 : 0);
      EXPECT_EQ(target[n * 24 + 12 + p], label == 1 ? 1 : 0);
      EXPECT_EQ(slice[n * 12 + p], static_cast<TypeParam>(pairs[n].slice[p]));
    }
    EXPECT_EQ(batch.y.data()[n * 2 + 1], static_cast<TypeParam>(pairs[n].y[1]));
  }
}

TYPED_TEST(BatchTest, MismatchedPairsAreRejected) {
  Volume a({4, 8, 3}), b({4, 8, 5});
  std::vector<SamplePair> pairs{sample_training_pair(a, 0, 3), sample_training_pair(b, 0, 3)};
  EXPECT_THROW(make_batch<TypeParam>(pairs, 2), ShapeError);
  EXPECT_THROW(make_batch<TypeParam>(std::span<const SamplePair>{}, 2), ValueError);
}

}  // namespace
}  // namespace cstrip

#include <gtest/gtest.h>

#include <fstream>

#include "contextstrip/core/error.hpp"
#include "contextstrip/training/checkpoint.hpp"
#include "support/temp_dir.hpp"
#include "training/tiny_config.hpp"

namespace cstrip {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

template <typename Dtype>
TrainState<Dtype> populated_state() {
  auto state = init_train_state<Dtype>(testing::tiny_train_config(), 40);
  Rng rng(3);
  for (auto& v : state.velocity)
    for (auto& x : v.mutable_data()) x = static_cast<Dtype>(rng.normal());
  state.step = 12;
  state.epoch = 3;
  rng.next();
  state.rng_state = rng.state();
  EpochRecord r;
  r.epoch = 2;
  r.lr = 0.1 / 3.0;
  r.loss = {0.25, -0.75, 1.0 / 7.0, -0.5};
  r.val_dice = 0.875;
  r.wall_time = 1.5;
  state.history.push_back(r);
  r.val_dice.reset();
  state.history.push_back(r);
  return state;
}

template <typename T>
class CheckpointTest : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(CheckpointTest, Precisions);

TYPED_TEST(CheckpointTest, RoundTripRestoresEverything) {
  testing::TempDir dir;
  const auto state = populated_state<TypeParam>();
  save_checkpoint(state, dir / "c");
  const auto back = load_checkpoint<TypeParam>(dir / "c");
  EXPECT_EQ(back.cfg, state.cfg);
  EXPECT_EQ(back.step, state.step);
  EXPECT_EQ(back.total_steps, state.total_steps);
  EXPECT_EQ(back.epoch, state.epoch);
  EXPECT_EQ(back.rng_state, state.rng_state);
  EXPECT_EQ(back.history, state.history);
  ASSERT_EQ(back.params.size(), state.params.size());
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    const auto& a = state.params.entries()[i];
    const auto& b = back.params.entries()[i];
    EXPECT_EQ(a.name, b.name);
    EXPECT_EQ(a.trainable, b.trainable);
    EXPECT_EQ(a.tensor.shape(), b.tensor.shape());
    EXPECT_TRUE(std::equal(a.tensor.data().begin(), a.tensor.data().end(), b.tensor.data().begin()));
    EXPECT_EQ(b.tensor.requires_grad(), b.trainable);
  }
  ASSERT_EQ(back.velocity.size(), state.velocity.size());
  for (std::size_t i = 0; i < state.velocity.size(); ++i) {
    EXPECT_TRUE(std::equal(state.velocity[i].data().begin(), state.velocity[i].data().end(),
                           back.velocity[i].data().begin()));
  }
}

TYPED_TEST(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  testing::TempDir dir;
  save_checkpoint(populated_state<TypeParam>(), dir / "a");
  save_checkpoint(load_checkpoint<TypeParam>(dir / "a"), dir / "b");
  EXPECT_EQ(slurp(dir / "a/manifest.json"), slurp(dir / "b/manifest.json"));
  EXPECT_EQ(slurp(dir / "a/params.bin"), slurp(dir / "b/params.bin"));
}

TYPED_TEST(CheckpointTest, ManifestDescribesTheBlob) {
  testing::TempDir dir;
  const auto state = populated_state<TypeParam>();
  save_checkpoint(state, dir / "c");
  const auto manifest = nlohmann::json::parse(slurp(dir / "c/manifest.json"));
  EXPECT_EQ(manifest.at("precision"), precision_tag<TypeParam>());
  EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), state.cfg.seed);
  EXPECT_EQ(manifest.at("arch").get<ArchConfig>(), state.cfg.arch);
  EXPECT_TRUE(manifest.contains("code_version"));
  std::int64_t values = 0;
  for (const auto& e : state.params.entries()) values += e.tensor.numel();
  values += state.params.trainable_count();
  EXPECT_EQ(std::filesystem::file_size(dir / "c/params.bin"),
            static_cast<std::uintmax_t>(values) * sizeof(TypeParam));
  EXPECT_EQ(checkpoint_precision(dir / "c"), precision_tag<TypeParam>());
}

TYPED_TEST(CheckpointTest, TruncatedBlobIsALengthMismatch) {
  testing::TempDir dir;
  save_checkpoint(populated_state<TypeParam>(), dir / "c");
  const auto size = std::filesystem::file_size(dir / "c/params.bin");
  std::filesystem::resize_file(dir / "c/params.bin", size - sizeof(TypeParam));
  try {
    load_checkpoint<TypeParam>(dir / "c");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos) << e.what();
  }
}

TYPED_TEST(CheckpointTest, UnknownPrecisionTagIsRejected) {
  testing::TempDir dir;
  save_checkpoint(populated_state<TypeParam>(), dir / "c");
  auto manifest = nlohmann::json::parse(slurp(dir / "c/manifest.json"));
  manifest["precision"] = "bfloat16";
  std::ofstream(dir / "c/manifest.json") << manifest.dump();
  try {
    load_checkpoint<TypeParam>(dir / "c");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("bfloat16"), std::string::npos) << e.what();
  }
}

TEST(CheckpointPrecisionTest, LoadingWithTheOtherPrecisionFails) {
  testing::TempDir dir;
  save_checkpoint(populated_state<float>(), dir / "c");
  EXPECT_THROW(load_checkpoint<double>(dir / "c"), FormatError);
}

TEST(CheckpointPrecisionTest, MissingDirectoryIsAnIoError) {
  testing::TempDir dir;
  EXPECT_THROW(load_checkpoint<float>(dir / "absent"), IoError);
}

}  // namespace
}  // namespace cstrip

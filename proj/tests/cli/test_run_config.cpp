#include <gtest/gtest.h>

#include <fstream>

#include "contextstrip/cli/run_config.hpp"
#include "contextstrip/core/error.hpp"
#include "contextstrip/core/rng.hpp"
#include "support/temp_dir.hpp"

namespace cstrip {
namespace {

std::filesystem::path write_file(const testing::TempDir& dir, const std::string& text) {
  const auto path = dir / "run.toml";
  std::ofstream(path) << text;
  return path;
}

std::string config_error(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  ADD_FAILURE() << "no ConfigError";
  return "";
}

TEST(RunConfigTest, DefaultsWithoutFileOrFlags) {
  const auto cfg = parse_config(std::nullopt);
  EXPECT_DOUBLE_EQ(cfg.train.lr0, 0.01);
  EXPECT_DOUBLE_EQ(cfg.train.loss.lambda, 0.1);
  EXPECT_DOUBLE_EQ(cfg.train.dropout, 0.1);
  EXPECT_DOUBLE_EQ(cfg.train.momentum, 0.9);
  EXPECT_DOUBLE_EQ(cfg.train.weight_decay, 1e-4);
  EXPECT_EQ(cfg.train.epochs, 20);
  EXPECT_EQ(cfg.train.arch, ArchConfig::desk_scale());
  EXPECT_EQ(cfg.k, 2);
  EXPECT_EQ(cfg.precision, "float32");
  EXPECT_TRUE(cfg.dataset.empty());
  EXPECT_EQ(cfg, RunConfig{});
}

TEST(RunConfigTest, FlagsOverrideFileOverridesDefaults) {
  testing::TempDir dir;
  const auto path = write_file(dir, "[loss]\nlambda = 0.1\n[train]\nepochs = 7\n");
  const auto from_file = parse_config(path);
  EXPECT_DOUBLE_EQ(from_file.train.loss.lambda, 0.1);
  EXPECT_EQ(from_file.train.epochs, 7);

  const auto flagged = parse_config(path, {{"lambda", "0.2"}});
  EXPECT_DOUBLE_EQ(flagged.train.loss.lambda, 0.2);
  EXPECT_EQ(flagged.train.epochs, 7);
  EXPECT_EQ(parse_config(path, {{"train.epochs", "9"}}).train.epochs, 9);
}

TEST(RunConfigTest, UnknownKeyNamesNearestKey) {
  testing::TempDir dir;
  const auto msg = config_error([&] { parse_config(write_file(dir, "[train]\nmomentom = 0.8\n")); });
  EXPECT_NE(msg.find("momentom"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train.momentum"), std::string::npos) << msg;

  const auto flag = config_error([] { parse_config(std::nullopt, {{"momentom", "0.8"}}); });
  EXPECT_NE(flag.find("'momentom'"), std::string::npos) << flag;
  EXPECT_NE(flag.find("train.momentum"), std::string::npos) << flag;

  EXPECT_EQ(nearest_key("lamda"), "loss.lambda");
  EXPECT_EQ(nearest_key("arch.stage"), "arch.stages");
}

TEST(RunConfigTest, KeyInWrongSectionIsUnknown) {
  testing::TempDir dir;
  const auto msg = config_error([&] { parse_config(write_file(dir, "[arch]\nepochs = 3\n")); });
  EXPECT_NE(msg.find("arch.epochs"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train.epochs"), std::string::npos) << msg;
  const auto top = config_error([&] { parse_config(write_file(dir, "seed = 3\n")); });
  EXPECT_NE(top.find("run.seed"), std::string::npos) << top;
}

TEST(RunConfigTest, TypeMismatchNamesKey) {
  testing::TempDir dir;
  for (const auto& [text, key] : std::vector<std::pair<std::string, std::string>>{
           {"[train]\nepochs = ten\n", "train.epochs"},
           {"[train]\nepochs = 2.5\n", "train.epochs"},
           {"[train]\nlr0 = fast\n", "train.lr0"},
           {"[run]\nlargest_component = yes\n", "run.largest_component"},
           {"[run]\nseed = -1\n", "run.seed"},
           {"[data]\ndataset = \"unterminated\n", "data.dataset"}}) {
    const auto msg = config_error([&] { parse_config(write_file(dir, text)); });
    EXPECT_NE(msg.find(key), std::string::npos) << text << " -> " << msg;
  }
}

TEST(RunConfigTest, InvalidValuesNameKey) {
  const auto k = config_error([] { parse_config(std::nullopt, {{"k", "0"}}); });
  EXPECT_NE(k.find("run.k"), std::string::npos) << k;
  const auto prec = config_error([] { parse_config(std::nullopt, {{"precision", "half"}}); });
  EXPECT_NE(prec.find("run.precision"), std::string::npos) << prec;
  const auto fam = config_error([] { parse_config(std::nullopt, {{"family", "C"}}); });
  EXPECT_NE(fam.find("phantom.family"), std::string::npos) << fam;
  const auto lr = config_error([] { parse_config(std::nullopt, {{"lr0", "-1"}}); });
  EXPECT_NE(lr.find("train.lr0"), std::string::npos) << lr;
}

TEST(RunConfigTest, MissingFileIsConfigError) {
  testing::TempDir dir;
  const auto msg = config_error([&] { parse_config(dir / "absent.toml"); });
  EXPECT_NE(msg.find("absent.toml"), std::string::npos);
}

TEST(RunConfigTest, CommentsQuotesAndDashes) {
  testing::TempDir dir;
  const auto path = write_file(dir,
                               "# leading comment\n"
                               "[data]\n"
                               "dataset = \"/data/a \\\"b\\\" # not a comment\"  # trailing\n"
                               "[train]\n"
                               "epochs = 3 # trailing\n");
  const auto cfg = parse_config(path, {{"batch-size", "5"}});
  EXPECT_EQ(cfg.dataset, "/data/a \"b\" # not a comment");
  EXPECT_EQ(cfg.train.epochs, 3);
  EXPECT_EQ(cfg.train.batch_size, 5);
}

TEST(RunConfigTest, ShortNamesAreUnique) {
  const auto& keys = config_keys();
  for (std::size_t i = 0; i < keys.size(); ++i) {
    for (std::size_t j = i + 1; j < keys.size(); ++j) EXPECT_NE(keys[i].name, keys[j].name);
  }
}

RunConfig random_config(Rng& rng) {
  RunConfig cfg;
  cfg.train.arch.stages = 1 + static_cast<int>(rng.below(4));
  cfg.train.arch.input_hw = 16 << rng.below(3);
  cfg.train.arch.base_channels = 2 * (1 + static_cast<int>(rng.below(8)));
  cfg.train.arch.growth = static_cast<int>(rng.below(5));
  cfg.train.arch.codewords = 1 + static_cast<int>(rng.below(16));
  cfg.train.arch.depth = 1 + static_cast<int>(rng.below(12));
  cfg.train.lr0 = rng.uniform(1e-5, 1.0);
  cfg.train.poly_power = rng.uniform(0.1, 3.0);
  cfg.train.weight_decay = rng.uniform(0.0, 1e-2);
  cfg.train.momentum = rng.uniform(0.0, 0.99);
  cfg.train.dropout = rng.uniform(0.0, 0.9);
  cfg.train.epochs = 1 + static_cast<int>(rng.below(50));
  cfg.train.seed = rng.next();
  cfg.train.loss.lambda = rng.uniform(0.0, 2.0);
  cfg.train.loss.boundary_w0 = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 10.0);
  cfg.dataset = rng.uniform() < 0.5 ? "" : "/tmp/d \"q\" \\ #" + std::to_string(rng.below(100));
  cfg.phantom_family = rng.uniform() < 0.5 ? "A" : "B";
  cfg.precision = rng.uniform() < 0.5 ? "float32" : "float64";
  cfg.largest_component = rng.uniform() < 0.5;
  cfg.k = 1 + static_cast<int>(rng.below(10));
  return cfg;
}

TEST(RunConfigTest, EchoRoundTripsExactly) {
  testing::TempDir dir;
  Rng rng(404);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cfg = random_config(rng);
    write_config(cfg, dir / "config.toml");
    EXPECT_EQ(parse_config(dir / "config.toml"), cfg) << to_toml(cfg);
  }
}

TEST(RunConfigTest, GetSettingFormats) {
  RunConfig cfg;
  EXPECT_EQ(get_setting(cfg, "train.lr0"), "0.01");
  EXPECT_EQ(get_setting(cfg, "train.epochs"), "20");
  EXPECT_EQ(get_setting(cfg, "loss.boundary_w0"), "0.0");
  EXPECT_EQ(get_setting(cfg, "run.largest_component"), "false");
  EXPECT_EQ(get_setting(cfg, "run.precision"), "\"float32\"");
  EXPECT_THROW(get_setting(cfg, "run.nope"), ConfigError);
}

}  // namespace
}  // namespace cstrip

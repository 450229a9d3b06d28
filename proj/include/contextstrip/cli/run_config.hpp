#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "contextstrip/training/train_config.hpp"

namespace cstrip {

/// Everything one command invocation needs. Serialized as a flat TOML subset:
/// `[section]` headers, `key = value` lines, `#` comments, quoted strings.
struct RunConfig {
  /// Optimizer, schedule, architecture ([arch]) and loss ([loss]) settings.
  TrainConfig train;

  // [data]
  std::string dataset;
  std::string target;
  std::string input;
  std::string checkpoint;

  // [phantom]
  int phantom_count = 40;
  int phantom_extent = 64;
  std::string phantom_family = "A";

  // [run]
  std::string output;
  std::string precision = "float32";
  int k = 2;
  bool largest_component = false;
  /// 0 defers to CONTEXTSTRIP_THREADS or the OpenMP default.
  int threads = 0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

struct ConfigKey {
  std::string section;
  std::string name;
  /// "int", "float", "bool" or "string".
  std::string type;
  std::string help;

  std::string qualified() const { return section + "." + name; }
};

/// Every accepted key, in echo order. Short names are unique across sections.
const std::vector<ConfigKey>& config_keys();

/// (key, value) pairs; a key is either "section.name" or the bare name.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

/// Defaults, then `file`, then `overrides`, then validate(). Unknown keys,
/// type mismatches and invalid values raise ConfigError naming the key.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const ConfigOverrides& overrides = {});

/// Sets one key from its textual value.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Textual value of a qualified key, as the echo writes it.
std::string get_setting(const RunConfig& cfg, const std::string& qualified_key);

/// Closest qualified key by edit distance over both bare and qualified names.
std::string nearest_key(const std::string& key);

std::string to_toml(const RunConfig& cfg);
void write_config(const RunConfig& cfg, const std::filesystem::path& path);

}  // namespace cstrip

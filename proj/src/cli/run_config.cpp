#include "contextstrip/cli/run_config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include "contextstrip/core/error.hpp"
#include "contextstrip/data/phantom.hpp"

namespace cstrip {

namespace {

struct Binding {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

[[noreturn]] void type_error(const ConfigKey& key, const std::string& value) {
  throw ConfigError(key.qualified() + ": expected " + (key.type == "int" ? "an integer" : "a " + key.type) +
                    ", got '" + value + "'");
}

template <typename Int>
Int parse_int(const ConfigKey& key, const std::string& text) {
  Int v{};
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) type_error(key, text);
  return v;
}

double parse_float(const ConfigKey& key, const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) type_error(key, text);
  return v;
}

bool parse_bool(const ConfigKey& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  type_error(key, text);
}

std::string parse_string(const ConfigKey& key, const std::string& text) {
  if (text.size() < 2 || text.front() != '"' || text.back() != '"') {
    // Bare words are accepted for convenience on the command line.
    if (text.find('"') != std::string::npos) type_error(key, text);
    return text;
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < text.size(); ++i) {
    char c = text[i];
    if (c == '\\') {
      if (i + 2 >= text.size()) type_error(key, text);
      c = text[++i];
      if (c != '\\' && c != '"') type_error(key, text);
    } else if (c == '"') {
      type_error(key, text);
    }
    out.push_back(c);
  }
  return out;
}

std::string format_float(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\\' || c == '"') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

template <typename Int, typename Ref>
Binding int_key(std::string section, std::string name, std::string help, Ref ref) {
  ConfigKey key{std::move(section), std::move(name), "int", std::move(help)};
  return {key, [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_int<Int>(key, v); },
          [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Ref>
Binding float_key(std::string section, std::string name, std::string help, Ref ref) {
  ConfigKey key{std::move(section), std::move(name), "float", std::move(help)};
  return {key, [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_float(key, v); },
          [ref](const RunConfig& c) { return format_float(ref(const_cast<RunConfig&>(c))); }};
}

template <typename Ref>
Binding bool_key(std::string section, std::string name, std::string help, Ref ref) {
  ConfigKey key{std::move(section), std::move(name), "bool", std::move(help)};
  return {key, [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); },
          [ref](const RunConfig& c) {
            return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false");
          }};
}

template <typename Ref>
Binding string_key(std::string section, std::string name, std::string help, Ref ref) {
  ConfigKey key{std::move(section), std::move(name), "string", std::move(help)};
  return {key, [key, ref](RunConfig& c, const std::string& v) { ref(c) = parse_string(key, v); },
          [ref](const RunConfig& c) { return quote(ref(const_cast<RunConfig&>(c))); }};
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = {
      int_key<int>("arch", "stages", "encoder/decoder stages",
                   [](RunConfig& c) -> int& { return c.train.arch.stages; }),
      int_key<int>("arch", "base_channels", "channels after the first stage",
                   [](RunConfig& c) -> int& { return c.train.arch.base_channels; }),
      int_key<int>("arch", "growth", "dense-block growth rate (0 = base_channels/2)",
                   [](RunConfig& c) -> int& { return c.train.arch.growth; }),
      int_key<int>("arch", "block_layers", "layers per dense block",
                   [](RunConfig& c) -> int& { return c.train.arch.block_layers; }),
      int_key<int>("arch", "codewords", "encoding-layer codewords",
                   [](RunConfig& c) -> int& { return c.train.arch.codewords; }),
      int_key<int>("arch", "depth", "slices in the sub-volume",
                   [](RunConfig& c) -> int& { return c.train.arch.depth; }),
      int_key<int>("arch", "classes", "segmentation classes",
                   [](RunConfig& c) -> int& { return c.train.arch.classes; }),
      int_key<int>("arch", "input_hw", "in-plane network resolution",
                   [](RunConfig& c) -> int& { return c.train.arch.input_hw; }),
      float_key("train", "lr0", "initial learning rate",
                [](RunConfig& c) -> double& { return c.train.lr0; }),
      float_key("train", "poly_power", "poly schedule exponent",
                [](RunConfig& c) -> double& { return c.train.poly_power; }),
      float_key("train", "weight_decay", "L2 weight decay",
                [](RunConfig& c) -> double& { return c.train.weight_decay; }),
      float_key("train", "momentum", "SGD momentum",
                [](RunConfig& c) -> double& { return c.train.momentum; }),
      int_key<int>("train", "epochs", "training epochs",
                   [](RunConfig& c) -> int& { return c.train.epochs; }),
      int_key<int>("train", "batch_size", "slices per step",
                   [](RunConfig& c) -> int& { return c.train.batch_size; }),
      float_key("train", "dropout", "decoder dropout rate",
                [](RunConfig& c) -> double& { return c.train.dropout; }),
      int_key<int>("train", "slices_per_subject", "slices drawn per subject and epoch (0 = all)",
                   [](RunConfig& c) -> int& { return c.train.slices_per_subject; }),
      float_key("loss", "lambda", "weight of the class-presence loss",
                [](RunConfig& c) -> double& { return c.train.loss.lambda; }),
      float_key("loss", "boundary_w0", "boundary emphasis of the pixel weights (0 = off)",
                [](RunConfig& c) -> double& { return c.train.loss.boundary_w0; }),
      float_key("loss", "boundary_sigma", "boundary weight width in pixels",
                [](RunConfig& c) -> double& { return c.train.loss.boundary_sigma; }),
      string_key("data", "dataset", "dataset directory",
                 [](RunConfig& c) -> std::string& { return c.dataset; }),
      string_key("data", "target", "transfer target dataset directory",
                 [](RunConfig& c) -> std::string& { return c.target; }),
      string_key("data", "input", "NIfTI file or directory to predict",
                 [](RunConfig& c) -> std::string& { return c.input; }),
      string_key("data", "checkpoint", "checkpoint directory",
                 [](RunConfig& c) -> std::string& { return c.checkpoint; }),
      int_key<int>("phantom", "count", "phantoms to generate",
                   [](RunConfig& c) -> int& { return c.phantom_count; }),
      int_key<int>("phantom", "extent", "phantom grid extent per axis",
                   [](RunConfig& c) -> int& { return c.phantom_extent; }),
      string_key("phantom", "family", "generator family A or B",
                 [](RunConfig& c) -> std::string& { return c.phantom_family; }),
      int_key<std::uint64_t>("run", "seed", "seed of every random stream",
                             [](RunConfig& c) -> std::uint64_t& { return c.train.seed; }),
      string_key("run", "output", "output directory",
                 [](RunConfig& c) -> std::string& { return c.output; }),
      string_key("run", "precision", "float32 or float64",
                 [](RunConfig& c) -> std::string& { return c.precision; }),
      int_key<int>("run", "k", "cross-validation folds", [](RunConfig& c) -> int& { return c.k; }),
      bool_key("run", "largest_component", "keep only the largest predicted component",
               [](RunConfig& c) -> bool& { return c.largest_component; }),
      int_key<int>("run", "threads", "worker threads (0 = environment/default)",
                   [](RunConfig& c) -> int& { return c.threads; }),
  };
  return table;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

const Binding* find_binding(const std::string& key) {
  for (const auto& b : bindings()) {
    if (key == b.key.qualified() || key == b.key.name) return &b;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

/// Drops a trailing `# comment` that is not inside a quoted string.
std::string strip_comment(const std::string& value) {
  bool quoted = false;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '\\' && quoted) {
      ++i;
    } else if (value[i] == '"') {
      quoted = !quoted;
    } else if (value[i] == '#' && !quoted) {
      return trim(value.substr(0, i));
    }
  }
  return trim(value);
}

}  // namespace

void RunConfig::validate() const {
  train.validate();
  if (phantom_count < 1) throw ConfigError("phantom.count must be positive");
  if (phantom_extent < 32) throw ConfigError("phantom.extent must be at least 32");
  try {
    parse_phantom_family(phantom_family);
  } catch (const ValueError& e) {
    throw ConfigError(std::string("phantom.family: ") + e.what());
  }
  if (precision != "float32" && precision != "float64") {
    throw ConfigError("run.precision must be float32 or float64, got '" + precision + "'");
  }
  if (k < 1) throw ConfigError("run.k must be positive");
  if (threads < 0) throw ConfigError("run.threads must be non-negative");
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& b : bindings()) out.push_back(b.key);
    return out;
  }();
  return keys;
}

std::string nearest_key(const std::string& key) {
  const Binding* best = nullptr;
  std::size_t best_distance = std::numeric_limits<std::size_t>::max();
  // A key filed under the wrong section is matched on its own name.
  const auto dot = key.rfind('.');
  const std::string bare = dot == std::string::npos ? key : key.substr(dot + 1);
  for (const auto& b : bindings()) {
    const std::size_t d = std::min({edit_distance(key, b.key.name), edit_distance(bare, b.key.name),
                                    edit_distance(key, b.key.qualified())});
    if (d < best_distance) {
      best_distance = d;
      best = &b;
    }
  }
  return best->key.qualified();
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  std::string normalized = key;
  std::replace(normalized.begin(), normalized.end(), '-', '_');
  const Binding* b = find_binding(normalized);
  if (b == nullptr) {
    throw ConfigError("unknown key '" + key + "' (did you mean '" + nearest_key(normalized) + "'?)");
  }
  b->set(cfg, trim(value));
}

std::string get_setting(const RunConfig& cfg, const std::string& qualified_key) {
  for (const auto& b : bindings()) {
    if (b.key.qualified() == qualified_key) return b.get(cfg);
  }
  throw ConfigError("unknown key '" + qualified_key + "'");
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const ConfigOverrides& overrides) {
  RunConfig cfg;
  if (file) {
    if (!std::filesystem::is_regular_file(*file)) {
      throw ConfigError("config file '" + file->string() + "' does not exist");
    }
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file->string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(file->string() + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        throw ConfigError("unknown key '" + section + "' outside any section (did you mean '" +
                          nearest_key(section) + "'?)");
      }
      for (const auto& [name, node] : body) {
        const std::string qualified = section + "." + name;
        if (find_binding(qualified) == nullptr || find_binding(qualified)->key.section != section) {
          throw ConfigError("unknown key '" + qualified + "' in '" + file->string() +
                            "' (did you mean '" + nearest_key(qualified) + "'?)");
        }
        apply_setting(cfg, qualified, strip_comment(node.data()));
      }
    }
  }
  for (const auto& [key, value] : overrides) apply_setting(cfg, key, value);
  cfg.validate();
  return cfg;
}

std::string to_toml(const RunConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const auto& b : bindings()) {
    if (b.key.section != section) {
      if (!section.empty()) os << '\n';
      section = b.key.section;
      os << '[' << section << "]\n";
    }
    os << b.key.name << " = " << b.get(cfg) << '\n';
  }
  return os.str();
}

void write_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << to_toml(cfg);
  if (!os) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace cstrip

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "contextstrip/cli/commands.hpp"
#include "contextstrip/cli/run_config.hpp"
#include "contextstrip/core/error.hpp"

namespace {

/// Turns leftover `--key value` / `--key=value` tokens into overrides so that
/// misspelt keys get the same nearest-key diagnostic as config files.
cstrip::ConfigOverrides extras_to_overrides(const std::vector<std::string>& extras) {
  cstrip::ConfigOverrides out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& token = extras[i];
    if (token.rfind("--", 0) != 0 || token.size() <= 2) {
      throw cstrip::ConfigError("unexpected argument '" + token + "'");
    }
    const auto eq = token.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(token.substr(2, eq - 2), token.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(token.substr(2), extras[++i]);
    } else {
      // Validate the key first so a typo is reported as such.
      cstrip::RunConfig probe;
      cstrip::apply_setting(probe, token.substr(2), "");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextstrip: context-encoding brain extraction on CPU"};
  app.require_subcommand(1);

  struct Invocation {
    CLI::App* app = nullptr;
    std::string config;
    bool force = false;
    std::map<std::string, std::string> values;
  };
  std::vector<Invocation> invocations(cstrip::command_names().size());
  for (std::size_t c = 0; c < invocations.size(); ++c) {
    const auto& name = cstrip::command_names()[c];
    auto& inv = invocations[c];
    inv.app = app.add_subcommand(name, cstrip::command_help(name));
    inv.app->allow_extras();
    inv.app->add_option("--config", inv.config, "TOML config file (keys below, by section)");
    inv.app->add_flag("--force", inv.force, "write into a non-empty output directory");
    for (const auto& key : cstrip::config_keys()) {
      inv.app->add_option("--" + key.name, inv.values[key.qualified()],
                          key.help + " [" + key.qualified() + ", " + key.type + "]");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  for (std::size_t c = 0; c < invocations.size(); ++c) {
    auto& inv = invocations[c];
    if (!inv.app->parsed()) continue;
    const auto& command = cstrip::command_names()[c];
    cstrip::RunConfig cfg;
    try {
      cstrip::ConfigOverrides overrides;
      for (const auto& key : cstrip::config_keys()) {
        if (inv.app->count("--" + key.name) > 0) {
          overrides.emplace_back(key.qualified(), inv.values[key.qualified()]);
        }
      }
      for (auto& o : extras_to_overrides(inv.app->remaining())) overrides.push_back(std::move(o));
      std::optional<std::filesystem::path> file;
      if (!inv.config.empty()) file = inv.config;
      cfg = cstrip::parse_config(file, overrides);
    } catch (const std::exception& e) {
      std::cerr << "contextstrip " << command << ": " << e.what() << '\n';
      return 2;
    }
    return cstrip::dispatch(command, cfg, {inv.force}, std::cout, std::cerr);
  }
  return 2;
}

#include "contextstrip/network/arch_config.hpp"

#include <string>

#include "contextstrip/core/error.hpp"

namespace cstrip {

namespace {

void require_positive(int value, const char* field) {
  if (value <= 0) {
    throw ValueError(std::string("arch.") + field + " must be positive, got " +
                     std::to_string(value));
  }
}

}  // namespace

void ArchConfig::validate() const {
  require_positive(stages, "stages");
  require_positive(base_channels, "base_channels");
  if (growth < 0) throw ValueError("arch.growth must be positive (or 0 for base_channels/2)");
  if (growth_rate() <= 0) throw ValueError("arch.growth resolves to 0; raise base_channels");
  require_positive(block_layers, "block_layers");
  if (codewords <= 0) {
    throw ValueError("arch.codewords must be at least 1, got " + std::to_string(codewords));
  }
  require_positive(depth, "depth");
  if (classes < 2) throw ValueError("arch.classes must be >= 2, got " + std::to_string(classes));
  require_positive(input_hw, "input_hw");
  if (stages >= 30 || input_hw % (1 << stages) != 0) {
    throw ValueError("arch.input_hw=" + std::to_string(input_hw) +
                     " is not divisible by 2^stages (stages=" + std::to_string(stages) + ")");
  }
}

ArchConfig ArchConfig::desk_scale() {
  ArchConfig cfg;
  cfg.input_hw = 64;
  return cfg;
}

void to_json(nlohmann::json& j, const ArchConfig& cfg) {
  j = nlohmann::json{{"stages", cfg.stages},           {"base_channels", cfg.base_channels},
                     {"growth", cfg.growth},           {"block_layers", cfg.block_layers},
                     {"codewords", cfg.codewords},     {"depth", cfg.depth},
                     {"classes", cfg.classes},         {"input_hw", cfg.input_hw}};
}

void from_json(const nlohmann::json& j, ArchConfig& cfg) {
  j.at("stages").get_to(cfg.stages);
  j.at("base_channels").get_to(cfg.base_channels);
  j.at("growth").get_to(cfg.growth);
  j.at("block_layers").get_to(cfg.block_layers);
  j.at("codewords").get_to(cfg.codewords);
  j.at("depth").get_to(cfg.depth);
  j.at("classes").get_to(cfg.classes);
  j.at("input_hw").get_to(cfg.input_hw);
}

}  // namespace cstrip

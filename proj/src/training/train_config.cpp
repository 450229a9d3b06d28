#include "contextstrip/training/train_config.hpp"

#include <cmath>
#include <string>

#include "contextstrip/core/error.hpp"

namespace cstrip {

namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw ConfigError("train." + field + " " + rule);
}

}  // namespace

void TrainConfig::validate() const {
  require(std::isfinite(lr0) && lr0 >= 0.0, "lr0", "must be a nonnegative number");
  require(std::isfinite(poly_power) && poly_power >= 0.0, "poly_power",
          "must be a nonnegative number");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "weight_decay",
          "must be a nonnegative number");
  require(std::isfinite(momentum) && momentum >= 0.0 && momentum < 1.0, "momentum",
          "must lie in [0, 1)");
  require(epochs >= 1, "epochs", "must be at least 1");
  require(batch_size >= 1, "batch_size", "must be at least 1");
  require(std::isfinite(dropout) && dropout >= 0.0 && dropout < 1.0, "dropout",
          "must lie in [0, 1)");
  require(slices_per_subject >= 0, "slices_per_subject", "must be nonnegative");
  try {
    arch.validate();
    loss.validate();
  } catch (const ValueError& e) {
    throw ConfigError(e.what());
  }
}

void to_json(nlohmann::json& j, const TrainConfig& cfg) {
  j = nlohmann::json{{"lr0", cfg.lr0},
                     {"poly_power", cfg.poly_power},
                     {"weight_decay", cfg.weight_decay},
                     {"momentum", cfg.momentum},
                     {"epochs", cfg.epochs},
                     {"batch_size", cfg.batch_size},
                     {"dropout", cfg.dropout},
                     {"seed", cfg.seed},
                     {"slices_per_subject", cfg.slices_per_subject},
                     {"arch", cfg.arch},
                     {"loss", cfg.loss}};
}

void from_json(const nlohmann::json& j, TrainConfig& cfg) {
  j.at("lr0").get_to(cfg.lr0);
  j.at("poly_power").get_to(cfg.poly_power);
  j.at("weight_decay").get_to(cfg.weight_decay);
  j.at("momentum").get_to(cfg.momentum);
  j.at("epochs").get_to(cfg.epochs);
  j.at("batch_size").get_to(cfg.batch_size);
  j.at("dropout").get_to(cfg.dropout);
  j.at("seed").get_to(cfg.seed);
  j.at("slices_per_subject").get_to(cfg.slices_per_subject);
  j.at("arch").get_to(cfg.arch);
  j.at("loss").get_to(cfg.loss);
}

}  // namespace cstrip

namespace cstrip::loss {

void to_json(nlohmann::json& j, const LossConfig& cfg) {
  j = nlohmann::json{{"lambda", cfg.lambda},
                     {"boundary_w0", cfg.boundary_w0},
                     {"boundary_sigma", cfg.boundary_sigma}};
}

void from_json(const nlohmann::json& j, LossConfig& cfg) {
  j.at("lambda").get_to(cfg.lambda);
  j.at("boundary_w0").get_to(cfg.boundary_w0);
  j.at("boundary_sigma").get_to(cfg.boundary_sigma);
}

}  // namespace cstrip::loss

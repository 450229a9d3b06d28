#include "contextstrip/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "contextstrip/cli/gradcheck_suite.hpp"
#include "contextstrip/cli/selftest.hpp"
#include "contextstrip/core/error.hpp"
#include "contextstrip/core/parallel.hpp"
#include "contextstrip/data/dataset.hpp"
#include "contextstrip/data/folds.hpp"
#include "contextstrip/data/nifti.hpp"
#include "contextstrip/evaluation/predict.hpp"
#include "contextstrip/evaluation/protocols.hpp"
#include "contextstrip/evaluation/report.hpp"
#include "contextstrip/training/checkpoint.hpp"
#include "contextstrip/training/trainer.hpp"

namespace cstrip {

namespace fs = std::filesystem;

namespace {

/// Signals a verification command whose checks did not all pass.
class CheckFailed : public Error {
 public:
  using Error::Error;
};

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  std::ostream& log;
  fs::path output;
};

void require(const std::string& value, const std::string& key, const std::string& command) {
  if (value.empty()) throw ConfigError(key + " is required for '" + command + "'");
}

fs::path prepare_output(const std::string& dir, bool force) {
  const fs::path path(dir);
  if (fs::exists(path)) {
    if (!fs::is_directory(path)) throw IoError("output '" + dir + "' exists and is not a directory");
    if (!fs::is_empty(path) && !force) {
      throw ConfigError("output directory '" + dir + "' is not empty; pass --force to overwrite");
    }
  }
  fs::create_directories(path);
  return path;
}

void log_epoch(std::ostream& log, const std::string& prefix, int epochs, const EpochRecord& r) {
  char line[200];
  std::snprintf(line, sizeof(line),
                "%sepoch %d/%d lr %.5f loss %.4f (ce %.4f dice %.4f sec %.4f) %.1f s", prefix.c_str(),
                r.epoch, epochs, r.lr, r.loss.total, r.loss.ce, r.loss.dice, r.loss.sec, r.wall_time);
  log << line << '\n' << std::flush;
}

PredictOptions predict_options(const RunConfig& cfg) {
  PredictOptions opts;
  opts.largest_component = cfg.largest_component;
  return opts;
}

void finish_report(Context& ctx, const MetricsReport& report) {
  write_report(report, ctx.output / "report");
  ctx.log << report.protocol << ": mean Dice " << format_percent(report.overall.dice) << " over "
          << report.overall.subjects << " subjects\n";
}

void cmd_phantom(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto dataset = generate_phantom_dataset(cfg.phantom_count, cfg.phantom_extent, cfg.train.seed,
                                                parse_phantom_family(cfg.phantom_family));
  save_dataset(dataset, ctx.output);
  ctx.log << "wrote " << dataset.subjects.size() << " phantoms to " << ctx.output.string() << '\n';
}

template <typename Dtype>
void cmd_train(Context& ctx) {
  const auto dataset = load_dataset(ctx.cfg.dataset);
  TrainOptions opts;
  opts.log_path = ctx.output / "train_log.jsonl";
  opts.on_epoch = [&](const EpochRecord& r) { log_epoch(ctx.log, "", ctx.cfg.train.epochs, r); };
  const auto state = train<Dtype>(dataset, ctx.cfg.train, opts);
  save_checkpoint(state, ctx.output / "checkpoint");
}

template <typename Dtype>
void cmd_crossval(Context& ctx) {
  const auto dataset = load_dataset(ctx.cfg.dataset);
  const auto plan = kfold_split(dataset.ids(), ctx.cfg.k, ctx.cfg.train.seed);
  save_fold_plan(plan, ctx.output / "folds.json");
  std::ofstream jsonl(ctx.output / "train_log.jsonl", std::ios::trunc);
  CrossvalHooks<Dtype> hooks;
  hooks.on_epoch = [&](int fold, const EpochRecord& r) {
    nlohmann::json j = r;
    j["fold"] = fold;
    jsonl << j.dump() << '\n' << std::flush;
    log_epoch(ctx.log, "fold " + std::to_string(fold) + " ", ctx.cfg.train.epochs, r);
  };
  hooks.on_fold_model = [&](int fold, const TrainState<Dtype>& state) {
    save_checkpoint(state, ctx.output / ("fold_" + std::to_string(fold)));
  };
  finish_report(ctx, evaluate_crossval<Dtype>(dataset, plan, ctx.cfg.train,
                                              predict_options(ctx.cfg), hooks));
}

/// Strips .nii, .nii.gz or .hdr from a file name.
std::string image_stem(const fs::path& path) {
  std::string name = path.filename().string();
  for (const std::string ext : {".nii.gz", ".nii", ".hdr"}) {
    if (name.size() > ext.size() && name.compare(name.size() - ext.size(), ext.size(), ext) == 0) {
      return name.substr(0, name.size() - ext.size());
    }
  }
  return name;
}

std::vector<fs::path> prediction_inputs(const fs::path& input) {
  if (!fs::exists(input)) throw IoError("input '" + input.string() + "' does not exist");
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.ends_with(".nii") || name.ends_with(".nii.gz") || name.ends_with(".hdr")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no NIfTI images in '" + input.string() + "'");
  return files;
}

template <typename Dtype>
void cmd_predict(Context& ctx, const TrainState<Dtype>& state) {
  for (const auto& path : prediction_inputs(ctx.cfg.input)) {
    auto volume = nifti::read_nifti(path);
    const auto result =
        predict_volume(state.params, state.cfg.arch, volume, predict_options(ctx.cfg));
    const auto target = ctx.output / (image_stem(path) + "_mask.nii.gz");
    nifti::write_nifti_mask(result, target);
    ctx.log << path.string() << " -> " << target.string() << '\n';
  }
}

template <typename Dtype>
void cmd_evaluate(Context& ctx, const TrainState<Dtype>& state) {
  const auto dataset = load_dataset(ctx.cfg.dataset);
  auto scores = score_dataset(state.params, state.cfg.arch, dataset, -1, predict_options(ctx.cfg));
  finish_report(ctx, make_report("evaluate", dataset.name, ctx.cfg.train.seed, std::move(scores)));
}

template <typename Dtype>
void cmd_transfer(Context& ctx, const TrainState<Dtype>& state) {
  const auto target = load_dataset(ctx.cfg.target);
  const std::string source = state.dataset_name.empty() ? "unknown" : state.dataset_name;
  finish_report(ctx, evaluate_transfer(state.params, state.cfg.arch, target, source,
                                       ctx.cfg.train.seed, predict_options(ctx.cfg)));
}

template <typename Dtype>
void with_checkpoint(Context& ctx, const std::string& command) {
  const auto state = load_checkpoint<Dtype>(ctx.cfg.checkpoint);
  if (command == "predict") {
    cmd_predict(ctx, state);
  } else if (command == "evaluate") {
    cmd_evaluate(ctx, state);
  } else {
    cmd_transfer(ctx, state);
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  os << j.dump(2) << '\n';
}

void cmd_gradcheck(Context& ctx) {
  const auto result = run_gradcheck_suite(ctx.cfg.train.seed);
  ctx.out << format_gradcheck(result) << std::flush;
  if (!ctx.output.empty()) write_json(ctx.output / "gradcheck.json", result);
  if (!result.passed()) throw CheckFailed("gradient check exceeded its tolerance");
}

void cmd_selftest(Context& ctx) {
  const auto result = run_selftest(ctx.cfg.train.seed);
  ctx.out << format_selftest(result) << std::flush;
  if (!ctx.output.empty()) write_json(ctx.output / "selftest.json", result);
  if (!result.passed()) throw CheckFailed("selftest found a violated identity");
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"phantom",  "train",    "predict",   "evaluate",
                                                 "crossval", "transfer", "gradcheck", "selftest"};
  return names;
}

std::string command_help(const std::string& command) {
  if (command == "phantom") return "generate a labelled phantom dataset (needs output)";
  if (command == "train") return "train a model (needs dataset, output)";
  if (command == "predict") return "write a brain mask per image (needs checkpoint, input, output)";
  if (command == "evaluate") return "score a checkpoint on a dataset (needs checkpoint, dataset, output)";
  if (command == "crossval") return "k-fold cross-validation (needs dataset, output)";
  if (command == "transfer") return "score a checkpoint on another dataset (needs checkpoint, target, output)";
  if (command == "gradcheck") return "finite-difference check of every op and the full model";
  if (command == "selftest") return "loss, metric and context-scaling identities";
  throw ValueError("unknown command '" + command + "'");
}

void run_command(const std::string& command, const RunConfig& cfg, const DispatchOptions& options,
                 std::ostream& out, std::ostream& log) {
  if (std::find(command_names().begin(), command_names().end(), command) == command_names().end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  cfg.validate();
  const bool verification = command == "gradcheck" || command == "selftest";
  if (!verification) require(cfg.output, "run.output", command);
  if (command == "train" || command == "crossval" || command == "evaluate") {
    require(cfg.dataset, "data.dataset", command);
  }
  if (command == "predict" || command == "evaluate" || command == "transfer") {
    require(cfg.checkpoint, "data.checkpoint", command);
  }
  if (command == "predict") require(cfg.input, "data.input", command);
  if (command == "transfer") require(cfg.target, "data.target", command);

  if (cfg.threads > 0) {
    set_thread_count(cfg.threads);
  } else {
    configure_threads_from_env();
  }

  Context ctx{cfg, out, log, {}};
  if (!cfg.output.empty()) {
    ctx.output = prepare_output(cfg.output, options.force);
    write_config(cfg, ctx.output / "config.toml");
  }
  const bool f64 = cfg.precision == "float64";
  if (command == "phantom") {
    cmd_phantom(ctx);
  } else if (command == "train") {
    f64 ? cmd_train<double>(ctx) : cmd_train<float>(ctx);
  } else if (command == "crossval") {
    f64 ? cmd_crossval<double>(ctx) : cmd_crossval<float>(ctx);
  } else if (command == "gradcheck") {
    cmd_gradcheck(ctx);
  } else if (command == "selftest") {
    cmd_selftest(ctx);
  } else {
    // Checkpoint commands run in the precision the checkpoint was saved in.
    if (checkpoint_precision(cfg.checkpoint) == precision_tag<double>()) {
      with_checkpoint<double>(ctx, command);
    } else {
      with_checkpoint<float>(ctx, command);
    }
  }
}

int dispatch(const std::string& command, const RunConfig& cfg, const DispatchOptions& options,
             std::ostream& out, std::ostream& log) {
  try {
    run_command(command, cfg, options, out, log);
    return 0;
  } catch (const ConfigError& e) {
    log << "contextstrip " << command << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "contextstrip " << command << ": " << e.what() << '\n';
    return 1;
  }
}

}  // namespace cstrip

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Criteria can be selected by name on
// the command line (e.g. `acceptance A4 A5`); the default runs all of them.

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "contextstrip/cli/gradcheck_suite.hpp"
#include "contextstrip/core/parallel.hpp"
#include "contextstrip/core/rng.hpp"
#include "contextstrip/data/dataset.hpp"
#include "contextstrip/data/folds.hpp"
#include "contextstrip/data/nifti.hpp"
#include "contextstrip/data/normalize.hpp"
#include "contextstrip/data/phantom.hpp"
#include "contextstrip/data/sampling.hpp"
#include "contextstrip/evaluation/metrics.hpp"
#include "contextstrip/evaluation/protocols.hpp"
#include "contextstrip/evaluation/report.hpp"
#include "contextstrip/losses/losses.hpp"
#include "contextstrip/network/model.hpp"
#include "contextstrip/training/checkpoint.hpp"
#include "contextstrip/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace cstrip;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

double cpu_seconds_since(std::clock_t start) {
  return static_cast<double>(std::clock() - start) / CLOCKS_PER_SEC;
}

double wall_seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

class ScratchDir {
 public:
  ScratchDir() : path_(fs::temp_directory_path() /
                       ("contextstrip_acceptance_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

// ---------------------------------------------------------------------------
// A1

Outcome gradient_fidelity() {
  const std::clock_t start = std::clock();
  const auto result = run_gradcheck_suite(0, true);
  const double cpu = cpu_seconds_since(start);
  double worst_op = 0.0;
  std::string worst_name;
  bool ops_ok = true;
  for (const auto& row : result.ops) {
    ops_ok = ops_ok && row.checked > 0 && row.max_relative_error < 1e-6;
    if (row.max_relative_error >= worst_op) {
      worst_op = row.max_relative_error;
      worst_name = row.name;
    }
  }
  const auto& model = result.full_model;
  const bool model_ok = model.checked > 0 && model.max_relative_error < 1e-5;
  const bool time_ok = cpu < 120.0;
  return {ops_ok && model_ok && time_ok && !result.ops.empty(),
          fmt("%zu ops, worst %.3g (%s) < 1e-6; full model %.3g < 1e-5 over %zu coords; "
              "cpu %.1fs < 120s",
              result.ops.size(), worst_op, worst_name.c_str(), model.max_relative_error,
              model.checked, cpu)};
}

// ---------------------------------------------------------------------------
// A2 / A3 / A7 share one cross-validation run.

struct CrossvalRun {
  MetricsReport report;
  ModelParams<float> fold0_params;
  TrainConfig cfg;
  double wall = 0.0;
};

TrainConfig phantom_train_config() {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.slices_per_subject = 8;
  return cfg;
}

const CrossvalRun& crossval_run() {
  static std::optional<CrossvalRun> run;
  if (run) return *run;
  run.emplace();
  run->cfg = phantom_train_config();
  const auto start = std::chrono::steady_clock::now();
  const Dataset dataset = generate_phantom_dataset(40, 64, 0, PhantomFamily::A);
  const FoldPlan plan = kfold_split(dataset.ids(), 2, 0);
  CrossvalHooks<float> hooks;
  hooks.on_fold_model = [&](int fold, const TrainState<float>& state) {
    if (fold == 0) run->fold0_params = state.params.clone();
  };
  run->report = evaluate_crossval<float>(dataset, plan, run->cfg, {}, hooks);
  run->wall = wall_seconds_since(start);
  return *run;
}

Outcome phantom_crossval() {
  const auto& run = crossval_run();
  const auto& o = run.report.overall;
  const bool defined = o.dice && o.sensitivity && o.specificity;
  const bool ok = defined && *o.dice >= 0.95 && *o.sensitivity >= 0.90 &&
                  *o.specificity >= 0.97 && o.subjects == 40 && run.wall <= 1800.0;
  return {ok, fmt("%d subjects, dice %.4f >= 0.95, sensitivity %.4f >= 0.90, "
                  "specificity %.4f >= 0.97; wall %.0fs <= 1800s",
                  o.subjects, o.dice.value_or(NAN), o.sensitivity.value_or(NAN),
                  o.specificity.value_or(NAN), run.wall)};
}

Outcome phantom_transfer() {
  const auto& run = crossval_run();
  const auto same = run.report.folds.empty() ? std::nullopt : run.report.folds[0].dice;
  const Dataset target = generate_phantom_dataset(20, 64, 0, PhantomFamily::B);
  const auto report =
      evaluate_transfer(run.fold0_params, run.cfg.arch, target, run.report.dataset, 0);
  const auto other = report.overall.dice;
  const bool ok = same && other && *other >= 0.85 && *other < *same;
  return {ok, fmt("family B dice %.4f >= 0.85 and < same-family held-out dice %.4f (%s)",
                  other.value_or(NAN), same.value_or(NAN), report.protocol.c_str())};
}

// ---------------------------------------------------------------------------
// A4

Outcome loss_identities() {
  using T = double;
  Graph<T> g(false);
  Rng rng(4);
  const std::int64_t n = 3, h = 12, w = 10;
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n * h * w));
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.below(2));
  labels[0] = 0;
  labels[1] = 1;
  const auto target = loss::one_hot<T>(labels, n, 2, h, w);
  const auto ce = loss::cross_entropy(g, target, target).item();
  const auto dice = loss::dice(g, target, target).item();
  // Both classes occur, so the presence indicators of every item are 1.
  const auto y = Tensor<T>::full({n, 2}, T(1));
  const auto sec = loss::sec(g, y, y).item();
  const auto total = loss::total_loss(ce, dice, sec, 0.1).total;
  const auto uniform = Tensor<T>::full({n, 2, h, w}, T(0.5));
  const auto ce_uniform = loss::cross_entropy(g, uniform, target).item();
  const bool ok = std::abs(ce) <= 1e-10 && std::abs(dice + 1.0) <= 1e-6 &&
                  std::abs(sec) <= 1e-10 && std::abs(total + 1.0) <= 1e-6 &&
                  std::abs(ce_uniform - std::log(2.0)) <= 1e-6;
  return {ok, fmt("one-hot: ce %.3g, dice %.9f, sec %.3g, total %.9f; uniform ce - ln2 = %.3g",
                  ce, dice, sec, total, ce_uniform - std::log(2.0))};
}

// ---------------------------------------------------------------------------
// A5

Outcome metric_oracle() {
  Rng rng(5);
  int mismatches = 0, trials = 1000, undefined = 0;
  auto check = [&](const std::optional<double>& got, std::int64_t num, std::int64_t den) {
    if (den == 0) {
      ++undefined;
      mismatches += got.has_value();
      return;
    }
    mismatches += !got || *got != static_cast<double>(num) / static_cast<double>(den);
  };
  for (int t = 0; t < trials; ++t) {
    std::size_t size = 1;
    for (int a = 0; a < 3; ++a) size *= 1 + rng.below(16);
    const double p_pred = rng.uniform(), p_truth = rng.uniform();
    std::vector<std::uint8_t> pred(size), truth(size);
    for (std::size_t i = 0; i < size; ++i) {
      pred[i] = rng.uniform() < p_pred;
      truth[i] = rng.uniform() < p_truth;
    }
    std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < size; ++i) {
      if (pred[i] && truth[i]) ++tp;
      else if (pred[i]) ++fp;
      else if (truth[i]) ++fn;
      else ++tn;
    }
    const auto c = confusion(pred, truth);
    mismatches += c.tp != tp || c.fp != fp || c.tn != tn || c.fn != fn;
    check(dice_score(c), 2 * tp, 2 * tp + fp + fn);
    check(sensitivity(c), tp, tp + fn);
    check(specificity(c), tn, tn + fp);
  }
  return {mismatches == 0,
          fmt("%d mask pairs up to 16^3, %d mismatches against voxel recounts "
              "(%d undefined cases agreed)",
              trials, mismatches, undefined)};
}

// ---------------------------------------------------------------------------
// A6

Outcome context_contract() {
  using T = double;
  Graph<T> g(false);
  Rng rng(6);
  const std::int64_t n = 2, c = 8;
  Tensor<T> x({n, c, 4, 4}), e({n, c}), wt({c, c});
  for (auto& v : x.mutable_data()) v = rng.uniform(-5, 5);
  for (auto& v : e.mutable_data()) v = rng.uniform(-1, 1);
  for (auto& v : wt.mutable_data()) v = rng.uniform(-0.1, 0.1);
  const auto open = net::context_scaling(g, x, e, wt, Tensor<T>::full({c}, T(20)));
  double worst = 0.0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    worst = std::max(worst, std::abs(open.output.data()[i] - x.data()[i]));
  }
  const auto half =
      net::context_scaling(g, x, Tensor<T>::full({n, c}, T(0)), wt, Tensor<T>::full({c}, T(0)));
  int inexact = 0;
  for (std::size_t i = 0; i < x.data().size(); ++i) {
    inexact += half.output.data()[i] != 0.5 * x.data()[i];
  }
  for (const T gamma : half.gamma.data()) inexact += gamma != 0.5;
  return {worst <= 1e-6 && inexact == 0,
          fmt("bias +20: max |out - x| %.3g <= 1e-6; e = 0: %d values differ from 0.5 x", worst,
              inexact)};
}

// ---------------------------------------------------------------------------
// A7

Outcome shape_protocol() {
  const ArchConfig arch;
  const auto params = net::init_params<float>(arch, 0);
  const std::int64_t n = 2, hw = arch.input_hw;
  Rng rng(7);
  Tensor<float> slice({n, 1, hw, hw}), subvol({n, arch.depth, hw, hw});
  for (auto& v : subvol.mutable_data()) v = static_cast<float>(rng.uniform(-1, 1));
  const int center = subvolume_center(arch.depth);
  for (std::int64_t b = 0; b < n; ++b) {
    std::copy_n(subvol.data().begin() + (b * arch.depth + center) * hw * hw, hw * hw,
                slice.mutable_data().begin() + b * hw * hw);
  }
  Graph<float> g(false);
  const auto out = net::model_forward(g, slice, subvol, params, arch, {});
  const bool shape_ok = out.pixel_probs.shape() == Shape{n, 2, 256, 256} &&
                        out.class_probs.shape() == Shape{n, 2};
  double worst_sum = 0.0;
  const auto& p = out.pixel_probs.data();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t i = 0; i < hw * hw; ++i) {
      const double s = p[(b * 2) * hw * hw + i] + p[(b * 2 + 1) * hw * hw + i];
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  }

  const auto& report = crossval_run().report;
  const std::string table = format_table(report);
  const std::regex header(R"(Method\s*\|\s*Dice\s*\|\s*Sensitivity\s*\|\s*Specificity\s*\n)");
  const std::regex row(R"(\n(\S+)\s*\|\s*(\d+\.\d\d)\s*\|\s*(\d+\.\d\d)\s*\|\s*(\d+\.\d\d)\s*\n)");
  std::smatch m;
  bool table_ok = std::regex_search(table, header) && std::regex_search(table, m, row);
  if (table_ok) {
    const auto& o = report.overall;
    table_ok = m[1] == report.method && m[2] == format_percent(o.dice) &&
               m[3] == format_percent(o.sensitivity) && m[4] == format_percent(o.specificity) &&
               report.protocol == crossval_tag(2);
  }
  const std::string shape = fmt("%lldx%lldx%lldx%lld",
                                static_cast<long long>(out.pixel_probs.shape()[0]),
                                static_cast<long long>(out.pixel_probs.shape()[1]),
                                static_cast<long long>(out.pixel_probs.shape()[2]),
                                static_cast<long long>(out.pixel_probs.shape()[3]));
  return {shape_ok && worst_sum < 1e-5 && table_ok,
          fmt("pixel_probs %s (class sums within %.2g of 1); report '%s' with Dice / "
              "Sensitivity / Specificity percentage columns: %s",
              shape.c_str(), worst_sum, report.protocol.c_str(), table_ok ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// A8

template <typename Dtype>
bool same_bits(const Tensor<Dtype>& a, const Tensor<Dtype>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(Dtype)) == 0;
}

template <typename Dtype>
int state_differences(const TrainState<Dtype>& a, const TrainState<Dtype>& b) {
  int diff = 0;
  const auto& ea = a.params.entries();
  const auto& eb = b.params.entries();
  if (ea.size() != eb.size() || a.velocity.size() != b.velocity.size()) return 1;
  for (std::size_t i = 0; i < ea.size(); ++i) {
    diff += ea[i].name != eb[i].name || !same_bits(ea[i].tensor, eb[i].tensor);
  }
  for (std::size_t i = 0; i < a.velocity.size(); ++i) {
    diff += !same_bits(a.velocity[i], b.velocity[i]);
  }
  diff += a.step != b.step || a.epoch != b.epoch || a.rng_state != b.rng_state;
  if (a.history.size() != b.history.size()) return diff + 1;
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    diff += !(a.history[i].loss == b.history[i].loss) || a.history[i].lr != b.history[i].lr;
  }
  return diff;
}

Outcome determinism_and_resume(const fs::path& scratch) {
  const int saved_threads = thread_count();
  set_thread_count(1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.slices_per_subject = 3;
  cfg.seed = 8;
  const Dataset dataset = generate_phantom_dataset(4, 32, 8);
  const auto first = train<float>(dataset, cfg);
  const auto second = train<float>(dataset, cfg);
  const int rerun_diff = state_differences(first, second);

  TrainOptions partial;
  partial.stop_after_epoch = 1;
  const auto interrupted = train<float>(dataset, cfg, partial);
  save_checkpoint(interrupted, scratch / "resume");
  auto resumed = load_checkpoint<float>(scratch / "resume");
  resume_training(resumed, dataset);
  const int resume_diff = state_differences(first, resumed);
  set_thread_count(saved_threads);
  return {rerun_diff == 0 && resume_diff == 0 && first.epoch == cfg.epochs,
          fmt("single thread: same-seed rerun differs in %d items, resumed-at-epoch-1 run "
              "differs from uninterrupted in %d items",
              rerun_diff, resume_diff)};
}

// ---------------------------------------------------------------------------
// A9

Outcome overfit_sanity() {
  const Volume v = prepare_volume(generate_phantom(3, 64), 64);
  const auto pair = sample_training_pair(v, 32, 10);
  const std::clock_t start = std::clock();
  const auto history = overfit_pair<float>(pair, TrainConfig{}, 200);
  const double cpu = cpu_seconds_since(start);
  int reached = -1;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].total < -0.9) {
      reached = static_cast<int>(i) + 1;
      break;
    }
  }
  return {reached > 0 && reached <= 200 && cpu < 60.0,
          fmt("L_total < -0.9 at step %d of 200 (final %.4f); cpu %.1fs < 60s", reached,
              history.empty() ? NAN : history.back().total, cpu)};
}

// ---------------------------------------------------------------------------
// A10

std::vector<unsigned char> leading_bytes(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> bytes(count);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(count));
  bytes.resize(static_cast<std::size_t>(in.gcount()));
  return bytes;
}

Outcome nifti_round_trip(const fs::path& scratch) {
  Rng rng(10);
  Volume v({13, 7, 5}, {0.75, 1.25, 2.5});
  for (auto& x : v.intensities) x = static_cast<float>(rng.uniform(-1000, 1000));
  v.intensities[0] = 0.0f;
  v.intensities[1] = -0.0f;
  v.intensities[2] = 1e-30f;
  std::vector<std::uint8_t> mask(v.intensities.size());
  for (auto& m : mask) m = static_cast<std::uint8_t>(rng.below(2));
  v.mask = mask;

  int failures = 0, variants = 0;
  std::string notes;
  for (const bool gz : {false, true}) {
    for (const bool swap : {false, true}) {
      ++variants;
      const std::string stem = std::string(swap ? "swapped" : "native");
      const std::string ext = gz ? ".nii.gz" : ".nii";
      const fs::path image = scratch / (stem + ext), label = scratch / (stem + "_mask" + ext);
      nifti::WriteOptions options;
      options.swap_bytes = swap;
      nifti::write_nifti(v, image, options);
      nifti::write_nifti_mask(v, label, options);

      const auto head = leading_bytes(image, 4);
      bool fixture_ok = head.size() == 4;
      if (fixture_ok && gz) fixture_ok = head[0] == 0x1f && head[1] == 0x8b;
      if (fixture_ok && !gz) {
        // sizeof_hdr = 348 = 0x15C in the byte order the file claims.
        const bool little = head[0] == 0x5C && head[1] == 0x01 && !head[2] && !head[3];
        const bool big = !head[0] && !head[1] && head[2] == 0x01 && head[3] == 0x5C;
        const bool host_little = std::endian::native == std::endian::little;
        fixture_ok = swap ? (host_little ? big : little) : (host_little ? little : big);
      }

      const Volume back = nifti::read_nifti(image);
      const auto back_mask = nifti::read_nifti_mask(label, v.extents);
      const bool same = back.extents == v.extents && back.spacing == v.spacing &&
                        back.intensities.size() == v.intensities.size() &&
                        std::memcmp(back.intensities.data(), v.intensities.data(),
                                    v.intensities.size() * sizeof(float)) == 0 &&
                        back_mask == mask;
      if (!same || !fixture_ok) {
        ++failures;
        notes += " " + stem + ext;
      }
    }
  }
  return {failures == 0,
          fmt("%d variants (plain/gzip x native/opposite byte order): intensities, masks, "
              "extents, spacing identical; %d failed%s",
              variants, failures, notes.c_str())};
}

struct Criterion {
  std::string id;
  std::string title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  configure_threads_from_env();
  ScratchDir scratch;
  const std::vector<Criterion> criteria = {
      {"A1", "gradient fidelity", gradient_fidelity},
      {"A2", "phantom cross-validation", phantom_crossval},
      {"A3", "phantom transfer", phantom_transfer},
      {"A4", "loss identities", loss_identities},
      {"A5", "metric oracle", metric_oracle},
      {"A6", "context-scaling contract", context_contract},
      {"A7", "shape/protocol conformance", shape_protocol},
      {"A8", "determinism and resume", [&] { return determinism_and_resume(scratch.path()); }},
      {"A9", "overfit sanity", overfit_sanity},
      {"A10", "NIfTI round trip", [&] { return nifti_round_trip(scratch.path()); }},
  };
  std::set<std::string> selected(argv + 1, argv + argc);
  for (const auto& id : selected) {
    if (std::none_of(criteria.begin(), criteria.end(),
                     [&](const Criterion& c) { return c.id == id; })) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
  }

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    ++ran;
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    failed += !outcome.passed;
    std::printf("%-3s %s  %s: %s\n", c.id.c_str(), outcome.passed ? "PASS" : "FAIL",
                c.title.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}

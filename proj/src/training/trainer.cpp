#include "contextstrip/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "contextstrip/core/error.hpp"
#include "contextstrip/data/normalize.hpp"
#include "contextstrip/evaluation/metrics.hpp"
#include "contextstrip/evaluation/predict.hpp"
#include "contextstrip/network/model.hpp"
#include "contextstrip/training/optimizer.hpp"

namespace cstrip {

namespace {

constexpr std::uint64_t kEpochStreamTag = 0x6570000000ULL;
constexpr std::uint64_t kOverfitStreamTag = 0x6f76000000ULL;

std::vector<Volume> prepare_subjects(const Dataset& dataset, const TrainConfig& cfg) {
  if (dataset.subjects.empty()) throw ValueError("train: the dataset has no subjects");
  std::vector<Volume> prepared;
  prepared.reserve(dataset.subjects.size());
  for (const auto& v : dataset.subjects) {
    if (!v.mask) throw ValueError("train: subject '" + v.subject_id + "' has no mask");
    prepared.push_back(prepare_volume(v, cfg.arch.input_hw));
  }
  return prepared;
}

std::int64_t slices_drawn(std::int64_t coronal, const TrainConfig& cfg) {
  if (cfg.slices_per_subject == 0) return coronal;
  return std::min<std::int64_t>(coronal, cfg.slices_per_subject);
}

struct SliceRef {
  std::size_t subject;
  std::int64_t index;
};

std::vector<SliceRef> epoch_schedule(const std::vector<Volume>& subjects, const TrainConfig& cfg,
                                     Rng& rng) {
  std::vector<std::size_t> order(subjects.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<SliceRef> refs;
  for (std::size_t s : order) {
    const std::int64_t count = subjects[s].coronal_count();
    std::vector<std::int64_t> idx(static_cast<std::size_t>(count));
    std::iota(idx.begin(), idx.end(), std::int64_t{0});
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(slices_drawn(count, cfg)));
    for (auto i : idx) refs.push_back({s, i});
  }
  rng.shuffle(refs);
  return refs;
}

template <typename Dtype>
Tensor<Dtype> boundary_weights(std::span<const SamplePair> pairs, const loss::LossConfig& cfg) {
  const auto H = pairs.front().height, W = pairs.front().width;
  const auto plane = static_cast<std::size_t>(H * W);
  std::vector<Dtype> values;
  values.reserve(pairs.size() * plane);
  for (const auto& p : pairs) {
    for (double w : loss::boundary_weight_map(p.mask_slice, H, W, cfg.boundary_w0,
                                              cfg.boundary_sigma)) {
      values.push_back(static_cast<Dtype>(w));
    }
  }
  return Tensor<Dtype>({static_cast<std::int64_t>(pairs.size()), H, W}, std::move(values));
}

template <typename Dtype>
std::optional<double> validation_dice(const ModelParams<Dtype>& params, const ArchConfig& arch,
                                      const Dataset& validation) {
  double sum = 0.0;
  int count = 0;
  for (const auto& v : validation.subjects) {
    if (!v.mask) continue;
    const Volume pred = predict_volume(params, arch, v);
    if (auto d = dice_score(confusion(*pred.mask, *v.mask))) {
      sum += *d;
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

void append_log(const std::filesystem::path& path, const EpochRecord& record) {
  std::ofstream os(path, std::ios::app);
  if (!os) throw IoError("cannot append to '" + path.string() + "'");
  os << nlohmann::json(record).dump() << '\n';
}

}  // namespace

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch},
                     {"lr", r.lr},
                     {"ce", r.loss.ce},
                     {"dice", r.loss.dice},
                     {"sec", r.loss.sec},
                     {"total", r.loss.total},
                     {"val_dice", r.val_dice ? nlohmann::json(*r.val_dice) : nlohmann::json()},
                     {"wall_time", r.wall_time}};
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  j.at("epoch").get_to(r.epoch);
  j.at("lr").get_to(r.lr);
  j.at("ce").get_to(r.loss.ce);
  j.at("dice").get_to(r.loss.dice);
  j.at("sec").get_to(r.loss.sec);
  j.at("total").get_to(r.loss.total);
  const auto& v = j.at("val_dice");
  r.val_dice = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  j.at("wall_time").get_to(r.wall_time);
}

template <typename Dtype>
TrainState<Dtype> init_train_state(const TrainConfig& cfg, std::int64_t total_steps) {
  cfg.validate();
  if (total_steps < 1) throw ValueError("init_train_state: total steps must be positive");
  TrainState<Dtype> state;
  state.cfg = cfg;
  state.params = net::init_params<Dtype>(cfg.arch, cfg.seed);
  state.velocity = make_velocity(state.params);
  state.total_steps = total_steps;
  state.rng_state = Rng(cfg.seed).state();
  return state;
}

std::int64_t pairs_per_epoch(const Dataset& dataset, const TrainConfig& cfg) {
  std::int64_t total = 0;
  for (const auto& v : dataset.subjects) total += slices_drawn(v.coronal_count(), cfg);
  return total;
}

std::int64_t steps_per_epoch(const Dataset& dataset, const TrainConfig& cfg) {
  const std::int64_t pairs = pairs_per_epoch(dataset, cfg);
  return (pairs + cfg.batch_size - 1) / cfg.batch_size;
}

template <typename Dtype>
loss::LossBreakdown train_step(TrainState<Dtype>& state, const Batch<Dtype>& batch,
                               std::span<const SamplePair> pairs, double lr, Rng& rng) {
  const TrainConfig& cfg = state.cfg;
  Graph<Dtype> g;
  net::ForwardOptions opts{ops::Mode::Train, cfg.dropout, &rng};
  const auto out = net::model_forward(g, batch.slice, batch.subvol, state.params, cfg.arch, opts);
  Tensor<Dtype> weights;
  if (cfg.loss.boundary_w0 > 0.0) weights = boundary_weights<Dtype>(pairs, cfg.loss);
  const auto ce = loss::cross_entropy(g, out.pixel_probs, batch.target, weights);
  const auto dl = loss::dice(g, out.pixel_probs, batch.target);
  const auto sl = loss::sec(g, out.class_probs, batch.y);
  const auto terms = loss::total_loss(g, ce, dl, sl, cfg.loss.lambda);
  const auto breakdown = terms.breakdown();
  if (!std::isfinite(breakdown.total)) {
    throw NumericError("non-finite loss at step " + std::to_string(state.step));
  }
  g.backward(terms.total);
  sgd_step(state.params, state.velocity, lr, SgdOptions{cfg.momentum, cfg.weight_decay});
  ++state.step;
  return breakdown;
}

template <typename Dtype>
void resume_training(TrainState<Dtype>& state, const Dataset& dataset,
                     const TrainOptions& options) {
  const TrainConfig& cfg = state.cfg;
  cfg.validate();
  const auto subjects = prepare_subjects(dataset, cfg);
  const int last_epoch = options.stop_after_epoch > 0
                             ? std::min(options.stop_after_epoch, cfg.epochs)
                             : cfg.epochs;
  const auto start = std::chrono::steady_clock::now();
  const double elapsed_before = state.history.empty() ? 0.0 : state.history.back().wall_time;

  while (state.epoch < last_epoch) {
    const int epoch = state.epoch;
    Rng rng(Rng::derive(cfg.seed, kEpochStreamTag + static_cast<std::uint64_t>(epoch)));
    const auto refs = epoch_schedule(subjects, cfg, rng);
    loss::LossBreakdown sum;
    std::int64_t steps = 0;
    double lr = 0.0;
    for (std::size_t first = 0; first < refs.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t last = std::min(refs.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<SamplePair> pairs;
      for (std::size_t i = first; i < last; ++i) {
        pairs.push_back(sample_training_pair(subjects[refs[i].subject], refs[i].index,
                                             cfg.arch.depth, cfg.arch.classes));
      }
      const auto batch = make_batch<Dtype>(pairs, cfg.arch.classes);
      if (state.step >= state.total_steps) {
        throw ValueError("train: step budget of " + std::to_string(state.total_steps) +
                         " exhausted; the dataset does not match the state");
      }
      lr = poly_lr(state.step, state.total_steps, cfg.lr0, cfg.poly_power);
      loss::LossBreakdown b;
      try {
        b = train_step(state, batch, pairs, lr, rng);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      sum.ce += b.ce;
      sum.dice += b.dice;
      sum.sec += b.sec;
      sum.total += b.total;
      ++steps;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    const double n = static_cast<double>(std::max<std::int64_t>(steps, 1));
    record.loss = {sum.ce / n, sum.dice / n, sum.sec / n, sum.total / n};
    if (options.validation) {
      record.val_dice = validation_dice(state.params, cfg.arch, *options.validation);
    }
    record.wall_time =
        elapsed_before +
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    state.rng_state = rng.state();
    state.epoch = epoch + 1;
    state.history.push_back(record);
    if (options.log_path) append_log(*options.log_path, record);
    if (options.on_epoch) options.on_epoch(record);
  }
}

template <typename Dtype>
TrainState<Dtype> train(const Dataset& dataset, const TrainConfig& cfg,
                        const TrainOptions& options) {
  cfg.validate();
  if (dataset.subjects.empty()) throw ValueError("train: the dataset has no subjects");
  auto state = init_train_state<Dtype>(
      cfg, steps_per_epoch(dataset, cfg) * static_cast<std::int64_t>(cfg.epochs));
  state.dataset_name = dataset.name;
  resume_training(state, dataset, options);
  return state;
}

template <typename Dtype>
std::vector<loss::LossBreakdown> overfit_pair(const SamplePair& pair, const TrainConfig& cfg,
                                              int steps) {
  if (steps < 1) throw ValueError("overfit_pair: steps must be positive");
  if (pair.mask_slice.empty()) throw ValueError("overfit_pair: the pair has no labels");
  auto state = init_train_state<Dtype>(cfg, steps);
  Rng rng(Rng::derive(cfg.seed, kOverfitStreamTag));
  const std::vector<SamplePair> pairs{pair};
  const auto batch = make_batch<Dtype>(pairs, cfg.arch.classes);
  std::vector<loss::LossBreakdown> history;
  for (int t = 0; t < steps; ++t) {
    const double lr = poly_lr(t, steps, cfg.lr0, cfg.poly_power);
    history.push_back(train_step(state, batch, pairs, lr, rng));
  }
  return history;
}

#define CSTRIP_INSTANTIATE(T)                                                                    \
  template TrainState<T> init_train_state<T>(const TrainConfig&, std::int64_t);                 \
  template loss::LossBreakdown train_step(TrainState<T>&, const Batch<T>&,                      \
                                          std::span<const SamplePair>, double, Rng&);           \
  template void resume_training(TrainState<T>&, const Dataset&, const TrainOptions&);           \
  template TrainState<T> train<T>(const Dataset&, const TrainConfig&, const TrainOptions&);     \
  template std::vector<loss::LossBreakdown> overfit_pair<T>(const SamplePair&,                  \
                                                            const TrainConfig&, int);
CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)
#undef CSTRIP_INSTANTIATE

}  // namespace cstrip

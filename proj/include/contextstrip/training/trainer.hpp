#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "contextstrip/core/rng.hpp"
#include "contextstrip/data/dataset.hpp"
#include "contextstrip/data/sampling.hpp"
#include "contextstrip/losses/losses.hpp"
#include "contextstrip/network/model_params.hpp"
#include "contextstrip/training/train_config.hpp"

namespace cstrip {

struct EpochRecord {
  int epoch = 0;
  /// Learning rate of the epoch's last step.
  double lr = 0.0;
  /// Mean over the epoch's steps.
  loss::LossBreakdown loss;
  /// Mean per-subject Dice on the validation set, when one was given.
  std::optional<double> val_dice;
  double wall_time = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

template <typename Dtype>
struct TrainState {
  TrainConfig cfg;
  ModelParams<Dtype> params;
  /// Momentum buffers of the trainable entries, in entry order.
  std::vector<Tensor<Dtype>> velocity;
  std::int64_t step = 0;
  std::int64_t total_steps = 0;
  /// Completed epochs.
  int epoch = 0;
  /// Generator state at the end of the last completed epoch.
  Rng::State rng_state{};
  std::vector<EpochRecord> history;
  /// Name of the dataset the model was trained on.
  std::string dataset_name;
};

struct TrainOptions {
  /// Scored with predict_volume after every epoch.
  const Dataset* validation = nullptr;
  /// One JSON record per epoch is appended here.
  std::optional<std::filesystem::path> log_path;
  /// Stop once this many epochs are complete (0: run to cfg.epochs).
  int stop_after_epoch = 0;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Fresh state: initialized parameters (seeded by cfg.seed), zero momentum,
/// step 0 of `total_steps`.
template <typename Dtype>
TrainState<Dtype> init_train_state(const TrainConfig& cfg, std::int64_t total_steps);

/// Pairs per epoch for a dataset under cfg; fixed across epochs.
std::int64_t pairs_per_epoch(const Dataset& dataset, const TrainConfig& cfg);
std::int64_t steps_per_epoch(const Dataset& dataset, const TrainConfig& cfg);

/// One forward/backward/update on a batch in train mode at rate lr.
/// Throws NumericError if the loss is not finite.
template <typename Dtype>
loss::LossBreakdown train_step(TrainState<Dtype>& state, const Batch<Dtype>& batch,
                               std::span<const SamplePair> pairs, double lr, Rng& rng);

/// Seeded epoch loop from scratch. Every epoch draws its subject order,
/// slices and dropout masks from a generator derived from (seed, epoch), so
/// a run resumed from an epoch-boundary checkpoint replays the same steps.
template <typename Dtype>
TrainState<Dtype> train(const Dataset& dataset, const TrainConfig& cfg,
                        const TrainOptions& options = {});

/// Continues `state` until cfg.epochs (or options.stop_after_epoch).
template <typename Dtype>
void resume_training(TrainState<Dtype>& state, const Dataset& dataset,
                     const TrainOptions& options = {});

/// Repeats a single pair for `steps` updates on the poly schedule and returns
/// the loss of every step.
template <typename Dtype>
std::vector<loss::LossBreakdown> overfit_pair(const SamplePair& pair, const TrainConfig& cfg,
                                              int steps);

}  // namespace cstrip

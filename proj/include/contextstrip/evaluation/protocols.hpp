#pragma once

#include <functional>
#include <string>

#include "contextstrip/data/dataset.hpp"
#include "contextstrip/data/folds.hpp"
#include "contextstrip/evaluation/predict.hpp"
#include "contextstrip/evaluation/report.hpp"
#include "contextstrip/training/trainer.hpp"

namespace cstrip {

template <typename Dtype>
struct CrossvalHooks {
  /// Called with every fold's trained state before its subjects are scored.
  std::function<void(int fold, const TrainState<Dtype>&)> on_fold_model;
  /// Called with every finished epoch of every fold.
  std::function<void(int fold, const EpochRecord&)> on_epoch;
};

/// Scores every labelled subject of `dataset` with one model.
template <typename Dtype>
std::vector<SubjectScore> score_dataset(const ModelParams<Dtype>& params, const ArchConfig& arch,
                                        const Dataset& dataset, int fold = -1,
                                        const PredictOptions& options = {});

/// For each fold: trains on the other folds, then predicts and scores the
/// held-out subjects. Throws ValueError if a fold has no test subjects or no
/// training subjects, or if the plan does not cover the dataset.
template <typename Dtype>
MetricsReport evaluate_crossval(const Dataset& dataset, const FoldPlan& plan,
                                const TrainConfig& cfg, const PredictOptions& options = {},
                                const CrossvalHooks<Dtype>& hooks = {});

/// Scores every target subject with a fixed model; tagged
/// "transfer <source>-><target>".
template <typename Dtype>
MetricsReport evaluate_transfer(const ModelParams<Dtype>& params, const ArchConfig& arch,
                                const Dataset& target, const std::string& source_name,
                                std::uint64_t seed = 0, const PredictOptions& options = {});

}  // namespace cstrip

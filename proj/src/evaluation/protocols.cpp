#include "contextstrip/evaluation/protocols.hpp"

#include <algorithm>

#include "contextstrip/core/error.hpp"

namespace cstrip {

template <typename Dtype>
std::vector<SubjectScore> score_dataset(const ModelParams<Dtype>& params, const ArchConfig& arch,
                                        const Dataset& dataset, int fold,
                                        const PredictOptions& options) {
  std::vector<SubjectScore> scores;
  for (const auto& v : dataset.subjects) {
    if (!v.mask) throw ValueError("subject '" + v.subject_id + "' has no reference mask");
    const Volume pred = predict_volume(params, arch, v, options);
    scores.push_back(score_subject(v.subject_id, fold, *pred.mask, *v.mask));
  }
  return scores;
}

template <typename Dtype>
MetricsReport evaluate_crossval(const Dataset& dataset, const FoldPlan& plan,
                                const TrainConfig& cfg, const PredictOptions& options,
                                const CrossvalHooks<Dtype>& hooks) {
  cfg.validate();
  auto planned = plan.members(0);
  for (int f = 1; f < plan.k; ++f) {
    const auto m = plan.members(f);
    planned.insert(planned.end(), m.begin(), m.end());
  }
  auto ids = dataset.ids();
  std::sort(planned.begin(), planned.end());
  std::sort(ids.begin(), ids.end());
  if (planned != ids) throw ValueError("evaluate_crossval: the fold plan does not match the dataset");

  std::vector<SubjectScore> scores;
  for (int f = 0; f < plan.k; ++f) {
    const auto test_ids = plan.members(f);
    const auto train_ids = plan.complement(f);
    if (test_ids.empty()) throw ValueError("fold " + std::to_string(f) + " has no test subjects");
    if (train_ids.empty()) {
      throw ValueError("fold " + std::to_string(f) + " leaves no subjects for training");
    }
    TrainOptions topts;
    if (hooks.on_epoch) topts.on_epoch = [&](const EpochRecord& r) { hooks.on_epoch(f, r); };
    const auto state = train<Dtype>(dataset.subset(train_ids), cfg, topts);
    if (hooks.on_fold_model) hooks.on_fold_model(f, state);
    auto fold_scores = score_dataset(state.params, cfg.arch, dataset.subset(test_ids), f, options);
    scores.insert(scores.end(), fold_scores.begin(), fold_scores.end());
  }
  return make_report(crossval_tag(plan.k), dataset.name, cfg.seed, std::move(scores), plan.k);
}

template <typename Dtype>
MetricsReport evaluate_transfer(const ModelParams<Dtype>& params, const ArchConfig& arch,
                                const Dataset& target, const std::string& source_name,
                                std::uint64_t seed, const PredictOptions& options) {
  return make_report(transfer_tag(source_name, target.name), target.name, seed,
                     score_dataset(params, arch, target, -1, options));
}

#define CSTRIP_INSTANTIATE(T)                                                                   \
  template std::vector<SubjectScore> score_dataset(const ModelParams<T>&, const ArchConfig&,   \
                                                   const Dataset&, int, const PredictOptions&); \
  template MetricsReport evaluate_crossval<T>(const Dataset&, const FoldPlan&,                 \
                                              const TrainConfig&, const PredictOptions&,       \
                                              const CrossvalHooks<T>&);                        \
  template MetricsReport evaluate_transfer(const ModelParams<T>&, const ArchConfig&,           \
                                           const Dataset&, const std::string&, std::uint64_t,  \
                                           const PredictOptions&);
CSTRIP_INSTANTIATE(float)
CSTRIP_INSTANTIATE(double)
#undef CSTRIP_INSTANTIATE

}  // namespace cstrip

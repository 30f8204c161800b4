#include "smartedge/pipeline.hpp"

#include "smartedge/error.hpp"

namespace smartedge {

LabeledRows PreparedData::rows(std::span<const std::size_t> idx) const {
  return {scaled.select_rows(idx), select_labels(labels, idx)};
}

TrainingData PreparedData::training_data() const {
  return {rows(split.train_idx), rows(split.val_idx)};
}

PreparedData prepare_data(const Dataset& raw, const PipelineOptions& options) {
  PreparedData out;
  out.dataset = drop_missing(raw, options.drop_columns);
  out.split = split(out.dataset, options.ratios, options.seed);
  const FeatureMatrix features = out.dataset.features();
  out.labels = out.dataset.labels();
  out.scaler = fit_scaler(features, out.split.train_idx);
  out.mask = rfe(features, out.labels, out.split.train_idx, options.rfe_k, options.seed);
  out.scaled = out.mask.apply(apply_scaler(out.scaler, features));
  return out;
}

EvalReport evaluate_ensemble(const Ensemble& e, const LabeledRows& rows) {
  std::vector<Prediction> preds;
  preds.reserve(rows.x.rows());
  for (std::size_t r = 0; r < rows.x.rows(); ++r) preds.push_back(ensemble_predict(e, rows.x.row(r)));
  return evaluate(preds, rows.y);
}

EvalReport evaluate_model(const TrainedModel& m, const LabeledRows& rows) {
  return evaluate(predict_all(m, rows.x), rows.y);
}

PipelineResult run_training_pipeline(const Dataset& raw, const PipelineOptions& options) {
  options.hp.validate();
  if (options.combo.size() < 2) {
    throw Error(ErrorCode::EmptyMemberList, "a voting ensemble needs at least 2 members");
  }
  const PreparedData data = prepare_data(raw, options);
  const TrainingData training = data.training_data();

  PipelineResult result;
  auto& bundle = result.bundle;
  bundle.ensemble = options.whole_data
                        ? train_whole(options.combo, training, options.hp, options.seed, options.mode)
                        : train_sharded(options.combo, training, options.hp, options.seed, options.mode);
  bundle.scaler = data.scaler;
  bundle.mask = data.mask;
  bundle.seed = options.seed;
  bundle.sharded = !options.whole_data;
  bundle.data_digest = raw.source_digest;

  result.train = evaluate_ensemble(bundle.ensemble, training.train);
  result.validation = evaluate_ensemble(bundle.ensemble, training.validation);
  result.test = evaluate_ensemble(bundle.ensemble, data.rows(data.split.test_idx));
  const auto all = evaluate_ensemble(bundle.ensemble, {data.scaled, data.labels});
  bundle.input_accuracy = all.accuracy;
  bundle.input_rows = data.dataset.size();
  return result;
}

}  // namespace smartedge

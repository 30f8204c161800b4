#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smartedge/dataset.hpp"
#include "smartedge/ensemble.hpp"
#include "smartedge/models.hpp"

namespace smartedge {

struct PipelineOptions {
  std::vector<Algorithm> combo;
  VotingMode mode = VotingMode::Hard;
  bool whole_data = false;
  std::size_t rfe_k = kFeatureCount;
  std::uint64_t seed = 0;
  Hyperparams hp;
  SplitRatios ratios;
  std::vector<std::string> drop_columns = default_missing_columns();
};

// Preprocessed rows, split and fitted transforms, ready for training.
struct PreparedData {
  Dataset dataset;  // after drop_missing
  SplitDataset split;
  Scaler scaler;    // fit on training rows only
  FeatureMask mask;
  FeatureMatrix scaled;  // every record, scaled and masked
  Labels labels;

  TrainingData training_data() const;
  LabeledRows rows(std::span<const std::size_t> idx) const;
};

PreparedData prepare_data(const Dataset& raw, const PipelineOptions& options);

struct PipelineResult {
  ModelBundle bundle;
  EvalReport train;
  EvalReport validation;
  EvalReport test;
};

// drop_missing -> split -> scale -> optional RFE -> sharded or whole-data
// ensemble, evaluated on each split.
PipelineResult run_training_pipeline(const Dataset& raw, const PipelineOptions& options);

EvalReport evaluate_ensemble(const Ensemble& e, const LabeledRows& rows);
EvalReport evaluate_model(const TrainedModel& m, const LabeledRows& rows);

}  // namespace smartedge

#pragma once

#include "json.hpp"

#include "smartedge/dataset.hpp"
#include "smartedge/error.hpp"
#include "smartedge/ensemble.hpp"
#include "smartedge/models.hpp"

namespace smartedge::detail {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const TrainedModel& m);
TrainedModel model_from_json(const nlohmann::json& j);

nlohmann::json ensemble_to_json(const Ensemble& e);
Ensemble ensemble_from_json(const nlohmann::json& j);

nlohmann::json scaler_to_json(const Scaler& s);
Scaler scaler_from_json(const nlohmann::json& j);

nlohmann::json mask_to_json(const FeatureMask& m);
FeatureMask mask_from_json(const nlohmann::json& j);

nlohmann::json hyperparams_to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

nlohmann::json prediction_to_json(const Prediction& p);
Prediction prediction_from_json(const nlohmann::json& j);

nlohmann::json parse_json(std::string_view text, ErrorCode on_error);

}  // namespace smartedge::detail

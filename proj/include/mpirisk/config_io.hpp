#pragma once

#include "mpirisk/explain.hpp"
#include "mpirisk/features.hpp"
#include "mpirisk/forecast.hpp"
#include "mpirisk/gbdt.hpp"
#include "mpirisk/ingest.hpp"
#include "mpirisk/mpi_index.hpp"

#include <json.hpp>

#include <span>
#include <string>
#include <string_view>

namespace mpirisk {

using Json = nlohmann::ordered_json;

// Every from_json accepts partial documents: absent keys keep their defaults.
// Unknown keys and wrongly typed values throw Error(schema).

Json mpi_config_to_json(const MpiConfig& c);
MpiConfig mpi_config_from_json(const nlohmann::json& j, MpiConfig base = {});

Json feature_spec_to_json(const FeatureSpec& s);
FeatureSpec feature_spec_from_json(const nlohmann::json& j);

Json scaler_to_json(const ScalerParams& p);
ScalerParams scaler_from_json(const nlohmann::json& j);

Json train_params_to_json(const TrainParams& p);
TrainParams train_params_from_json(const nlohmann::json& j, TrainParams base = {});

Json forecast_config_to_json(const ForecastConfig& c);
ForecastConfig forecast_config_from_json(const nlohmann::json& j, ForecastConfig base = {});

Json env_record_to_json(const EnvRecord& r);
/// Requires date and the five variables.
EnvRecord env_record_from_json(const nlohmann::json& j);

/// {date, mpi, label, triggers: {aod_high: {fired, value}, ...}}
/// Ranked array of {rank, name, mean_abs_phi}.
Json importance_to_json(const GlobalImportance& g);
GlobalImportance importance_from_json(const nlohmann::json& ranked);

Json score_to_json(const MpiScore& s);
std::string scores_json(std::span<const MpiScore> scores);

/// Parses text as JSON, mapping parse failures to Error(schema).
nlohmann::json parse_json(std::string_view text, std::string_view what);

}  // namespace mpirisk

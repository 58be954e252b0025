#pragma once

// JSON views of the run configuration, metrics, and run manifest. The
// manifest JSON is byte-stable for fixed (config, seed, data); wall-clock
// values are confined to the "timings" object.

#include "json.hpp"
#include "kaconv/train.hpp"

namespace kaconv {

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json metrics_to_json(const MetricsReport& report);
nlohmann::json param_report_to_json(const ParamReport& report);
nlohmann::json manifest_to_json(const RunManifest& manifest);

}  // namespace kaconv

#pragma once

#include <json.hpp>

#include "mvt/config.hpp"

namespace mvt {

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace mvt

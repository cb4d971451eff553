#pragma once

#include <json.hpp>

#include "metalink/harness/config.hpp"

namespace metalink::harness {

// Typed JSON object with one member per config key.
nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace metalink::harness

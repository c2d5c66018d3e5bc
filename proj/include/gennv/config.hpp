// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include "gennv/baselines.hpp"
#include "gennv/cdgm.hpp"
#include "gennv/harness.hpp"
#include "gennv/ingest.hpp"

namespace gennv {

// JSON conversions. The readers overlay keys onto an existing value, so a
// config file only needs the keys it changes. Unknown keys and wrongly typed
// values throw Error(config).

nlohmann::json to_json(const TrainConfig& c);
void apply_json(const nlohmann::json& j, TrainConfig& c);

nlohmann::json to_json(const ErmConfig& c);
void apply_json(const nlohmann::json& j, ErmConfig& c);

nlohmann::json to_json(const CostParams& c);
void apply_json(const nlohmann::json& j, CostParams& c);

nlohmann::json to_json(const ExperimentConfig& c);
void apply_json(const nlohmann::json& j, ExperimentConfig& c);

nlohmann::json to_json(const RealDataConfig& c);
void apply_json(const nlohmann::json& j, RealDataConfig& c);

}  // namespace gennv

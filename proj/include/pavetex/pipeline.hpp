#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "pavetex/correct.hpp"
#include "pavetex/denoise.hpp"
#include "pavetex/features.hpp"
#include "pavetex/regress.hpp"

namespace pavetex {

// Every knob of the map-to-prediction chain in one serializable record.
struct PipelineConfig {
    FilterConfig filter;
    std::string correction = "plane";  // "plane" or "surface" (cubic)
    RansacConfig ransac;
    FeatureConfig features;
    ModelSpec model;
    std::uint64_t seed = 0;
};

// normalize -> adaptive filter -> trend fit -> subtract -> re-normalize,
// with every intermediate kept for inspection.
struct ConditionedMap {
    NoiseModel noise;      // estimated on the normalized map
    DepthMap normalized;
    DepthMap filtered;
    DepthMap corrected;    // trend removed, arbitrary offset
    DepthMap conditioned;  // re-normalized to [0, 1]
};

ConditionedMap condition_map(const DepthMap& map, const PipelineConfig& cfg);
FeatureVector run_feature_pipeline(const DepthMap& map, const PipelineConfig& cfg);

nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

}  // namespace pavetex

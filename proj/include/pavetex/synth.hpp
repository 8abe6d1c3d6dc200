#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pavetex/correct.hpp"
#include "pavetex/grid.hpp"
#include "pavetex/pipeline.hpp"
#include "pavetex/regress.hpp"

namespace pavetex {

// Recipe for one synthetic texture: raised circular aggregates (convex, at
// the smaller depth value) on a deep background (concave), plus an optional
// plane tilt and Gaussian sensor noise.
struct SynthSpec {
    int width = 512;
    int height = 512;
    int n_particles = 20;
    double radius_min = 8.0;
    double radius_max = 16.0;
    double tilt_a = 0.0;  // depth units per pixel in x
    double tilt_b = 0.0;  // depth units per pixel in y
    double noise_sigma = 0.0;
    double concave_depth = 1.0;  // background level
    double convex_depth = 0.0;   // particle tops; must be below concave_depth
    double unit_factor = 1.0;    // depth units to mm (synthetic calibration)
    std::uint64_t seed = 0;
};

struct PlantedCircle {
    double cx = 0.0, cy = 0.0, r = 0.0;
};

struct GroundTruth {
    DepthMap clean_map;  // the two depth levels only: no tilt, no noise
    PlaneModel plane;
    std::vector<PlantedCircle> circles;
    double concave_fraction = 0.0;  // pixel-counted background share
    double unit_factor = 1.0;
    double oracle_mtd = 0.0;
};

std::pair<DepthMap, GroundTruth> generate_texture(const SynthSpec& spec);

// Sand-patch analogue on the clean map: fill to the 99.5th-percentile depth
// and average the per-pixel deficit, scaled to mm by the unit factor.
double oracle_mtd(const GroundTruth& truth);

struct SynthFamily {
    std::string name;  // stratum label
    SynthSpec spec;
};

// Sample i draws from family[i % size] with per-sample seed mix_seed(seed, i);
// ids are "<family>-<index within family>". Each texture runs through the
// full feature pipeline and is labeled with its oracle MTD. The optional out
// parameters collect the per-sample ground truths and raw (noisy) maps.
Dataset generate_dataset(int n_samples, const std::vector<SynthFamily>& family,
                         std::uint64_t seed, const PipelineConfig& pipeline = {},
                         std::vector<GroundTruth>* truths = nullptr,
                         std::vector<DepthMap>* maps = nullptr);

nlohmann::json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
// Sidecar record: plants and oracle label, without the clean map payload.
nlohmann::json ground_truth_to_json(const GroundTruth& truth);

}  // namespace pavetex

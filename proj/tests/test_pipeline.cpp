#include <doctest.h>

#include <cmath>
#include <vector>

#include "pavetex/errors.hpp"
#include "pavetex/pipeline.hpp"
#include "pavetex/rng.hpp"
#include "pavetex/synth.hpp"

using namespace pavetex;

namespace {

SynthSpec scene_spec() {
    SynthSpec spec;
    spec.width = 256;
    spec.height = 256;
    spec.n_particles = 9;
    spec.radius_min = 12.0;
    spec.radius_max = 20.0;
    spec.tilt_a = 0.0008;
    spec.tilt_b = -0.0005;
    spec.noise_sigma = 0.005;
    spec.seed = 5;
    return spec;
}

// Spread of the values at pixels that are background in the clean map.
double background_spread(const DepthMap& clean, const DepthMap& map, float level) {
    float lo = 1e30f, hi = -1e30f;
    for (std::size_t i = 0; i < clean.values.size(); ++i) {
        if (clean.values[i] != level) continue;
        lo = std::min(lo, map.values[i]);
        hi = std::max(hi, map.values[i]);
    }
    return static_cast<double>(hi) - static_cast<double>(lo);
}

}  // namespace

TEST_CASE("conditioning flattens a tilted noisy scene") {
    auto spec = scene_spec();
    auto [map, truth] = generate_texture(spec);
    PipelineConfig cfg;
    cfg.ransac.iterations = 200;
    auto out = condition_map(map, cfg);

    CHECK(out.normalized.width == map.width);
    CHECK(out.conditioned.width == map.width);
    CHECK(out.conditioned.height == map.height);
    CHECK(out.noise.sigma_eta_sq > 0.0);

    const float bg = static_cast<float>(spec.concave_depth);
    const double before = background_spread(truth.clean_map, out.normalized, bg);
    const double after = background_spread(truth.clean_map, out.corrected, bg);
    CHECK(after < before / 3.0);

    auto again = condition_map(map, cfg);
    CHECK(again.conditioned == out.conditioned);
    CHECK(again.filtered == out.filtered);
}

TEST_CASE("surface mode removes a curved trend") {
    const int n = 128;
    DepthMap map(n, n);
    DepthMap clean(n, n);
    Rng rng(17);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double u = x / static_cast<double>(n) - 0.5;
            const double v = y / static_cast<double>(n) - 0.5;
            const double bowl = 0.5 + 0.3 * 4.0 * (u * u + v * v);
            clean.at(x, y) = static_cast<float>(bowl);
            map.at(x, y) = static_cast<float>(bowl + rng.normal(0.0, 0.003));
        }
    }
    PipelineConfig plane;
    plane.ransac.iterations = 200;
    PipelineConfig surface = plane;
    surface.correction = "surface";

    auto flat = condition_map(map, surface);

    // The normalized map spans [0,1] by construction; the bowl dominates that
    // spread unless the cubic fit soaks it up.
    float lo = 1e30f, hi = -1e30f;
    for (float v : flat.corrected.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(static_cast<double>(hi - lo) < 0.25);

    // No plane gets anywhere near half the points of a bowl this curved.
    CHECK_THROWS_AS(condition_map(map, plane), NoConsensusError);
}

TEST_CASE("features recovered from a synthetic scene match the plants") {
    auto spec = scene_spec();
    auto [map, truth] = generate_texture(spec);
    PipelineConfig cfg;
    cfg.ransac.iterations = 200;
    auto fv = run_feature_pipeline(map, cfg);

    CHECK(std::abs(fv.p - truth.concave_fraction) <= 0.03);
    double rmax = 0.0;
    for (const auto& c : truth.circles) rmax = std::max(rmax, c.r);
    CHECK(std::abs(fv.d - 2.0 * rmax / 256.0) <= 0.02);
    CHECK(fv.k > 0.0);

    auto fv2 = run_feature_pipeline(map, cfg);
    CHECK(fv2.p == fv.p);
    CHECK(fv2.d == fv.d);
    CHECK(fv2.k == fv.k);
}

TEST_CASE("pipeline configs round trip through json") {
    PipelineConfig cfg;
    auto j = pipeline_config_to_json(cfg);
    CHECK(pipeline_config_to_json(pipeline_config_from_json(j)) == j);

    cfg.correction = "surface";
    cfg.filter.window = 7;
    cfg.features.threshold = 0.4;
    cfg.model.kind = ModelKind::kGbt;
    cfg.model.gbt.learning_rate = 0.05;
    cfg.model.rf.bootstrap = false;
    cfg.ransac.seed = 42;
    cfg.seed = 1234;
    j = pipeline_config_to_json(cfg);
    auto back = pipeline_config_from_json(j);
    CHECK(back.correction == "surface");
    CHECK(back.filter.window == 7);
    CHECK(back.features.threshold == 0.4);
    CHECK(back.model.kind == ModelKind::kGbt);
    CHECK(back.model.gbt.learning_rate == 0.05);
    CHECK(back.model.rf.bootstrap == false);
    CHECK(back.ransac.seed == 42);
    CHECK(pipeline_config_to_json(back) == j);

    // partial configs keep defaults for everything absent
    auto partial = pipeline_config_from_json(nlohmann::json{{"correction", "surface"}});
    CHECK(partial.correction == "surface");
    CHECK(partial.filter.window == 5);

    CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json{{"correction", "spline"}}),
                    ConfigError);
    CHECK_THROWS_AS(pipeline_config_from_json(nlohmann::json{{"filter", 3}}), ParseError);
}

TEST_CASE("conditioning rejects a featureless map") {
    DepthMap flat(32, 32, std::vector<float>(32 * 32, 0.5f));
    CHECK_THROWS_AS(condition_map(flat, PipelineConfig{}), ConstantMapError);
    PipelineConfig bad;
    bad.correction = "spline";
    DepthMap some(32, 32);
    some.at(3, 3) = 1.0f;
    CHECK_THROWS_AS(condition_map(some, bad), ConfigError);
}

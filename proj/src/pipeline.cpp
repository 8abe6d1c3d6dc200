#include "pavetex/pipeline.hpp"

#include "pavetex/errors.hpp"

namespace pavetex {

ConditionedMap condition_map(const DepthMap& map, const PipelineConfig& cfg) {
    if (cfg.correction != "plane" && cfg.correction != "surface") {
        throw ConfigError("correction must be 'plane' or 'surface', got '" + cfg.correction + "'");
    }
    ConditionedMap out;
    out.normalized = normalize(map);
    out.noise = estimate_noise_variance(out.normalized);
    out.filtered = adaptive_local_filter(out.normalized, cfg.filter, out.noise);
    if (cfg.correction == "plane") {
        out.corrected = subtract_fit(out.filtered, ransac_plane_fit(out.filtered, cfg.ransac));
    } else {
        out.corrected = subtract_fit(out.filtered, ransac_cubic_fit(out.filtered, cfg.ransac));
    }
    out.conditioned = normalize(out.corrected);
    return out;
}

FeatureVector run_feature_pipeline(const DepthMap& map, const PipelineConfig& cfg) {
    return extract_features(condition_map(map, cfg).conditioned, cfg.features);
}

nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
    return {
        {"filter", {{"window", cfg.filter.window}, {"clamp_ratio", cfg.filter.clamp_ratio}}},
        {"correction", cfg.correction},
        {"ransac",
         {{"iterations", cfg.ransac.iterations},
          {"inlier_threshold", cfg.ransac.inlier_threshold},
          {"min_inlier_fraction", cfg.ransac.min_inlier_fraction},
          {"seed", cfg.ransac.seed}}},
        {"features",
         {{"threshold", cfg.features.threshold},
          {"binarize",
           {{"window", cfg.features.binarize.window}, {"k_bias", cfg.features.binarize.k_bias}}},
          {"watershed",
           {{"min_separation", cfg.features.watershed.min_separation},
            {"marker_rel_threshold", cfg.features.watershed.marker_rel_threshold},
            {"min_area", cfg.features.watershed.min_area}}}}},
        {"model",
         {{"kind", model_kind_name(cfg.model.kind)},
          {"gbt",
           {{"n_estimators", cfg.model.gbt.n_estimators},
            {"max_depth", cfg.model.gbt.max_depth},
            {"learning_rate", cfg.model.gbt.learning_rate},
            {"min_leaf", cfg.model.gbt.min_leaf},
            {"seed", cfg.model.gbt.seed}}},
          {"rf",
           {{"n_estimators", cfg.model.rf.n_estimators},
            {"max_depth", cfg.model.rf.max_depth},
            {"min_leaf", cfg.model.rf.min_leaf},
            {"bootstrap", cfg.model.rf.bootstrap},
            {"seed", cfg.model.rf.seed}}}}},
        {"seed", cfg.seed},
    };
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
    PipelineConfig cfg;
    try {
        if (j.contains("filter")) {
            const auto& f = j.at("filter");
            cfg.filter.window = f.value("window", cfg.filter.window);
            cfg.filter.clamp_ratio = f.value("clamp_ratio", cfg.filter.clamp_ratio);
        }
        cfg.correction = j.value("correction", cfg.correction);
        if (j.contains("ransac")) {
            const auto& r = j.at("ransac");
            cfg.ransac.iterations = r.value("iterations", cfg.ransac.iterations);
            cfg.ransac.inlier_threshold = r.value("inlier_threshold", cfg.ransac.inlier_threshold);
            cfg.ransac.min_inlier_fraction =
                r.value("min_inlier_fraction", cfg.ransac.min_inlier_fraction);
            cfg.ransac.seed = r.value("seed", cfg.ransac.seed);
        }
        if (j.contains("features")) {
            const auto& f = j.at("features");
            cfg.features.threshold = f.value("threshold", cfg.features.threshold);
            if (f.contains("binarize")) {
                const auto& b = f.at("binarize");
                cfg.features.binarize.window = b.value("window", cfg.features.binarize.window);
                cfg.features.binarize.k_bias = b.value("k_bias", cfg.features.binarize.k_bias);
            }
            if (f.contains("watershed")) {
                const auto& w = f.at("watershed");
                cfg.features.watershed.min_separation =
                    w.value("min_separation", cfg.features.watershed.min_separation);
                cfg.features.watershed.marker_rel_threshold =
                    w.value("marker_rel_threshold", cfg.features.watershed.marker_rel_threshold);
                cfg.features.watershed.min_area =
                    w.value("min_area", cfg.features.watershed.min_area);
            }
        }
        if (j.contains("model")) {
            const auto& m = j.at("model");
            cfg.model.kind = model_kind_from_name(m.value("kind", model_kind_name(cfg.model.kind)));
            if (m.contains("gbt")) {
                const auto& g = m.at("gbt");
                cfg.model.gbt.n_estimators = g.value("n_estimators", cfg.model.gbt.n_estimators);
                cfg.model.gbt.max_depth = g.value("max_depth", cfg.model.gbt.max_depth);
                cfg.model.gbt.learning_rate =
                    g.value("learning_rate", cfg.model.gbt.learning_rate);
                cfg.model.gbt.min_leaf = g.value("min_leaf", cfg.model.gbt.min_leaf);
                cfg.model.gbt.seed = g.value("seed", cfg.model.gbt.seed);
            }
            if (m.contains("rf")) {
                const auto& r = m.at("rf");
                cfg.model.rf.n_estimators = r.value("n_estimators", cfg.model.rf.n_estimators);
                cfg.model.rf.max_depth = r.value("max_depth", cfg.model.rf.max_depth);
                cfg.model.rf.min_leaf = r.value("min_leaf", cfg.model.rf.min_leaf);
                cfg.model.rf.bootstrap = r.value("bootstrap", cfg.model.rf.bootstrap);
                cfg.model.rf.seed = r.value("seed", cfg.model.rf.seed);
            }
        }
        cfg.seed = j.value("seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed pipeline config: ") + e.what());
    }
    if (cfg.correction != "plane" && cfg.correction != "surface") {
        throw ConfigError("correction must be 'plane' or 'surface', got '" + cfg.correction + "'");
    }
    return cfg;
}

}  // namespace pavetex

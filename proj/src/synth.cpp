#include "pavetex/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pavetex/errors.hpp"
#include "pavetex/rng.hpp"

namespace pavetex {

namespace {

void check_spec(const SynthSpec& spec) {
    if (spec.width < 2 || spec.height < 2) throw ConfigError("grid must be at least 2x2");
    if (spec.n_particles < 0) throw ConfigError("particle count must be nonnegative");
    if (spec.n_particles > 0) {
        if (!(spec.radius_min > 0.0) || spec.radius_min > spec.radius_max) {
            throw ConfigError("radius range must satisfy 0 < min <= max");
        }
        if (2.0 * spec.radius_max + 2.0 > std::min(spec.width, spec.height)) {
            throw ConfigError("largest particle does not fit the grid");
        }
    }
    if (!(spec.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
    if (!(spec.concave_depth > spec.convex_depth)) {
        throw ConfigError("concave depth must exceed convex depth");
    }
    if (!(spec.unit_factor > 0.0)) throw ConfigError("unit factor must be positive");
}

}  // namespace

std::pair<DepthMap, GroundTruth> generate_texture(const SynthSpec& spec) {
    check_spec(spec);
    Rng rng(spec.seed);

    std::vector<PlantedCircle> circles;
    circles.reserve(static_cast<std::size_t>(spec.n_particles));
    const long budget = 200L * spec.n_particles;
    long attempts = 0;
    while (static_cast<int>(circles.size()) < spec.n_particles) {
        if (attempts >= budget) {
            throw PlacementFailureError("could not place " + std::to_string(spec.n_particles) +
                                        " particles in " + std::to_string(budget) + " attempts");
        }
        ++attempts;
        PlantedCircle c;
        c.r = rng.uniform(spec.radius_min, spec.radius_max);
        c.cx = rng.uniform(c.r, spec.width - 1 - c.r);
        c.cy = rng.uniform(c.r, spec.height - 1 - c.r);
        bool clear = true;
        for (const auto& o : circles) {
            const double dx = c.cx - o.cx, dy = c.cy - o.cy;
            const double min_dist = c.r + o.r + 1.0;  // one pixel of guaranteed background
            if (dx * dx + dy * dy < min_dist * min_dist) {
                clear = false;
                break;
            }
        }
        if (clear) circles.push_back(c);
    }

    GroundTruth truth;
    truth.clean_map = DepthMap(spec.width, spec.height);
    std::fill(truth.clean_map.values.begin(), truth.clean_map.values.end(),
              static_cast<float>(spec.concave_depth));
    std::size_t convex_pixels = 0;
    for (const auto& c : circles) {
        const int x0 = std::max(0, static_cast<int>(std::floor(c.cx - c.r)));
        const int x1 = std::min(spec.width - 1, static_cast<int>(std::ceil(c.cx + c.r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(c.cy - c.r)));
        const int y1 = std::min(spec.height - 1, static_cast<int>(std::ceil(c.cy + c.r)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - c.cx, dy = y - c.cy;
                if (dx * dx + dy * dy <= c.r * c.r) {
                    truth.clean_map.at(x, y) = static_cast<float>(spec.convex_depth);
                    ++convex_pixels;
                }
            }
        }
    }
    truth.plane = PlaneModel{spec.tilt_a, spec.tilt_b, 0.0};
    truth.circles = std::move(circles);
    truth.concave_fraction =
        1.0 - static_cast<double>(convex_pixels) / static_cast<double>(truth.clean_map.size());
    truth.unit_factor = spec.unit_factor;
    truth.oracle_mtd = oracle_mtd(truth);

    DepthMap map = truth.clean_map;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            double z = map.at(x, y) + truth.plane(x, y);
            if (spec.noise_sigma > 0.0) z += rng.normal(0.0, spec.noise_sigma);
            map.at(x, y) = static_cast<float>(z);
        }
    }
    return {std::move(map), std::move(truth)};
}

double oracle_mtd(const GroundTruth& truth) {
    const auto& values = truth.clean_map.values;
    if (values.empty()) throw Error("ground truth has an empty clean map");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double rank = 0.995 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const double frac = rank - static_cast<double>(lo);
    const double cap = lo + 1 < sorted.size()
                           ? sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
                           : sorted[lo];
    double deficit = 0.0;
    for (double v : sorted) deficit += cap - v;
    return truth.unit_factor * deficit / static_cast<double>(sorted.size());
}

Dataset generate_dataset(int n_samples, const std::vector<SynthFamily>& family,
                         std::uint64_t seed, const PipelineConfig& pipeline,
                         std::vector<GroundTruth>* truths, std::vector<DepthMap>* maps) {
    if (family.size() < 2) throw ConfigError("spec family must cover at least 2 strata");
    if (n_samples < 1) throw ConfigError("need at least one sample");
    Dataset ds;
    ds.feature_names = {"p", "d", "k"};
    std::map<std::string, int> per_family;
    for (int i = 0; i < n_samples; ++i) {
        const auto& fam = family[static_cast<std::size_t>(i) % family.size()];
        SynthSpec spec = fam.spec;
        spec.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
        auto [map, truth] = generate_texture(spec);
        LabeledSample s;
        s.id = fam.name + "-" + std::to_string(per_family[fam.name]++);
        s.mixture = fam.name;
        s.features = run_feature_pipeline(map, pipeline);
        s.mtd = truth.oracle_mtd;
        ds.samples.push_back(std::move(s));
        if (truths != nullptr) truths->push_back(std::move(truth));
        if (maps != nullptr) maps->push_back(std::move(map));
    }
    return ds;
}

nlohmann::json synth_spec_to_json(const SynthSpec& spec) {
    return {{"width", spec.width},
            {"height", spec.height},
            {"n_particles", spec.n_particles},
            {"radius_min", spec.radius_min},
            {"radius_max", spec.radius_max},
            {"tilt_a", spec.tilt_a},
            {"tilt_b", spec.tilt_b},
            {"noise_sigma", spec.noise_sigma},
            {"concave_depth", spec.concave_depth},
            {"convex_depth", spec.convex_depth},
            {"unit_factor", spec.unit_factor},
            {"seed", spec.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    try {
        spec.width = j.value("width", spec.width);
        spec.height = j.value("height", spec.height);
        spec.n_particles = j.value("n_particles", spec.n_particles);
        spec.radius_min = j.value("radius_min", spec.radius_min);
        spec.radius_max = j.value("radius_max", spec.radius_max);
        spec.tilt_a = j.value("tilt_a", spec.tilt_a);
        spec.tilt_b = j.value("tilt_b", spec.tilt_b);
        spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
        spec.concave_depth = j.value("concave_depth", spec.concave_depth);
        spec.convex_depth = j.value("convex_depth", spec.convex_depth);
        spec.unit_factor = j.value("unit_factor", spec.unit_factor);
        spec.seed = j.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed synth spec: ") + e.what());
    }
    return spec;
}

nlohmann::json ground_truth_to_json(const GroundTruth& truth) {
    nlohmann::json circles = nlohmann::json::array();
    for (const auto& c : truth.circles) {
        circles.push_back({{"cx", c.cx}, {"cy", c.cy}, {"r", c.r}});
    }
    return {{"plane", {{"a", truth.plane.a}, {"b", truth.plane.b}, {"c", truth.plane.c}}},
            {"circles", std::move(circles)},
            {"concave_fraction", truth.concave_fraction},
            {"unit_factor", truth.unit_factor},
            {"oracle_mtd", truth.oracle_mtd}};
}

}  // namespace pavetex

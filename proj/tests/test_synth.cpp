#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pavetex/errors.hpp"
#include "pavetex/synth.hpp"

using namespace pavetex;

namespace {

SynthSpec small_spec() {
    SynthSpec spec;
    spec.width = 96;
    spec.height = 96;
    spec.n_particles = 6;
    spec.radius_min = 6.0;
    spec.radius_max = 10.0;
    spec.tilt_a = 0.0008;
    spec.tilt_b = -0.0005;
    spec.noise_sigma = 0.004;
    return spec;
}

PipelineConfig fast_pipeline() {
    PipelineConfig cfg;
    cfg.ransac.iterations = 120;
    return cfg;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i] / n;
        mb += b[i] / n;
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("an empty particle list gives a constant map") {
    SynthSpec spec;
    spec.width = 64;
    spec.height = 64;
    spec.n_particles = 0;
    spec.concave_depth = 0.75;
    spec.convex_depth = 0.0;
    auto [map, truth] = generate_texture(spec);
    for (float v : map.values) CHECK(v == 0.75f);
    CHECK(truth.clean_map == map);
    CHECK(truth.concave_fraction == 1.0);
    CHECK(truth.oracle_mtd == 0.0);
    CHECK(truth.circles.empty());
}

TEST_CASE("texture generation is a pure function of the spec") {
    auto spec = small_spec();
    spec.seed = 99;
    auto [m1, t1] = generate_texture(spec);
    auto [m2, t2] = generate_texture(spec);
    CHECK(m1 == m2);
    REQUIRE(t1.circles.size() == t2.circles.size());
    for (std::size_t i = 0; i < t1.circles.size(); ++i) {
        CHECK(t1.circles[i].cx == t2.circles[i].cx);
        CHECK(t1.circles[i].cy == t2.circles[i].cy);
        CHECK(t1.circles[i].r == t2.circles[i].r);
    }
    CHECK(t1.oracle_mtd == t2.oracle_mtd);
    CHECK(t1.clean_map == t2.clean_map);
}

TEST_CASE("planted circles stay inside the grid and apart") {
    SynthSpec spec;
    spec.n_particles = 20;  // 512x512, radii 8..16
    spec.seed = 4;
    auto [map, truth] = generate_texture(spec);
    REQUIRE(truth.circles.size() == 20);
    double analytic = 0.0;
    for (const auto& c : truth.circles) {
        CHECK(c.r >= 8.0);
        CHECK(c.r <= 16.0);
        CHECK(c.cx - c.r >= 0.0);
        CHECK(c.cx + c.r <= 511.0);
        CHECK(c.cy - c.r >= 0.0);
        CHECK(c.cy + c.r <= 511.0);
        analytic += 3.14159265358979323846 * c.r * c.r;
    }
    for (std::size_t i = 0; i < truth.circles.size(); ++i) {
        for (std::size_t j = i + 1; j < truth.circles.size(); ++j) {
            const double dx = truth.circles[i].cx - truth.circles[j].cx;
            const double dy = truth.circles[i].cy - truth.circles[j].cy;
            CHECK(std::sqrt(dx * dx + dy * dy) >=
                  truth.circles[i].r + truth.circles[j].r + 1.0 - 1e-9);
        }
    }
    const double predicted = 1.0 - analytic / (512.0 * 512.0);
    CHECK(std::abs(truth.concave_fraction - predicted) <= 0.01);
}

TEST_CASE("impossible packings fail after a bounded number of attempts") {
    SynthSpec spec;
    spec.width = 256;
    spec.height = 256;
    spec.n_particles = 60;
    spec.radius_min = 40.0;
    spec.radius_max = 48.0;
    CHECK_THROWS_AS(generate_texture(spec), PlacementFailureError);
}

TEST_CASE("invalid specs are rejected") {
    SynthSpec spec;
    spec.radius_max = 400.0;  // cannot fit a 512-wide grid
    CHECK_THROWS_AS(generate_texture(spec), ConfigError);
    spec = SynthSpec{};
    spec.noise_sigma = -0.1;
    CHECK_THROWS_AS(generate_texture(spec), ConfigError);
    spec = SynthSpec{};
    spec.concave_depth = 0.0;
    spec.convex_depth = 0.0;
    CHECK_THROWS_AS(generate_texture(spec), ConfigError);
}

TEST_CASE("oracle depth of a two-level surface") {
    GroundTruth truth;
    truth.clean_map = DepthMap(100, 100);
    for (int y = 0; y < 100; ++y) {
        for (int x = 0; x < 100; ++x) truth.clean_map.at(x, y) = x < 50 ? 0.0f : 1.0f;
    }
    truth.unit_factor = 1.0;
    CHECK(oracle_mtd(truth) == 0.5);
    truth.unit_factor = 2.5;
    CHECK(oracle_mtd(truth) == 1.25);
}

TEST_CASE("oracle depth grows with the planted relief") {
    double prev = -1.0;
    for (double depth : {0.5, 1.0, 1.5, 2.0}) {
        auto spec = small_spec();
        spec.noise_sigma = 0.0;
        spec.seed = 21;
        spec.concave_depth = depth;
        auto [map, truth] = generate_texture(spec);
        CHECK(truth.oracle_mtd > prev);
        prev = truth.oracle_mtd;
    }
}

TEST_CASE("oracle depth ignores a constant offset") {
    auto spec = small_spec();
    spec.seed = 33;
    auto [map, truth] = generate_texture(spec);
    GroundTruth shifted = truth;
    for (auto& v : shifted.clean_map.values) v += 5.0f;
    CHECK(oracle_mtd(shifted) == doctest::Approx(truth.oracle_mtd).epsilon(1e-12));
}

TEST_CASE("generated datasets mirror the stratified field shape") {
    std::vector<SynthFamily> family;
    for (const char* name : {"AC-13", "AC-16", "SMA-13", "OGFC-16"}) {
        SynthFamily f;
        f.name = name;
        f.spec = small_spec();
        f.spec.concave_depth = 1.0 + 0.2 * static_cast<double>(family.size());
        family.push_back(f);
    }
    auto ds = generate_dataset(160, family, 7, fast_pipeline());
    REQUIRE(ds.samples.size() == 160);
    CHECK(ds.feature_names == std::vector<std::string>{"p", "d", "k"});
    std::map<std::string, int> per_stratum;
    std::set<std::string> ids;
    for (const auto& s : ds.samples) {
        ++per_stratum[s.mixture];
        ids.insert(s.id);
        CHECK(s.mtd > 0.0);
        CHECK(s.features.p > 0.0);
        CHECK(s.features.p < 1.0);
        CHECK(s.features.d > 0.0);
        CHECK(s.features.d < 1.0);
        CHECK(s.features.k >= 0.0);
    }
    CHECK(ids.size() == 160);
    REQUIRE(per_stratum.size() == 4);
    for (const auto& [name, count] : per_stratum) CHECK(count == 40);
    CHECK(ds.samples[0].id == "AC-13-0");
    CHECK(ds.samples[4].id == "AC-13-1");
}

TEST_CASE("a dataset of one sample still works") {
    std::vector<SynthFamily> family(2);
    family[0] = {"A", small_spec()};
    family[1] = {"B", small_spec()};
    auto ds = generate_dataset(1, family, 3, fast_pipeline());
    REQUIRE(ds.samples.size() == 1);
    CHECK(ds.samples[0].id == "A-0");

    CHECK_THROWS_AS(generate_dataset(1, {family[0]}, 3, fast_pipeline()), ConfigError);
    CHECK_THROWS_AS(generate_dataset(0, family, 3, fast_pipeline()), ConfigError);
}

TEST_CASE("labels track the planted concave fractions") {
    SynthFamily deep;
    deep.name = "deep";
    deep.spec = small_spec();
    deep.spec.n_particles = 6;
    deep.spec.radius_min = 6.0;
    deep.spec.radius_max = 9.0;
    deep.spec.concave_depth = 3.0;

    SynthFamily shallow;
    shallow.name = "shallow";
    shallow.spec = small_spec();
    shallow.spec.n_particles = 10;
    shallow.spec.radius_min = 8.0;
    shallow.spec.radius_max = 11.0;
    shallow.spec.concave_depth = 0.6;

    std::vector<GroundTruth> truths;
    auto ds = generate_dataset(100, {deep, shallow}, 19, fast_pipeline(), &truths);
    REQUIRE(truths.size() == 100);
    std::vector<double> planted, label;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        planted.push_back(truths[i].concave_fraction);
        label.push_back(ds.samples[i].mtd);
    }
    CHECK(pearson(planted, label) >= 0.8);
}

TEST_CASE("synth specs round trip through json") {
    SynthSpec spec;
    spec.width = 300;
    spec.n_particles = 13;
    spec.radius_max = 22.5;
    spec.tilt_b = 0.001;
    spec.noise_sigma = 0.02;
    spec.unit_factor = 1.4;
    spec.seed = 12345;
    auto j = synth_spec_to_json(spec);
    auto back = synth_spec_from_json(j);
    CHECK(synth_spec_to_json(back) == j);

    auto defaults = synth_spec_from_json(nlohmann::json::object());
    CHECK(defaults.width == 512);
    CHECK(defaults.n_particles == 20);

    CHECK_THROWS_AS(synth_spec_from_json(nlohmann::json{{"width", "wide"}}), ParseError);
}

TEST_CASE("ground truth sidecars carry the plants") {
    auto spec = small_spec();
    spec.seed = 77;
    auto [map, truth] = generate_texture(spec);
    auto j = ground_truth_to_json(truth);
    CHECK(j.at("circles").size() == truth.circles.size());
    CHECK(j.at("concave_fraction").get<double>() == truth.concave_fraction);
    CHECK(j.at("oracle_mtd").get<double>() == truth.oracle_mtd);
    CHECK(j.at("plane").at("a").get<double>() == spec.tilt_a);
    CHECK_FALSE(j.contains("clean_map"));
}

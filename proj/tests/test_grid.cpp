#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "pavetex/errors.hpp"
#include "pavetex/grid.hpp"
#include "pavetex/grid_io.hpp"
#include "pavetex/rng.hpp"

using namespace pavetex;

namespace {

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

DepthMap random_map(int w, int h, double lo, double hi, uint64_t seed) {
    Rng rng(seed);
    DepthMap m(w, h);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform(lo, hi));
    return m;
}

// Brute-force rank vector: rank[i] = number of strictly smaller elements.
std::vector<int> ranks(const std::vector<float>& v) {
    std::vector<int> r(v.size(), 0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) {
            if (v[j] < v[i]) ++r[i];
        }
    }
    return r;
}

}  // namespace

TEST_CASE("normalize rescales values to [0,1]") {
    DepthMap m(3, 1, {0.0f, 5.0f, 10.0f});
    auto out = normalize(m);
    CHECK(out.values == std::vector<float>{0.0f, 0.5f, 1.0f});
}

TEST_CASE("normalize is the identity on an already normalized map") {
    DepthMap m(2, 2, {0.0f, 0.25f, 0.75f, 1.0f});
    CHECK(normalize(m) == m);
}

TEST_CASE("normalize hits exact endpoints and preserves ranks") {
    auto m = random_map(64, 64, 3.0, 7.0, 0xA11CE);
    auto out = normalize(m);
    auto lo = *std::min_element(out.values.begin(), out.values.end());
    auto hi = *std::max_element(out.values.begin(), out.values.end());
    CHECK(lo == 0.0f);
    CHECK(hi == 1.0f);
    CHECK(ranks(m.values) == ranks(out.values));
    CHECK(normalize(out) == out);  // idempotent
}

TEST_CASE("normalize rejects constant maps") {
    DepthMap m(2, 2, {1.5f, 1.5f, 1.5f, 1.5f});
    CHECK_THROWS_AS(normalize(m), ConstantMapError);
}

TEST_CASE("depth maps reject non-finite values") {
    CHECK_THROWS_AS(
        DepthMap(2, 2, {1.0f, 2.0f, std::numeric_limits<float>::quiet_NaN(), 4.0f}), Error);
}

TEST_CASE("pfm round trip is bit exact") {
    // Values chosen to exercise sign, subnormals and extremes.
    DepthMap m(3, 3,
               {0.1f, 0.2f, 0.3f, -0.0f, 1e-42f, 3.4e38f, -7.25f, 0.8f, 0.9f});
    auto path = temp_file("pavetex_roundtrip.pfm");
    write_depth_map(m, path.string());
    auto back = read_depth_map(path.string());
    REQUIRE(back.width == m.width);
    REQUIRE(back.height == m.height);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        CHECK(std::bit_cast<uint32_t>(back.values[i]) == std::bit_cast<uint32_t>(m.values[i]));
    }
    std::filesystem::remove(path);
}

TEST_CASE("pfm round trip is bit exact on random data") {
    auto m = random_map(64, 32, -5.0, 5.0, 0xBEEF);
    auto path = temp_file("pavetex_roundtrip_rand.pfm");
    write_depth_map(m, path.string(), MapFormat::pfm32);
    auto back = read_depth_map(path.string(), MapFormat::pfm32);
    CHECK(back == m);
    std::filesystem::remove(path);
}

TEST_CASE("csv grid round trip keeps nine significant digits") {
    auto m = random_map(128, 128, 0.0, 1.0, 0xC0FFEE);
    auto path = temp_file("pavetex_roundtrip.csv");
    write_depth_map(m, path.string(), MapFormat::csv_grid);
    auto back = read_depth_map(path.string(), MapFormat::csv_grid);
    REQUIRE(back.width == 128);
    REQUIRE(back.height == 128);
    double worst = 0.0;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(m.values[i]) - back.values[i]));
    }
    CHECK(worst <= 1e-8);  // range is 1
    std::filesystem::remove(path);
}

TEST_CASE("csv grid reports the offending row on a short line") {
    auto path = temp_file("pavetex_short_row.csv");
    {
        std::ofstream out(path);
        out << "# 3 2\n";
        out << "0.1,0.2,0.3\n";
        out << "0.4,0.5\n";
    }
    try {
        read_depth_map(path.string(), MapFormat::csv_grid);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        // short row sits on file line 3 (after the header)
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::filesystem::remove(path);
}

TEST_CASE("csv grid rejects a bad numeric field") {
    auto path = temp_file("pavetex_bad_field.csv");
    {
        std::ofstream out(path);
        out << "0.1,zebra\n";
        out << "0.3,0.4\n";
    }
    CHECK_THROWS_AS(read_depth_map(path.string(), MapFormat::csv_grid), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("reading a missing file raises IoError") {
    CHECK_THROWS_AS(read_depth_map("/nonexistent/nowhere.pfm"), IoError);
}

TEST_CASE("format is inferred from the file extension") {
    CHECK(map_format_from_path("a/b/c.pfm") == MapFormat::pfm32);
    CHECK(map_format_from_path("a/b/c.csv") == MapFormat::csv_grid);
    CHECK_THROWS_AS(map_format_from_path("a/b/c.bin"), ConfigError);
}

TEST_CASE("extract_profile returns one row in column order") {
    DepthMap m(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
    auto p = extract_profile(m, 1);
    REQUIRE(p.samples.size() == 2);
    CHECK(p.samples[0] == std::pair<int, float>{0, 3.0f});
    CHECK(p.samples[1] == std::pair<int, float>{1, 4.0f});
    CHECK_THROWS_AS(extract_profile(m, 2), RowOutOfRangeError);
}

TEST_CASE("profiles concatenated in row order rebuild the map") {
    auto m = random_map(17, 9, -1.0, 1.0, 0x5EED);
    std::vector<float> rebuilt;
    for (int y = 0; y < m.height; ++y) {
        auto p = extract_profile(m, y);
        CHECK(p.row_index == y);
        for (auto& [x, z] : p.samples) {
            CHECK(x == static_cast<int>(rebuilt.size()) % m.width);
            rebuilt.push_back(z);
        }
    }
    CHECK(rebuilt == m.values);
}

TEST_CASE("to_point_cloud emits one point per pixel") {
    DepthMap tiny(1, 1, {7.0f});
    auto c = to_point_cloud(tiny);
    REQUIRE(c.points.size() == 1);
    CHECK(c.points[0].x == 0);
    CHECK(c.points[0].y == 0);
    CHECK(c.points[0].z == 7.0f);

    DepthMap m(2, 2, {1.0f, 2.0f, 3.0f, 4.0f});
    auto cloud = to_point_cloud(m);
    REQUIRE(cloud.points.size() == 4);
    std::vector<std::pair<int, int>> seen;
    for (auto& p : cloud.points) {
        seen.emplace_back(p.x, p.y);
        CHECK(p.z == m.at(p.x, p.y));
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
}

TEST_CASE("point cloud round trip restores the map") {
    auto m = random_map(32, 32, 0.0, 2.0, 0xF00D);
    auto cloud = to_point_cloud(m);
    auto back = from_point_cloud(cloud, 32, 32);
    CHECK(back == m);
    auto again = to_point_cloud(back);
    REQUIRE(again.points.size() == cloud.points.size());
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        CHECK(again.points[i].x == cloud.points[i].x);
        CHECK(again.points[i].y == cloud.points[i].y);
        CHECK(again.points[i].z == cloud.points[i].z);
    }
}

TEST_CASE("from_point_cloud rejects duplicate and missing pixels") {
    PointCloud c;
    c.points = {{0, 0, 1.0f}, {0, 0, 2.0f}, {1, 0, 3.0f}, {1, 1, 4.0f}};
    CHECK_THROWS_AS(from_point_cloud(c, 2, 2), ShapeMismatchError);
}

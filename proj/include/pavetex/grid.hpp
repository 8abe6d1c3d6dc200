#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace pavetex {

// Row-major grid of relative depth values. Larger value = farther from the
// camera. Values are stored as 32-bit floats; computations that accumulate
// over many pixels run in double.
struct DepthMap {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    DepthMap() = default;
    DepthMap(int w, int h) : width(w), height(h), values(static_cast<std::size_t>(w) * h, 0.0f) {}
    DepthMap(int w, int h, std::vector<float> v);

    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return values.size(); }

    // Throws if dimensions/value-count disagree or any value is non-finite.
    void validate() const;

    bool operator==(const DepthMap&) const = default;
};

// One horizontal slice of a depth map: (column, depth) samples with strictly
// increasing columns.
struct Profile {
    int row_index = 0;
    std::vector<std::pair<int, float>> samples;
};

struct CloudPoint {
    int x = 0;
    int y = 0;
    float z = 0.0f;
    bool operator==(const CloudPoint&) const = default;
};

struct PointCloud {
    std::vector<CloudPoint> points;
};

// Min-max normalization: (z - z_min) / (z_max - z_min). Output spans exactly
// [0, 1]. Throws ConstantMapError when z_max == z_min.
DepthMap normalize(const DepthMap& map);

Profile extract_profile(const DepthMap& map, int row);

PointCloud to_point_cloud(const DepthMap& map);

// Inverse of to_point_cloud; expects exactly one point per pixel.
DepthMap from_point_cloud(const PointCloud& cloud, int width, int height);

}  // namespace pavetex

#include "pavetex/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pavetex/errors.hpp"

namespace pavetex {

DepthMap::DepthMap(int w, int h, std::vector<float> v)
    : width(w), height(h), values(std::move(v)) {
    validate();
}

void DepthMap::validate() const {
    if (width < 1 || height < 1) {
        throw Error("depth map dimensions must be positive, got " + std::to_string(width) +
                    "x" + std::to_string(height));
    }
    if (values.size() != static_cast<std::size_t>(width) * height) {
        throw Error("depth map value count " + std::to_string(values.size()) +
                    " does not match " + std::to_string(width) + "x" + std::to_string(height));
    }
    for (const float v : values) {
        if (!std::isfinite(v)) throw Error("depth map contains a non-finite value");
    }
}

DepthMap normalize(const DepthMap& map) {
    map.validate();
    const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) throw ConstantMapError("cannot normalize a constant depth map");
    const double range = hi - lo;
    DepthMap out(map.width, map.height);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        out.values[i] = static_cast<float>((static_cast<double>(map.values[i]) - lo) / range);
    }
    return out;
}

Profile extract_profile(const DepthMap& map, int row) {
    map.validate();
    if (row < 0 || row >= map.height) {
        throw RowOutOfRangeError("profile row " + std::to_string(row) + " outside [0, " +
                                 std::to_string(map.height) + ")");
    }
    Profile p;
    p.row_index = row;
    p.samples.reserve(map.width);
    for (int x = 0; x < map.width; ++x) p.samples.emplace_back(x, map.at(x, row));
    return p;
}

PointCloud to_point_cloud(const DepthMap& map) {
    map.validate();
    PointCloud cloud;
    cloud.points.reserve(map.size());
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            cloud.points.push_back({x, y, map.at(x, y)});
        }
    }
    return cloud;
}

DepthMap from_point_cloud(const PointCloud& cloud, int width, int height) {
    if (width < 1 || height < 1 ||
        cloud.points.size() != static_cast<std::size_t>(width) * height) {
        throw ShapeMismatchError("point cloud size does not match requested grid");
    }
    DepthMap map(width, height);
    std::vector<char> seen(map.size(), 0);
    for (const auto& pt : cloud.points) {
        if (pt.x < 0 || pt.x >= width || pt.y < 0 || pt.y >= height) {
            throw ShapeMismatchError("point cloud coordinate outside the grid");
        }
        const std::size_t idx = static_cast<std::size_t>(pt.y) * width + pt.x;
        if (seen[idx]) throw ShapeMismatchError("duplicate point for one pixel");
        seen[idx] = 1;
        map.values[idx] = pt.z;
    }
    return map;
}

}  // namespace pavetex

#pragma once

#include <string>

#include "pavetex/grid.hpp"

namespace pavetex {

enum class MapFormat {
    pfm32,    // binary PFM, grayscale "Pf", scale -1.0 (little-endian); bit-exact
    csv_grid  // one text line per pixel row, 9 significant digits
};

// Picks pfm32 for .pfm, csv_grid for .csv; throws ConfigError otherwise.
MapFormat map_format_from_path(const std::string& path);

DepthMap read_depth_map(const std::string& path, MapFormat format);
void write_depth_map(const DepthMap& map, const std::string& path, MapFormat format);

inline DepthMap read_depth_map(const std::string& path) {
    return read_depth_map(path, map_format_from_path(path));
}
inline void write_depth_map(const DepthMap& map, const std::string& path) {
    write_depth_map(map, path, map_format_from_path(path));
}

}  // namespace pavetex

#pragma once

#include <array>
#include <cstdint>

#include "pavetex/grid.hpp"

namespace pavetex {

struct PlaneModel {
    double a = 0.0, b = 0.0, c = 0.0;  // z = a*x + b*y + c

    double operator()(double x, double y) const { return a * x + b * y + c; }
};

// Third-degree surface, coefficients over the monomial basis
// 1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3 in pixel coordinates.
struct CubicSurfaceModel {
    std::array<double, 10> coef{};

    double operator()(double x, double y) const;
};

struct RansacConfig {
    int iterations = 500;
    double inlier_threshold = 0.01;  // absolute residual, depth units
    double min_inlier_fraction = 0.5;
    uint64_t seed = 0;
};

PlaneModel ransac_plane_fit(const DepthMap& map, const RansacConfig& cfg);
CubicSurfaceModel ransac_cubic_fit(const DepthMap& map, const RansacConfig& cfg);

DepthMap subtract_fit(const DepthMap& map, const PlaneModel& model);
DepthMap subtract_fit(const DepthMap& map, const CubicSurfaceModel& model);

// OLS slope of z against x.
double profile_slope(const Profile& profile);

}  // namespace pavetex

#pragma once

#include "pavetex/grid.hpp"

namespace pavetex {

// Noise variance of the raw map, in squared depth units.
struct NoiseModel {
    double sigma_eta_sq = 0.0;
};

struct FilterConfig {
    int window = 5;           // odd neighborhood side length
    bool clamp_ratio = true;  // cap the variance ratio at 1
};

// Robust noise estimate: sigma_eta^2 = (1.4826 * MAD(d))^2 / 2 where d are the
// horizontal first differences (differencing doubles the noise variance).
NoiseModel estimate_noise_variance(const DepthMap& map);

// Local noise-variance-ratio filter: z' = z - r * (z - mean_S) with
// r = sigma_eta^2 / var_S over the window around each pixel (edge-replicated).
// With clamp_ratio, r is capped at 1 so outputs stay inside local bounds.
DepthMap adaptive_local_filter(const DepthMap& map, const FilterConfig& cfg,
                               const NoiseModel& noise);

DepthMap mean_filter(const DepthMap& map, int window);
DepthMap median_filter(const DepthMap& map, int window);
DepthMap bilateral_filter(const DepthMap& map, int window, double sigma_space,
                          double sigma_range);

// Mean squared difference between two equal-shaped maps.
double filter_mse(const DepthMap& original, const DepthMap& filtered);

}  // namespace pavetex

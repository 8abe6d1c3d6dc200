#include "pavetex/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pavetex/errors.hpp"

namespace pavetex {

namespace {

void check_window(const DepthMap& map, int window) {
    if (window < 3 || window % 2 == 0) {
        throw InvalidWindowError("window must be odd and >= 3, got " + std::to_string(window));
    }
    if (window > std::min(map.width, map.height)) {
        throw InvalidWindowError("window " + std::to_string(window) +
                                 " exceeds map extent " + std::to_string(map.width) + "x" +
                                 std::to_string(map.height));
    }
}

// Edge handling by replication: indices clamp to the image.
int clamp_coord(int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); }

}  // namespace

NoiseModel estimate_noise_variance(const DepthMap& map) {
    map.validate();
    if (map.width < 2) throw Error("noise estimate needs width >= 2");
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(map.width - 1) * map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x + 1 < map.width; ++x) {
            diffs.push_back(static_cast<double>(map.at(x + 1, y)) - map.at(x, y));
        }
    }
    const auto median_of = [](std::vector<double>& v) {
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
        double m = v[mid];
        if (v.size() % 2 == 0) {
            const double lower =
                *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
            m = 0.5 * (m + lower);
        }
        return m;
    };
    const double med = median_of(diffs);
    for (double& d : diffs) d = std::abs(d - med);
    const double mad = median_of(diffs);
    const double sigma_d = 1.4826 * mad;
    return NoiseModel{sigma_d * sigma_d / 2.0};
}

DepthMap adaptive_local_filter(const DepthMap& map, const FilterConfig& cfg,
                               const NoiseModel& noise) {
    map.validate();
    check_window(map, cfg.window);
    if (noise.sigma_eta_sq < 0.0) throw Error("noise variance must be nonnegative");
    if (noise.sigma_eta_sq == 0.0) return map;  // r = 0 everywhere, bit-exact identity

    const int half = cfg.window / 2;
    const double area = static_cast<double>(cfg.window) * cfg.window;
    DepthMap out(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            double sum = 0.0, sum_sq = 0.0;
            for (int dy = -half; dy <= half; ++dy) {
                const int sy = clamp_coord(y + dy, map.height);
                for (int dx = -half; dx <= half; ++dx) {
                    const double v = map.at(clamp_coord(x + dx, map.width), sy);
                    sum += v;
                    sum_sq += v * v;
                }
            }
            const double mean = sum / area;
            const double var = std::max(0.0, sum_sq / area - mean * mean);
            if (var == 0.0) {
                out.at(x, y) = static_cast<float>(mean);
                continue;
            }
            double r = noise.sigma_eta_sq / var;
            if (cfg.clamp_ratio && r > 1.0) r = 1.0;
            const double z = map.at(x, y);
            out.at(x, y) = static_cast<float>(z - r * (z - mean));
        }
    }
    return out;
}

DepthMap mean_filter(const DepthMap& map, int window) {
    map.validate();
    check_window(map, window);
    const int half = window / 2;
    const double area = static_cast<double>(window) * window;
    DepthMap out(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            double sum = 0.0;
            for (int dy = -half; dy <= half; ++dy) {
                const int sy = clamp_coord(y + dy, map.height);
                for (int dx = -half; dx <= half; ++dx) {
                    sum += map.at(clamp_coord(x + dx, map.width), sy);
                }
            }
            out.at(x, y) = static_cast<float>(sum / area);
        }
    }
    return out;
}

DepthMap median_filter(const DepthMap& map, int window) {
    map.validate();
    check_window(map, window);
    const int half = window / 2;
    DepthMap out(map.width, map.height);
    std::vector<float> neigh(static_cast<std::size_t>(window) * window);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            std::size_t n = 0;
            for (int dy = -half; dy <= half; ++dy) {
                const int sy = clamp_coord(y + dy, map.height);
                for (int dx = -half; dx <= half; ++dx) {
                    neigh[n++] = map.at(clamp_coord(x + dx, map.width), sy);
                }
            }
            const std::size_t mid = n / 2;  // window^2 is odd
            std::nth_element(neigh.begin(), neigh.begin() + static_cast<std::ptrdiff_t>(mid),
                             neigh.begin() + static_cast<std::ptrdiff_t>(n));
            out.at(x, y) = neigh[mid];
        }
    }
    return out;
}

DepthMap bilateral_filter(const DepthMap& map, int window, double sigma_space,
                          double sigma_range) {
    map.validate();
    check_window(map, window);
    if (sigma_space <= 0.0 || sigma_range <= 0.0) {
        throw Error("bilateral sigmas must be positive");
    }
    const int half = window / 2;
    const double inv_2ss = 1.0 / (2.0 * sigma_space * sigma_space);
    const double inv_2sr = 1.0 / (2.0 * sigma_range * sigma_range);

    std::vector<double> spatial(static_cast<std::size_t>(window) * window);
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
            const double d2 = static_cast<double>(dx) * dx + static_cast<double>(dy) * dy;
            spatial[static_cast<std::size_t>(dy + half) * window + (dx + half)] =
                std::exp(-d2 * inv_2ss);
        }
    }

    DepthMap out(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const double center = map.at(x, y);
            double acc = 0.0, wsum = 0.0;
            for (int dy = -half; dy <= half; ++dy) {
                const int sy = clamp_coord(y + dy, map.height);
                for (int dx = -half; dx <= half; ++dx) {
                    const double v = map.at(clamp_coord(x + dx, map.width), sy);
                    const double dz = v - center;
                    const double w =
                        spatial[static_cast<std::size_t>(dy + half) * window + (dx + half)] *
                        std::exp(-dz * dz * inv_2sr);
                    acc += w * v;
                    wsum += w;
                }
            }
            out.at(x, y) = static_cast<float>(acc / wsum);
        }
    }
    return out;
}

double filter_mse(const DepthMap& original, const DepthMap& filtered) {
    original.validate();
    filtered.validate();
    if (original.width != filtered.width || original.height != filtered.height) {
        throw ShapeMismatchError("filter_mse requires equal map dimensions");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < original.values.size(); ++i) {
        const double d = static_cast<double>(original.values[i]) - filtered.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(original.values.size());
}

}  // namespace pavetex

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "pavetex/grid.hpp"

namespace pavetex {

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bits;  // nonzero = foreground

    BinaryMask() = default;
    BinaryMask(int w, int h)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

    uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::size_t foreground_count() const;

    bool operator==(const BinaryMask&) const = default;
};

struct Circle {
    double cx = 0.0, cy = 0.0, r = 0.0;
};

struct Particle {
    int label = 0;
    std::vector<std::pair<int, int>> pixels;  // (x, y)
    Circle circle;
};

struct ParticleSet {
    std::vector<Particle> particles;
    int source_width = 0;
};

struct FeatureVector {
    double p = 0.0;  // concave pixel fraction
    double d = 0.0;  // largest particle diameter / width
    double k = 0.0;  // summed max inter-particle gaps / width, percent
};

struct BinarizeConfig {
    int window = 31;
    double k_bias = 0.1;
};

struct WatershedConfig {
    int min_separation = 9;          // minimum marker distance, pixels
    double marker_rel_threshold = 0.3;  // markers need EDM >= rel * max(EDM)
    int min_area = 25;               // discard smaller regions, pixels
};

struct FeatureConfig {
    double threshold = 0.35;
    BinarizeConfig binarize{};
    WatershedConfig watershed{};
};

BinaryMask threshold_segment(const DepthMap& map, double t);
double iou(const BinaryMask& a, const BinaryMask& b);
double concavity_ratio(const BinaryMask& mask);
BinaryMask local_adaptive_binarize(const DepthMap& map, const BinarizeConfig& cfg);

// Exact squared Euclidean distance to the nearest background pixel
// (0 on background); row-major, same layout as the mask.
std::vector<double> squared_distance_transform(const BinaryMask& mask);

ParticleSet watershed_split(const BinaryMask& mask, const WatershedConfig& cfg = {});

Circle min_enclosing_circle(const std::vector<std::pair<double, double>>& points);

double max_particle_size(const ParticleSet& set);
double aggregate_voids(const ParticleSet& set);

FeatureVector extract_features(const DepthMap& map, const FeatureConfig& cfg = {});

void write_mask_pgm(const BinaryMask& mask, const std::string& path);
BinaryMask read_mask_pgm(const std::string& path);
void write_particles_csv(const ParticleSet& set, const std::string& path);

}  // namespace pavetex

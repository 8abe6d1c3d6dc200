#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <utility>
#include <vector>

#include "pavetex/errors.hpp"
#include "pavetex/features.hpp"
#include "pavetex/grid.hpp"
#include "pavetex/rng.hpp"

using namespace pavetex;

namespace {

BinaryMask disc_mask(int w, int h, const std::vector<std::pair<std::pair<double, double>, double>>& discs) {
    BinaryMask m(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (const auto& [c, r] : discs) {
                const double dx = x - c.first, dy = y - c.second;
                if (dx * dx + dy * dy <= r * r) {
                    m.at(x, y) = 1;
                    break;
                }
            }
        }
    }
    return m;
}

// Quadratic-time reference for the distance transform.
std::vector<double> brute_force_edt2(const BinaryMask& m) {
    std::vector<double> out(m.bits.size(), 0.0);
    std::vector<std::pair<int, int>> bg;
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) bg.emplace_back(x, y);
        }
    }
    for (int y = 0; y < m.height; ++y) {
        for (int x = 0; x < m.width; ++x) {
            if (!m.at(x, y)) continue;
            double best = 1e30;
            for (const auto& [bx, by] : bg) {
                const double dx = x - bx, dy = y - by;
                best = std::min(best, dx * dx + dy * dy);
            }
            out[static_cast<std::size_t>(y) * m.width + x] = best;
        }
    }
    return out;
}

// All-pairs/all-triples reference for the smallest enclosing circle.
double brute_force_mec_radius(const std::vector<std::pair<double, double>>& pts) {
    const int n = static_cast<int>(pts.size());
    const auto contains_all = [&](double cx, double cy, double r) {
        for (const auto& [x, y] : pts) {
            const double dx = x - cx, dy = y - cy;
            if (dx * dx + dy * dy > r * r + 1e-7) return false;
        }
        return true;
    };
    double best = 1e30;
    if (n == 1) return 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double cx = 0.5 * (pts[i].first + pts[j].first);
            const double cy = 0.5 * (pts[i].second + pts[j].second);
            const double r = 0.5 * std::hypot(pts[i].first - pts[j].first,
                                              pts[i].second - pts[j].second);
            if (r < best && contains_all(cx, cy, r)) best = r;
        }
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int q = j + 1; q < n; ++q) {
                const double ax = pts[i].first, ay = pts[i].second;
                const double bx = pts[j].first, by = pts[j].second;
                const double cx = pts[q].first, cy = pts[q].second;
                const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if (std::abs(d) < 1e-12) continue;
                const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by,
                             c2 = cx * cx + cy * cy;
                const double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                const double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                const double r = std::hypot(ax - ux, ay - uy);
                if (r < best && contains_all(ux, uy, r)) best = r;
            }
        }
    }
    return best;
}

// Delaunay adjacency by definition: a triangle belongs to the triangulation
// iff its circumcircle holds no other point.
std::set<std::pair<int, int>> brute_force_delaunay(
    const std::vector<std::pair<double, double>>& pts) {
    const int n = static_cast<int>(pts.size());
    std::set<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            for (int q = j + 1; q < n; ++q) {
                const double ax = pts[i].first, ay = pts[i].second;
                const double bx = pts[j].first, by = pts[j].second;
                const double cx = pts[q].first, cy = pts[q].second;
                const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if (std::abs(d) < 1e-12) continue;
                const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by,
                             c2 = cx * cx + cy * cy;
                const double ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                const double uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                const double r2 = (ax - ux) * (ax - ux) + (ay - uy) * (ay - uy);
                bool empty = true;
                for (int t = 0; t < n && empty; ++t) {
                    if (t == i || t == j || t == q) continue;
                    const double dx = pts[t].first - ux, dy = pts[t].second - uy;
                    empty = dx * dx + dy * dy >= r2;
                }
                if (empty) {
                    edges.insert({i, j});
                    edges.insert({j, q});
                    edges.insert({i, q});
                }
            }
        }
    }
    return edges;
}

ParticleSet particles_from_circles(
    const std::vector<std::pair<std::pair<double, double>, double>>& circles, int width) {
    ParticleSet s;
    s.source_width = width;
    int label = 1;
    for (const auto& [c, r] : circles) {
        Particle p;
        p.label = label++;
        p.pixels = {{static_cast<int>(c.first), static_cast<int>(c.second)}};
        p.circle = {c.first, c.second, r};
        s.particles.push_back(p);
    }
    return s;
}

}  // namespace

TEST_CASE("threshold segmentation splits at the cut level") {
    DepthMap bright(4, 4);
    for (auto& v : bright.values) v = 0.9f;
    CHECK(threshold_segment(bright, 0.35).foreground_count() == 16);

    DepthMap dark(4, 4);
    for (auto& v : dark.values) v = 0.1f;
    CHECK(threshold_segment(dark, 0.35).foreground_count() == 0);
}

TEST_CASE("threshold segmentation hits a planted fraction") {
    DepthMap m(100, 100);
    for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = i < 4300 ? 0.8f : 0.1f;
    auto mask = threshold_segment(m, 0.35);
    CHECK(concavity_ratio(mask) == doctest::Approx(0.43));
}

TEST_CASE("threshold must lie strictly inside (0,1)") {
    DepthMap m(2, 2, {0.1f, 0.2f, 0.3f, 0.4f});
    CHECK_THROWS_AS(threshold_segment(m, 0.0), ThresholdOutOfRangeError);
    CHECK_THROWS_AS(threshold_segment(m, 1.0), ThresholdOutOfRangeError);
    CHECK_THROWS_AS(threshold_segment(m, -0.3), ThresholdOutOfRangeError);
    DepthMap wild(2, 2, {0.1f, 0.2f, 1.5f, 0.4f});
    CHECK_THROWS_AS(threshold_segment(wild, 0.35), Error);
}

TEST_CASE("foreground fraction is monotone in the threshold") {
    Rng rng(31);
    DepthMap m(64, 64);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform());
    double prev = 1.0;
    for (double t = 0.05; t < 1.0; t += 0.05) {
        const double p = concavity_ratio(threshold_segment(m, t));
        CHECK(p <= prev);
        prev = p;
    }
}

TEST_CASE("iou behaves like a set overlap score") {
    BinaryMask a(10, 10), b(10, 10);
    for (int i = 0; i < 50; ++i) a.bits[static_cast<std::size_t>(i)] = 1;
    for (int i = 0; i < 100; ++i) b.bits[static_cast<std::size_t>(i)] = 1;
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, b) == doctest::Approx(0.5));
    CHECK(iou(a, b) == iou(b, a));

    BinaryMask c(10, 10);
    for (int i = 50; i < 100; ++i) c.bits[static_cast<std::size_t>(i)] = 1;
    CHECK(iou(a, c) == 0.0);

    BinaryMask e1(10, 10), e2(10, 10);
    CHECK(iou(e1, e2) == 1.0);
    CHECK_THROWS_AS(iou(a, BinaryMask(10, 9)), ShapeMismatchError);
}

TEST_CASE("concavity ratio counts foreground pixels") {
    BinaryMask m(100, 100);
    for (int i = 0; i < 4300; ++i) m.bits[static_cast<std::size_t>(i)] = 1;
    CHECK(concavity_ratio(m) == doctest::Approx(0.43));
    CHECK(concavity_ratio(BinaryMask(10, 10)) == 0.0);
    BinaryMask full(10, 10);
    std::fill(full.bits.begin(), full.bits.end(), 1);
    CHECK(concavity_ratio(full) == 1.0);
}

TEST_CASE("binarize with zero bias thresholds at the local mean") {
    Rng rng(8);
    DepthMap m(20, 20);
    for (auto& v : m.values) v = static_cast<float>(rng.uniform());
    auto mask = local_adaptive_binarize(m, BinarizeConfig{5, 0.0});
    for (int y = 0; y < 20; ++y) {
        for (int x = 0; x < 20; ++x) {
            double sum = 0.0;
            for (int dy = -2; dy <= 2; ++dy) {
                for (int dx = -2; dx <= 2; ++dx) {
                    sum += m.at(std::clamp(x + dx, 0, 19), std::clamp(y + dy, 0, 19));
                }
            }
            const bool expect = m.at(x, y) < sum / 25.0;
            CHECK(static_cast<bool>(mask.at(x, y)) == expect);
        }
    }
}

TEST_CASE("a pixel half a unit above its local mean is background for any bias") {
    DepthMap m(3, 3);
    for (auto& v : m.values) v = 0.4375f;
    m.at(1, 1) = 1.0f;  // window mean 0.5, offset exactly 0.5
    for (double k : {0.0, 0.3, 0.9}) {
        auto mask = local_adaptive_binarize(m, BinarizeConfig{3, k});
        CHECK(mask.at(1, 1) == 0);
    }
}

TEST_CASE("binarize recovers planted dark discs") {
    const std::vector<std::pair<std::pair<double, double>, double>> discs = {
        {{40, 40}, 14}, {{120, 50}, 11}, {{200, 60}, 16}, {{60, 120}, 18},
        {{140, 130}, 10}, {{215, 140}, 13}, {{45, 200}, 12}, {{120, 205}, 17},
        {{200, 210}, 15},
    };
    DepthMap m(256, 256);
    for (auto& v : m.values) v = 0.8f;
    for (int y = 0; y < 256; ++y) {
        for (int x = 0; x < 256; ++x) {
            for (const auto& [c, r] : discs) {
                const double dx = x - c.first, dy = y - c.second;
                if (dx * dx + dy * dy <= r * r) m.at(x, y) = 0.2f;
            }
        }
    }
    auto planted = disc_mask(256, 256, discs);
    auto mask = local_adaptive_binarize(m, BinarizeConfig{31, 0.1});
    CHECK(iou(mask, planted) >= 0.95);
}

TEST_CASE("distance transform matches the quadratic oracle") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        BinaryMask m(24, 18);
        for (auto& b : m.bits) b = rng.uniform() < 0.6 ? 1 : 0;
        const auto fast = squared_distance_transform(m);
        const auto slow = brute_force_edt2(m);
        for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
    }

    BinaryMask all_fg(7, 5);
    std::fill(all_fg.bits.begin(), all_fg.bits.end(), 1);
    for (double v : squared_distance_transform(all_fg)) CHECK(v == 7 * 7 + 5 * 5);
}

TEST_CASE("separated discs come out as individual particles") {
    auto mask = disc_mask(100, 60, {{{30, 30}, 10}, {{70, 30}, 10}});
    auto parts = watershed_split(mask);
    REQUIRE(parts.particles.size() == 2);
    // the union of particles is exactly the foreground
    std::size_t covered = 0;
    for (const auto& p : parts.particles) covered += p.pixels.size();
    CHECK(covered == mask.foreground_count());
}

TEST_CASE("touching discs are split near the planted centers") {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const double jx = rng.uniform(), jy = rng.uniform();
        auto mask = disc_mask(100, 60, {{{40 + jx, 30 + jy}, 10}, {{55 + jx, 30 + jy}, 10}});
        auto parts = watershed_split(mask);
        REQUIRE(parts.particles.size() == 2);
        std::vector<std::pair<double, double>> want = {{40 + jx, 30 + jy}, {55 + jx, 30 + jy}};
        for (const auto& p : parts.particles) {
            double best = 1e9;
            for (const auto& [wx, wy] : want) {
                best = std::min(best, std::hypot(p.circle.cx - wx, p.circle.cy - wy));
            }
            CHECK(best <= 2.0);
        }
    }
}

TEST_CASE("an empty mask yields no particles") {
    BinaryMask empty(32, 32);
    CHECK(watershed_split(empty).particles.empty());
}

TEST_CASE("watershed particles are disjoint subsets of the foreground") {
    Rng rng(23);
    BinaryMask m(80, 80);
    for (auto& b : m.bits) b = rng.uniform() < 0.45 ? 1 : 0;
    auto parts = watershed_split(m);
    std::set<std::pair<int, int>> seen;
    for (const auto& p : parts.particles) {
        CHECK(static_cast<int>(p.pixels.size()) >= 25);
        for (const auto& px : p.pixels) {
            CHECK(m.at(px.first, px.second) == 1);
            CHECK(seen.insert(px).second);  // no pixel claimed twice
        }
    }
}

TEST_CASE("minimum enclosing circle of two points spans them") {
    auto c = min_enclosing_circle({{0, 0}, {2, 0}});
    CHECK(c.cx == doctest::Approx(1.0));
    CHECK(c.cy == doctest::Approx(0.0));
    CHECK(c.r == doctest::Approx(1.0));

    auto single = min_enclosing_circle({{3, 4}});
    CHECK(single.r == 0.0);
    CHECK_THROWS_AS(min_enclosing_circle({}), EmptySetError);
}

TEST_CASE("minimum enclosing circle matches the cubic oracle") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(0, 47));
        std::vector<std::pair<double, double>> pts;
        pts.reserve(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) pts.emplace_back(rng.uniform(0, 100), rng.uniform(0, 100));
        const auto fast = min_enclosing_circle(pts);
        const double slow = brute_force_mec_radius(pts);
        CHECK(std::abs(fast.r - slow) <= 1e-7);
        // every point inside
        for (const auto& [x, y] : pts) {
            CHECK(std::hypot(x - fast.cx, y - fast.cy) <= fast.r + 1e-9);
        }
    }
}

TEST_CASE("minimum enclosing circle ignores point order") {
    Rng rng(55);
    std::vector<std::pair<double, double>> pts;
    for (int i = 0; i < 40; ++i) pts.emplace_back(rng.uniform(0, 50), rng.uniform(0, 50));
    auto c1 = min_enclosing_circle(pts);
    std::reverse(pts.begin(), pts.end());
    auto c2 = min_enclosing_circle(pts);
    CHECK(c1.r == doctest::Approx(c2.r).epsilon(1e-12));
    CHECK(c1.cx == doctest::Approx(c2.cx).epsilon(1e-12));
    CHECK(c1.cy == doctest::Approx(c2.cy).epsilon(1e-12));
}

TEST_CASE("max particle size is the largest diameter over the width") {
    auto s1 = particles_from_circles({{{100, 100}, 210}}, 3024);
    CHECK(max_particle_size(s1) == doctest::Approx(420.0 / 3024.0));

    auto s2 = particles_from_circles({{{10, 10}, 5}, {{40, 40}, 9}}, 100);
    CHECK(max_particle_size(s2) == doctest::Approx(0.18));

    ParticleSet empty;
    empty.source_width = 100;
    CHECK_THROWS_AS(max_particle_size(empty), EmptyParticleSetError);
}

TEST_CASE("aggregate voids of two separated circles") {
    auto s = particles_from_circles({{{100, 100}, 5}, {{100, 120}, 5}}, 1000);
    CHECK(aggregate_voids(s) == doctest::Approx(2.0));

    auto touching = particles_from_circles({{{100, 100}, 5}, {{100, 110}, 5}}, 1000);
    CHECK(aggregate_voids(touching) == doctest::Approx(0.0));

    auto one = particles_from_circles({{{100, 100}, 5}}, 1000);
    CHECK_THROWS_AS(aggregate_voids(one), TooFewParticlesError);
}

TEST_CASE("aggregate voids agree with a brute force neighbourhood oracle") {
    Rng rng(99);
    // jittered grid of 20 discs, no symmetric/cocircular degeneracies
    std::vector<std::pair<std::pair<double, double>, double>> discs;
    for (int gy = 0; gy < 4; ++gy) {
        for (int gx = 0; gx < 5; ++gx) {
            const double cx = 60.0 + 90.0 * gx + rng.uniform(-7.0, 7.0);
            const double cy = 60.0 + 90.0 * gy + rng.uniform(-7.0, 7.0);
            discs.push_back({{cx, cy}, rng.uniform(8.0, 16.0)});
        }
    }
    auto s = particles_from_circles(discs, 512);
    const double got = aggregate_voids(s);

    std::vector<std::pair<double, double>> centers;
    for (const auto& [c, r] : discs) centers.push_back(c);
    const auto edges = brute_force_delaunay(centers);
    std::vector<double> max_gap(discs.size(), 0.0);
    for (const auto& [i, j] : edges) {
        const double d = std::hypot(centers[static_cast<std::size_t>(i)].first -
                                        centers[static_cast<std::size_t>(j)].first,
                                    centers[static_cast<std::size_t>(i)].second -
                                        centers[static_cast<std::size_t>(j)].second);
        const double gap = std::max(0.0, d - discs[static_cast<std::size_t>(i)].second -
                                             discs[static_cast<std::size_t>(j)].second);
        max_gap[static_cast<std::size_t>(i)] = std::max(max_gap[static_cast<std::size_t>(i)], gap);
        max_gap[static_cast<std::size_t>(j)] = std::max(max_gap[static_cast<std::size_t>(j)], gap);
    }
    double want = 0.0;
    for (double g : max_gap) want += g;
    want *= 100.0 / 512.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("aggregate voids ignore translation and particle order") {
    Rng rng(7);
    std::vector<std::pair<std::pair<double, double>, double>> discs;
    for (int i = 0; i < 12; ++i) {
        discs.push_back({{rng.uniform(50, 450), rng.uniform(50, 450)}, rng.uniform(5, 12)});
    }
    auto s = particles_from_circles(discs, 512);
    const double base = aggregate_voids(s);

    auto shifted = discs;
    for (auto& [c, r] : shifted) {
        c.first += 31.5;
        c.second -= 12.25;
    }
    CHECK(aggregate_voids(particles_from_circles(shifted, 512)) ==
          doctest::Approx(base).epsilon(1e-9));

    auto reordered = discs;
    std::reverse(reordered.begin(), reordered.end());
    CHECK(aggregate_voids(particles_from_circles(reordered, 512)) ==
          doctest::Approx(base).epsilon(1e-9));
    CHECK(max_particle_size(particles_from_circles(reordered, 512)) ==
          doctest::Approx(max_particle_size(s)).epsilon(1e-12));
}

TEST_CASE("collinear particle centers fall back to nearest neighbours") {
    auto s = particles_from_circles({{{50, 100}, 5}, {{100, 100}, 5}, {{170, 100}, 5}}, 1000);
    // nearest-neighbour adjacency is {0,1} and {1,2} with gaps 40 and 60,
    // so the per-particle maxima are 40, 60, 60
    CHECK(aggregate_voids(s) == doctest::Approx(100.0 * (40 + 60 + 60) / 1000.0));
}

TEST_CASE("mask pgm round trip") {
    Rng rng(3);
    BinaryMask m(33, 17);
    for (auto& b : m.bits) b = rng.uniform() < 0.5 ? 1 : 0;
    const auto path = std::filesystem::temp_directory_path() / "pavetex_mask.pgm";
    write_mask_pgm(m, path.string());
    auto back = read_mask_pgm(path.string());
    CHECK(back == m);
    std::filesystem::remove(path);
}

TEST_CASE("full feature extraction on a synthetic scene") {
    // bright (deep) ground at 0.8 with dark (raised) discs at 0.2
    const std::vector<std::pair<std::pair<double, double>, double>> discs = {
        {{50, 50}, 15}, {{150, 55}, 12}, {{210, 60}, 14}, {{60, 150}, 16},
        {{140, 145}, 11}, {{205, 150}, 13}, {{55, 215}, 12}, {{150, 210}, 15},
    };
    DepthMap m(256, 256);
    for (auto& v : m.values) v = 0.8f;
    for (int y = 0; y < 256; ++y) {
        for (int x = 0; x < 256; ++x) {
            for (const auto& [c, r] : discs) {
                const double dx = x - c.first, dy = y - c.second;
                if (dx * dx + dy * dy <= r * r) m.at(x, y) = 0.2f;
            }
        }
    }
    auto fv = extract_features(m, FeatureConfig{});
    // concave fraction = share of ground pixels (depth 0.8 > 0.35)
    double disc_area = 0.0;
    for (const auto& [c, r] : discs) disc_area += 3.14159265358979 * r * r;
    CHECK(fv.p == doctest::Approx(1.0 - disc_area / (256.0 * 256.0)).epsilon(0.01));
    CHECK(fv.d == doctest::Approx(2.0 * 16.0 / 256.0).epsilon(0.1));
    CHECK(fv.k > 0.0);

    auto again = extract_features(m, FeatureConfig{});
    CHECK(again.p == fv.p);
    CHECK(again.d == fv.d);
    CHECK(again.k == fv.k);
}

TEST_CASE("a featureless map has no particles to measure") {
    DepthMap flat(64, 64);
    for (auto& v : flat.values) v = 0.9f;
    auto mask = threshold_segment(flat, 0.35);
    CHECK(concavity_ratio(mask) == 1.0);
    CHECK_THROWS_AS(extract_features(flat, FeatureConfig{}), EmptyParticleSetError);
}

#include "pavetex/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <string>
#include <tuple>

#include "pavetex/errors.hpp"
#include "pavetex/rng.hpp"

namespace pavetex {

namespace {

constexpr double kFarAway = 1e20;  // stands in for infinity inside the distance transform

void check_mask(const BinaryMask& m) {
    if (m.width < 1 || m.height < 1 ||
        m.bits.size() != static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height)) {
        throw Error("malformed binary mask");
    }
}

// One-dimensional squared distance transform (lower envelope of parabolas).
void dt_1d(const std::vector<double>& f, int n, std::vector<double>& d, std::vector<int>& v,
           std::vector<double>& z) {
    int k = 0;
    v[0] = 0;
    z[0] = -kFarAway;
    z[1] = kFarAway;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + static_cast<double>(q) * q) -
                    (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kFarAway;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

struct IntegralMean {
    // Integral image over a replicate-padded copy, so every window is full.
    int width, height, half;
    std::vector<double> integral;  // (W+2h+1) x (H+2h+1)

    IntegralMean(const DepthMap& map, int window)
        : width(map.width), height(map.height), half(window / 2) {
        const int pw = width + 2 * half, ph = height + 2 * half;
        integral.assign(static_cast<std::size_t>(pw + 1) * (ph + 1), 0.0);
        for (int y = 0; y < ph; ++y) {
            const int sy = std::clamp(y - half, 0, height - 1);
            double rowsum = 0.0;
            for (int x = 0; x < pw; ++x) {
                const int sx = std::clamp(x - half, 0, width - 1);
                rowsum += map.at(sx, sy);
                integral[static_cast<std::size_t>(y + 1) * (pw + 1) + (x + 1)] =
                    integral[static_cast<std::size_t>(y) * (pw + 1) + (x + 1)] + rowsum;
            }
        }
    }

    double mean(int x, int y) const {
        // window [x-half, x+half] in image coords = [x, x+2half] in padded coords
        const int pw = width + 2 * half;
        const int x0 = x, y0 = y, x1 = x + 2 * half + 1, y1 = y + 2 * half + 1;
        const double s = integral[static_cast<std::size_t>(y1) * (pw + 1) + x1] -
                         integral[static_cast<std::size_t>(y0) * (pw + 1) + x1] -
                         integral[static_cast<std::size_t>(y1) * (pw + 1) + x0] +
                         integral[static_cast<std::size_t>(y0) * (pw + 1) + x0];
        const int w = 2 * half + 1;
        return s / (static_cast<double>(w) * w);
    }
};

// Sliding maximum over a centered window of radius `half`, monotone deque.
std::vector<double> sliding_max_1d(const std::vector<double>& in, int n, int half) {
    std::vector<double> out(static_cast<std::size_t>(n));
    std::deque<int> dq;
    for (int i = 0; i < n + half; ++i) {
        if (i < n) {
            while (!dq.empty() && in[static_cast<std::size_t>(dq.back())] <=
                                      in[static_cast<std::size_t>(i)]) {
                dq.pop_back();
            }
            dq.push_back(i);
        }
        const int center = i - half;
        if (center >= 0 && center < n) {
            while (dq.front() < center - half) dq.pop_front();
            out[static_cast<std::size_t>(center)] = in[static_cast<std::size_t>(dq.front())];
        }
    }
    return out;
}

std::vector<double> window_max(const std::vector<double>& grid, int w, int h, int half) {
    std::vector<double> tmp(grid.size()), out(grid.size());
    std::vector<double> line(static_cast<std::size_t>(std::max(w, h)));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) line[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * w + x];
        auto mx = sliding_max_1d(line, w, half);
        for (int x = 0; x < w; ++x) tmp[static_cast<std::size_t>(y) * w + x] = mx[static_cast<std::size_t>(x)];
    }
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) line[static_cast<std::size_t>(y)] = tmp[static_cast<std::size_t>(y) * w + x];
        auto mx = sliding_max_1d(line, h, half);
        for (int y = 0; y < h; ++y) out[static_cast<std::size_t>(y) * w + x] = mx[static_cast<std::size_t>(y)];
    }
    return out;
}

bool circle_contains(const Circle& c, double px, double py) {
    const double dx = px - c.cx, dy = py - c.cy;
    return dx * dx + dy * dy <= c.r * c.r * (1.0 + 1e-12) + 1e-12;
}

Circle circle_from_two(double ax, double ay, double bx, double by) {
    Circle c;
    c.cx = 0.5 * (ax + bx);
    c.cy = 0.5 * (ay + by);
    c.r = 0.5 * std::hypot(bx - ax, by - ay);
    return c;
}

Circle circle_from_three(double ax, double ay, double bx, double by, double cx, double cy) {
    const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if (std::abs(d) < 1e-12) {
        // collinear: the two farthest apart span the circle
        Circle best = circle_from_two(ax, ay, bx, by);
        Circle alt = circle_from_two(ax, ay, cx, cy);
        if (alt.r > best.r) best = alt;
        alt = circle_from_two(bx, by, cx, cy);
        if (alt.r > best.r) best = alt;
        return best;
    }
    const double a2 = ax * ax + ay * ay;
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    Circle c;
    c.cx = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    c.cy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    c.r = std::hypot(ax - c.cx, ay - c.cy);
    return c;
}

// ---- Delaunay triangulation (Bowyer-Watson) for the void adjacency ----

struct Tri {
    int a, b, c;
    double ccx, ccy, cr2;  // circumcircle
};

Tri make_tri(int a, int b, int c, const std::vector<std::pair<double, double>>& pts) {
    Tri t{a, b, c, 0.0, 0.0, 0.0};
    const auto [ax, ay] = pts[static_cast<std::size_t>(a)];
    const auto [bx, by] = pts[static_cast<std::size_t>(b)];
    const auto [cx, cy] = pts[static_cast<std::size_t>(c)];
    const double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if (d == 0.0) {
        t.cr2 = std::numeric_limits<double>::infinity();
        return t;
    }
    const double a2 = ax * ax + ay * ay;
    const double b2 = bx * bx + by * by;
    const double c2 = cx * cx + cy * cy;
    t.ccx = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    t.ccy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    const double dx = ax - t.ccx, dy = ay - t.ccy;
    t.cr2 = dx * dx + dy * dy;
    return t;
}

std::set<std::pair<int, int>> delaunay_edges(const std::vector<std::pair<double, double>>& centers) {
    const int n = static_cast<int>(centers.size());
    double lox = centers[0].first, hix = lox, loy = centers[0].second, hiy = loy;
    for (const auto& [x, y] : centers) {
        lox = std::min(lox, x);
        hix = std::max(hix, x);
        loy = std::min(loy, y);
        hiy = std::max(hiy, y);
    }
    const double span = std::max({hix - lox, hiy - loy, 1.0});
    const double mx = 0.5 * (lox + hix), my = 0.5 * (loy + hiy);

    auto pts = centers;
    pts.emplace_back(mx - 20.0 * span, my - 10.0 * span);
    pts.emplace_back(mx + 20.0 * span, my - 10.0 * span);
    pts.emplace_back(mx, my + 20.0 * span);
    const int s0 = n, s1 = n + 1, s2 = n + 2;

    std::vector<Tri> tris{make_tri(s0, s1, s2, pts)};
    for (int p = 0; p < n; ++p) {
        const double px = pts[static_cast<std::size_t>(p)].first;
        const double py = pts[static_cast<std::size_t>(p)].second;
        std::vector<Tri> keep;
        std::vector<std::pair<int, int>> cavity;
        for (const auto& t : tris) {
            const double dx = px - t.ccx, dy = py - t.ccy;
            const bool bad = dx * dx + dy * dy < t.cr2;
            if (!bad) {
                keep.push_back(t);
                continue;
            }
            const std::pair<int, int> edges[3] = {{t.a, t.b}, {t.b, t.c}, {t.c, t.a}};
            for (auto [u, v] : edges) {
                if (u > v) std::swap(u, v);
                auto it = std::find(cavity.begin(), cavity.end(), std::make_pair(u, v));
                if (it != cavity.end()) {
                    cavity.erase(it);  // interior edge, shared by two bad triangles
                } else {
                    cavity.emplace_back(u, v);
                }
            }
        }
        tris = std::move(keep);
        for (const auto& [u, v] : cavity) tris.push_back(make_tri(u, v, p, pts));
    }

    std::set<std::pair<int, int>> edges;
    for (const auto& t : tris) {
        if (t.a >= n || t.b >= n || t.c >= n) continue;  // touches the enclosing frame
        const std::pair<int, int> es[3] = {{t.a, t.b}, {t.b, t.c}, {t.c, t.a}};
        for (auto [u, v] : es) {
            if (u > v) std::swap(u, v);
            edges.insert({u, v});
        }
    }
    return edges;
}

std::set<std::pair<int, int>> nearest_neighbour_edges(
    const std::vector<std::pair<double, double>>& centers) {
    const int n = static_cast<int>(centers.size());
    std::set<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) {
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = centers[static_cast<std::size_t>(i)].first -
                              centers[static_cast<std::size_t>(j)].first;
            const double dy = centers[static_cast<std::size_t>(i)].second -
                              centers[static_cast<std::size_t>(j)].second;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best_d2 = d2;
                best = j;
            }
        }
        edges.insert({std::min(i, best), std::max(i, best)});
    }
    return edges;
}

bool all_collinear(const std::vector<std::pair<double, double>>& pts) {
    const int n = static_cast<int>(pts.size());
    if (n < 3) return true;
    double span2 = 0.0;
    for (const auto& [x, y] : pts) {
        const double dx = x - pts[0].first, dy = y - pts[0].second;
        span2 = std::max(span2, dx * dx + dy * dy);
    }
    for (int i = 1; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double cross = (pts[static_cast<std::size_t>(i)].first - pts[0].first) *
                                     (pts[static_cast<std::size_t>(j)].second - pts[0].second) -
                                 (pts[static_cast<std::size_t>(i)].second - pts[0].second) *
                                     (pts[static_cast<std::size_t>(j)].first - pts[0].first);
            if (std::abs(cross) > 1e-9 * std::max(span2, 1.0)) return false;
        }
    }
    return true;
}

}  // namespace

std::size_t BinaryMask::foreground_count() const {
    std::size_t n = 0;
    for (uint8_t b : bits) n += (b != 0);
    return n;
}

BinaryMask threshold_segment(const DepthMap& map, double t) {
    map.validate();
    if (!(t > 0.0) || !(t < 1.0)) {
        throw ThresholdOutOfRangeError("segmentation threshold must lie in (0,1), got " +
                                       std::to_string(t));
    }
    BinaryMask mask(map.width, map.height);
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const float v = map.values[i];
        if (v < 0.0f || v > 1.0f) {
            throw Error("threshold segmentation expects a normalized map in [0,1]");
        }
        mask.bits[i] = v > t ? 1 : 0;
    }
    return mask;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    check_mask(a);
    check_mask(b);
    if (a.width != b.width || a.height != b.height) {
        throw ShapeMismatchError("iou requires masks of equal dimensions");
    }
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) {
        const bool fa = a.bits[i] != 0, fb = b.bits[i] != 0;
        inter += (fa && fb);
        uni += (fa || fb);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double concavity_ratio(const BinaryMask& mask) {
    check_mask(mask);
    return static_cast<double>(mask.foreground_count()) /
           static_cast<double>(mask.bits.size());
}

BinaryMask local_adaptive_binarize(const DepthMap& map, const BinarizeConfig& cfg) {
    map.validate();
    if (cfg.window < 3 || cfg.window % 2 == 0) {
        throw InvalidWindowError("binarize window must be odd and >= 3");
    }
    if (cfg.k_bias < 0.0 || cfg.k_bias > 1.0) {
        throw ConfigError("binarize bias must lie in [0,1]");
    }
    const IntegralMean means(map, cfg.window);
    BinaryMask mask(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const double I = map.at(x, y);
            const double m = means.mean(x, y);
            const double delta = I - m;
            if (delta >= 1.0) continue;  // background by convention
            const double T = m * (1.0 + cfg.k_bias * (delta / (1.0 - delta) - 1.0));
            mask.at(x, y) = I < T ? 1 : 0;
        }
    }
    return mask;
}

std::vector<double> squared_distance_transform(const BinaryMask& mask) {
    check_mask(mask);
    const int w = mask.width, h = mask.height;
    std::vector<double> grid(mask.bits.size());
    bool any_bg = false;
    for (std::size_t i = 0; i < mask.bits.size(); ++i) {
        grid[i] = mask.bits[i] ? kFarAway : 0.0;
        any_bg |= (mask.bits[i] == 0);
    }
    if (!any_bg) {
        // no background anywhere: cap at the map diagonal
        std::fill(grid.begin(), grid.end(),
                  static_cast<double>(w) * w + static_cast<double>(h) * h);
        return grid;
    }

    const int n = std::max(w, h);
    std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n)),
        z(static_cast<std::size_t>(n) + 1);
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(x)] = grid[static_cast<std::size_t>(y) * w + x];
        dt_1d(f, w, d, v, z);
        for (int x = 0; x < w; ++x) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(x)];
    }
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) f[static_cast<std::size_t>(y)] = grid[static_cast<std::size_t>(y) * w + x];
        dt_1d(f, h, d, v, z);
        for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = d[static_cast<std::size_t>(y)];
    }
    return grid;
}

ParticleSet watershed_split(const BinaryMask& mask, const WatershedConfig& cfg) {
    check_mask(mask);
    if (cfg.min_separation < 1 || cfg.min_area < 1 || cfg.marker_rel_threshold < 0.0 ||
        cfg.marker_rel_threshold > 1.0) {
        throw ConfigError("invalid watershed configuration");
    }
    ParticleSet out;
    out.source_width = mask.width;
    if (mask.foreground_count() == 0) return out;

    const int w = mask.width, h = mask.height;
    const auto edt2 = squared_distance_transform(mask);
    const double max_d2 = *std::max_element(edt2.begin(), edt2.end());
    const double floor_d2 =
        cfg.marker_rel_threshold * cfg.marker_rel_threshold * max_d2;

    // Marker candidates: window maxima of the distance map over the
    // separation radius, tall enough relative to the global peak.
    const auto winmax = window_max(edt2, w, h, cfg.min_separation);
    struct Cand {
        double d2;
        int x, y;
    };
    std::vector<Cand> cands;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (mask.bits[i] && edt2[i] > 0.0 && edt2[i] == winmax[i] && edt2[i] >= floor_d2) {
                cands.push_back({edt2[i], x, y});
            }
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d2 != b.d2) return a.d2 > b.d2;
        if (a.y != b.y) return a.y < b.y;
        return a.x < b.x;
    });
    std::vector<Cand> markers;
    const double min_sep2 = static_cast<double>(cfg.min_separation) * cfg.min_separation;
    for (const auto& c : cands) {
        bool clear = true;
        for (const auto& m : markers) {
            const double dx = c.x - m.x, dy = c.y - m.y;
            if (dx * dx + dy * dy < min_sep2) {
                clear = false;
                break;
            }
        }
        if (clear) markers.push_back(c);
    }
    if (markers.empty()) return out;

    // Priority flood outward from the markers, deepest pixels first,
    // (y,x) lexicographic order breaking ties.
    struct Node {
        double d2;
        int y, x, label;
    };
    const auto lower_priority = [](const Node& a, const Node& b) {
        if (a.d2 != b.d2) return a.d2 < b.d2;
        if (a.y != b.y) return a.y > b.y;
        return a.x > b.x;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(lower_priority)> queue(lower_priority);
    std::vector<int> labels(mask.bits.size(), 0);
    for (std::size_t i = 0; i < markers.size(); ++i) {
        const auto& m = markers[i];
        labels[static_cast<std::size_t>(m.y) * w + m.x] = static_cast<int>(i) + 1;
        queue.push({m.d2, m.y, m.x, static_cast<int>(i) + 1});
    }
    const int dx4[4] = {0, 0, -1, 1};
    const int dy4[4] = {-1, 1, 0, 0};
    while (!queue.empty()) {
        const Node node = queue.top();
        queue.pop();
        for (int k = 0; k < 4; ++k) {
            const int nx = node.x + dx4[k], ny = node.y + dy4[k];
            if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
            const std::size_t i = static_cast<std::size_t>(ny) * w + nx;
            if (!mask.bits[i] || labels[i] != 0) continue;
            labels[i] = node.label;
            queue.push({edt2[i], ny, nx, node.label});
        }
    }

    std::vector<std::vector<std::pair<int, int>>> groups(markers.size() + 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int l = labels[static_cast<std::size_t>(y) * w + x];
            if (l > 0) groups[static_cast<std::size_t>(l)].emplace_back(x, y);
        }
    }
    int next_label = 1;
    for (std::size_t g = 1; g < groups.size(); ++g) {
        if (static_cast<int>(groups[g].size()) < cfg.min_area) continue;
        Particle p;
        p.label = next_label++;
        p.pixels = std::move(groups[g]);
        std::vector<std::pair<double, double>> pts;
        pts.reserve(p.pixels.size());
        for (const auto& [x, y] : p.pixels) pts.emplace_back(x, y);
        p.circle = min_enclosing_circle(pts);
        out.particles.push_back(std::move(p));
    }
    return out;
}

Circle min_enclosing_circle(const std::vector<std::pair<double, double>>& points) {
    if (points.empty()) throw EmptySetError("minimum enclosing circle of an empty set");
    auto pts = points;
    Rng rng(0x5DEECE66Dull);  // fixed stream: result must not depend on input order
    rng.shuffle(pts);

    const int n = static_cast<int>(pts.size());
    Circle c{pts[0].first, pts[0].second, 0.0};
    for (int i = 1; i < n; ++i) {
        if (circle_contains(c, pts[static_cast<std::size_t>(i)].first,
                            pts[static_cast<std::size_t>(i)].second)) {
            continue;
        }
        c = Circle{pts[static_cast<std::size_t>(i)].first, pts[static_cast<std::size_t>(i)].second,
                   0.0};
        for (int j = 0; j < i; ++j) {
            if (circle_contains(c, pts[static_cast<std::size_t>(j)].first,
                                pts[static_cast<std::size_t>(j)].second)) {
                continue;
            }
            c = circle_from_two(pts[static_cast<std::size_t>(i)].first,
                                pts[static_cast<std::size_t>(i)].second,
                                pts[static_cast<std::size_t>(j)].first,
                                pts[static_cast<std::size_t>(j)].second);
            for (int q = 0; q < j; ++q) {
                if (circle_contains(c, pts[static_cast<std::size_t>(q)].first,
                                    pts[static_cast<std::size_t>(q)].second)) {
                    continue;
                }
                c = circle_from_three(pts[static_cast<std::size_t>(i)].first,
                                      pts[static_cast<std::size_t>(i)].second,
                                      pts[static_cast<std::size_t>(j)].first,
                                      pts[static_cast<std::size_t>(j)].second,
                                      pts[static_cast<std::size_t>(q)].first,
                                      pts[static_cast<std::size_t>(q)].second);
            }
        }
    }
    return c;
}

double max_particle_size(const ParticleSet& set) {
    if (set.particles.empty()) throw EmptyParticleSetError("no particles to size");
    if (set.source_width < 1) throw Error("particle set lacks a source width");
    double max_r = 0.0;
    for (const auto& p : set.particles) max_r = std::max(max_r, p.circle.r);
    return 2.0 * max_r / static_cast<double>(set.source_width);
}

double aggregate_voids(const ParticleSet& set) {
    const int n = static_cast<int>(set.particles.size());
    if (n < 2) throw TooFewParticlesError("aggregate voids need at least 2 particles");
    if (set.source_width < 1) throw Error("particle set lacks a source width");

    std::vector<std::pair<double, double>> centers;
    centers.reserve(static_cast<std::size_t>(n));
    for (const auto& p : set.particles) centers.emplace_back(p.circle.cx, p.circle.cy);

    std::set<std::pair<int, int>> edges;
    if (n == 2) {
        edges.insert({0, 1});
    } else if (all_collinear(centers)) {
        edges = nearest_neighbour_edges(centers);
    } else {
        edges = delaunay_edges(centers);
        if (edges.empty()) edges = nearest_neighbour_edges(centers);
    }

    std::vector<double> max_gap(static_cast<std::size_t>(n), 0.0);
    std::vector<bool> has_neighbour(static_cast<std::size_t>(n), false);
    for (const auto& [i, j] : edges) {
        const auto& a = set.particles[static_cast<std::size_t>(i)].circle;
        const auto& b = set.particles[static_cast<std::size_t>(j)].circle;
        const double gap =
            std::max(0.0, std::hypot(a.cx - b.cx, a.cy - b.cy) - a.r - b.r);
        max_gap[static_cast<std::size_t>(i)] = std::max(max_gap[static_cast<std::size_t>(i)], gap);
        max_gap[static_cast<std::size_t>(j)] = std::max(max_gap[static_cast<std::size_t>(j)], gap);
        has_neighbour[static_cast<std::size_t>(i)] = true;
        has_neighbour[static_cast<std::size_t>(j)] = true;
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (has_neighbour[static_cast<std::size_t>(i)]) total += max_gap[static_cast<std::size_t>(i)];
    }
    return 100.0 * total / static_cast<double>(set.source_width);
}

FeatureVector extract_features(const DepthMap& map, const FeatureConfig& cfg) {
    FeatureVector fv;
    fv.p = concavity_ratio(threshold_segment(map, cfg.threshold));
    const auto mask = local_adaptive_binarize(map, cfg.binarize);
    const auto particles = watershed_split(mask, cfg.watershed);
    if (particles.particles.empty()) {
        throw EmptyParticleSetError("binarization produced no particles");
    }
    fv.d = max_particle_size(particles);
    fv.k = aggregate_voids(particles);
    return fv;
}

void write_mask_pgm(const BinaryMask& mask, const std::string& path) {
    check_mask(mask);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(mask.width));
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) row[static_cast<std::size_t>(x)] = mask.at(x, y) ? 255 : 0;
        out.write(reinterpret_cast<const char*>(row.data()), mask.width);
    }
    if (!out) throw IoError("failed writing " + path);
}

BinaryMask read_mask_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (!in || magic != "P5") throw ParseError(path + ": not a binary PGM (expected 'P5')");
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
        throw ParseError(path + ": unsupported PGM geometry");
    }
    in.get();  // single whitespace after the header
    BinaryMask mask(w, h);
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), w);
        if (!in) throw ParseError(path + ": truncated PGM pixel data");
        for (int x = 0; x < w; ++x) mask.at(x, y) = row[static_cast<std::size_t>(x)] ? 1 : 0;
    }
    return mask;
}

void write_particles_csv(const ParticleSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "label,cx,cy,radius,area\n";
    char buf[160];
    for (const auto& p : set.particles) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%zu\n", p.label, p.circle.cx,
                      p.circle.cy, p.circle.r, p.pixels.size());
        out << buf;
    }
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace pavetex

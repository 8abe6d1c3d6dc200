#include "pavetex/correct.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "pavetex/errors.hpp"
#include "pavetex/rng.hpp"

namespace pavetex {

namespace {

// Monomial exponents for the cubic basis 1, x, y, x^2, xy, y^2, x^3, x^2y, xy^2, y^3.
constexpr int kPx[10] = {0, 1, 0, 2, 1, 0, 3, 2, 1, 0};
constexpr int kPy[10] = {0, 0, 1, 0, 1, 2, 0, 1, 2, 3};

struct Candidate {
    int x, y;
    float z;
};

void fill_basis(double u, double v, double* row) {
    row[0] = 1.0;
    row[1] = u;
    row[2] = v;
    row[3] = u * u;
    row[4] = u * v;
    row[5] = v * v;
    row[6] = row[3] * u;
    row[7] = row[3] * v;
    row[8] = u * row[5];
    row[9] = row[5] * v;
}

void check_config(const RansacConfig& cfg) {
    if (cfg.iterations < 1) throw ConfigError("ransac iterations must be >= 1");
    if (!(cfg.inlier_threshold > 0.0)) throw ConfigError("ransac inlier threshold must be > 0");
    if (!(cfg.min_inlier_fraction > 0.0) || cfg.min_inlier_fraction > 1.0) {
        throw ConfigError("ransac min inlier fraction must lie in (0,1]");
    }
}

// Uniform stride so consensus counting stays bounded on large maps;
// the full map never matters for fits once the inlier set is dense.
std::vector<Candidate> collect_candidates(const DepthMap& map) {
    map.validate();
    const std::size_t total = map.values.size();
    constexpr std::size_t kMaxPoints = 262144;  // 512 * 512
    int stride = 1;
    if (total > kMaxPoints) {
        stride = static_cast<int>(
            std::ceil(std::sqrt(static_cast<double>(total) / static_cast<double>(kMaxPoints))));
    }
    std::vector<Candidate> pts;
    pts.reserve(total / static_cast<std::size_t>(stride * stride) + map.width + map.height);
    for (int y = 0; y < map.height; y += stride) {
        for (int x = 0; x < map.width; x += stride) {
            pts.push_back({x, y, map.at(x, y)});
        }
    }
    return pts;
}

void draw_distinct(Rng& rng, int n, int* idx, int count) {
    for (int i = 0; i < count; ++i) {
        for (;;) {
            const int v = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(n) - 1));
            bool dup = false;
            for (int j = 0; j < i; ++j) dup |= (idx[j] == v);
            if (!dup) {
                idx[i] = v;
                break;
            }
        }
    }
}

double binom(int n, int k) {
    static const double table[4][4] = {
        {1, 0, 0, 0}, {1, 1, 0, 0}, {1, 2, 1, 0}, {1, 3, 3, 1}};
    return table[n][k];
}

int basis_index(int px, int py) {
    for (int k = 0; k < 10; ++k) {
        if (kPx[k] == px && kPy[k] == py) return k;
    }
    throw Error("monomial degree out of range");
}

}  // namespace

double CubicSurfaceModel::operator()(double x, double y) const {
    double row[10];
    fill_basis(x, y, row);
    double acc = 0.0;
    for (int k = 0; k < 10; ++k) acc += coef[k] * row[k];
    return acc;
}

PlaneModel ransac_plane_fit(const DepthMap& map, const RansacConfig& cfg) {
    check_config(cfg);
    const auto pts = collect_candidates(map);
    const int n = static_cast<int>(pts.size());
    if (n < 3) throw DegenerateInputError("plane fit needs at least 3 points");

    Rng rng(cfg.seed);
    int best_count = -1;
    double best_resid = std::numeric_limits<double>::infinity();
    double best_a = 0, best_b = 0, best_c = 0;

    for (int it = 0; it < cfg.iterations; ++it) {
        int idx[3];
        draw_distinct(rng, n, idx, 3);
        const auto &p0 = pts[idx[0]], &p1 = pts[idx[1]], &p2 = pts[idx[2]];
        // Integer determinant: exact collinearity test on pixel coordinates.
        const int64_t det = static_cast<int64_t>(p0.x) * (p1.y - p2.y) -
                            static_cast<int64_t>(p0.y) * (p1.x - p2.x) +
                            (static_cast<int64_t>(p1.x) * p2.y - static_cast<int64_t>(p2.x) * p1.y);
        if (det == 0) continue;

        const double d = static_cast<double>(det);
        const double z0 = p0.z, z1 = p1.z, z2 = p2.z;
        const double a =
            (z0 * (p1.y - p2.y) + z1 * (p2.y - p0.y) + z2 * (p0.y - p1.y)) / d;
        const double b =
            (z0 * (p2.x - p1.x) + z1 * (p0.x - p2.x) + z2 * (p1.x - p0.x)) / d;
        const double c = z0 - a * p0.x - b * p0.y;

        int count = 0;
        double resid = 0.0;
        for (const auto& p : pts) {
            const double r = std::abs(p.z - (a * p.x + b * p.y + c));
            if (r <= cfg.inlier_threshold) {
                ++count;
                resid += r;
            }
        }
        if (count > best_count || (count == best_count && resid < best_resid)) {
            best_count = count;
            best_resid = resid;
            best_a = a;
            best_b = b;
            best_c = c;
        }
    }

    if (best_count < 0) {
        throw DegenerateInputError("all sampled triples were collinear");
    }
    if (static_cast<double>(best_count) < cfg.min_inlier_fraction * n) {
        throw NoConsensusError("best plane covers " + std::to_string(best_count) + " of " +
                               std::to_string(n) + " points");
    }

    // Least-squares refit on the winning consensus set.
    Eigen::MatrixXd A(best_count, 3);
    Eigen::VectorXd rhs(best_count);
    int row = 0;
    for (const auto& p : pts) {
        const double r = std::abs(p.z - (best_a * p.x + best_b * p.y + best_c));
        if (r <= cfg.inlier_threshold) {
            A(row, 0) = p.x;
            A(row, 1) = p.y;
            A(row, 2) = 1.0;
            rhs(row) = p.z;
            ++row;
        }
    }
    const Eigen::Vector3d sol = A.colPivHouseholderQr().solve(rhs);
    return PlaneModel{sol(0), sol(1), sol(2)};
}

CubicSurfaceModel ransac_cubic_fit(const DepthMap& map, const RansacConfig& cfg) {
    check_config(cfg);
    const auto pts = collect_candidates(map);
    const int n = static_cast<int>(pts.size());
    if (n < 10) throw DegenerateInputError("cubic fit needs at least 10 points");

    // Fit in coordinates scaled to [-1,1] for conditioning.
    const double ax = map.width > 1 ? 2.0 / (map.width - 1) : 0.0;
    const double ay = map.height > 1 ? 2.0 / (map.height - 1) : 0.0;
    const double bx = map.width > 1 ? -1.0 : 0.0;
    const double by = map.height > 1 ? -1.0 : 0.0;
    const auto scaled_row = [&](const Candidate& p, double* row) {
        fill_basis(ax * p.x + bx, ay * p.y + by, row);
    };

    Rng rng(cfg.seed);
    int best_count = -1;
    double best_resid = std::numeric_limits<double>::infinity();
    Eigen::Matrix<double, 10, 1> best_sol = Eigen::Matrix<double, 10, 1>::Zero();

    Eigen::Matrix<double, 10, 10> M;
    Eigen::Matrix<double, 10, 1> z;
    for (int it = 0; it < cfg.iterations; ++it) {
        int idx[10];
        draw_distinct(rng, n, idx, 10);
        for (int i = 0; i < 10; ++i) {
            double row[10];
            scaled_row(pts[idx[i]], row);
            for (int k = 0; k < 10; ++k) M(i, k) = row[k];
            z(i) = pts[idx[i]].z;
        }
        const auto qr = M.colPivHouseholderQr();
        if (qr.rank() < 10) continue;  // degenerate sample, e.g. points on a conic
        const Eigen::Matrix<double, 10, 1> sol = qr.solve(z);

        int count = 0;
        double resid = 0.0;
        for (const auto& p : pts) {
            double row[10];
            scaled_row(p, row);
            double pred = 0.0;
            for (int k = 0; k < 10; ++k) pred += sol(k) * row[k];
            const double r = std::abs(p.z - pred);
            if (r <= cfg.inlier_threshold) {
                ++count;
                resid += r;
            }
        }
        if (count > best_count || (count == best_count && resid < best_resid)) {
            best_count = count;
            best_resid = resid;
            best_sol = sol;
        }
    }

    if (best_count < 0) {
        throw DegenerateInputError("no well-posed 10-point sample found");
    }
    if (static_cast<double>(best_count) < cfg.min_inlier_fraction * n) {
        throw NoConsensusError("best surface covers " + std::to_string(best_count) + " of " +
                               std::to_string(n) + " points");
    }

    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
        double row[10];
        scaled_row(pts[i], row);
        double pred = 0.0;
        for (int k = 0; k < 10; ++k) pred += best_sol(k) * row[k];
        if (std::abs(pts[i].z - pred) <= cfg.inlier_threshold) inliers.push_back(i);
    }
    Eigen::MatrixXd A(inliers.size(), 10);
    Eigen::VectorXd rhs(inliers.size());
    for (std::size_t i = 0; i < inliers.size(); ++i) {
        double row[10];
        scaled_row(pts[inliers[i]], row);
        for (int k = 0; k < 10; ++k) A(static_cast<Eigen::Index>(i), k) = row[k];
        rhs(static_cast<Eigen::Index>(i)) = pts[inliers[i]].z;
    }
    const Eigen::VectorXd refit = A.colPivHouseholderQr().solve(rhs);

    // Expand the scaled-coordinate polynomial back to pixel coordinates:
    // u^p v^q with u = ax*x + bx contributes binomially to each x^a y^b.
    CubicSurfaceModel model;
    for (int k = 0; k < 10; ++k) {
        const double c = refit(k);
        const int p = kPx[k], q = kPy[k];
        for (int a = 0; a <= p; ++a) {
            for (int b = 0; b <= q; ++b) {
                const double w = c * binom(p, a) * std::pow(ax, a) * std::pow(bx, p - a) *
                                 binom(q, b) * std::pow(ay, b) * std::pow(by, q - b);
                model.coef[static_cast<std::size_t>(basis_index(a, b))] += w;
            }
        }
    }
    return model;
}

DepthMap subtract_fit(const DepthMap& map, const PlaneModel& model) {
    map.validate();
    if (!std::isfinite(model.a) || !std::isfinite(model.b) || !std::isfinite(model.c)) {
        throw Error("plane model has non-finite coefficients");
    }
    DepthMap out(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            out.at(x, y) = static_cast<float>(map.at(x, y) - model(x, y));
        }
    }
    return out;
}

DepthMap subtract_fit(const DepthMap& map, const CubicSurfaceModel& model) {
    map.validate();
    for (double c : model.coef) {
        if (!std::isfinite(c)) throw Error("surface model has non-finite coefficients");
    }
    DepthMap out(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            out.at(x, y) = static_cast<float>(map.at(x, y) - model(x, y));
        }
    }
    return out;
}

double profile_slope(const Profile& profile) {
    if (profile.samples.size() < 2) {
        throw TooFewSamplesError("slope needs at least 2 samples");
    }
    double sx = 0.0, sz = 0.0;
    for (const auto& [x, z] : profile.samples) {
        sx += x;
        sz += z;
    }
    const double n = static_cast<double>(profile.samples.size());
    const double mx = sx / n, mz = sz / n;
    double sxx = 0.0, sxz = 0.0;
    for (const auto& [x, z] : profile.samples) {
        sxx += (x - mx) * (x - mx);
        sxz += (x - mx) * (z - mz);
    }
    return sxz / sxx;
}

}  // namespace pavetex

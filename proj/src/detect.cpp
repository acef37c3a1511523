#include "crackalign/detect.hpp"

#include "crackalign/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace crackalign {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Quadratic-fit offset from the 3x3x3 response neighbourhood; one Newton
// step, each component clamped to [-0.5, 0.5]. `cube[ds+1][dy+1][dx+1]`.
void subpixel_offset(const double cube[3][3][3], double& ox, double& oy, double& os) {
    const double dx = 0.5 * (cube[1][1][2] - cube[1][1][0]);
    const double dy = 0.5 * (cube[1][2][1] - cube[1][0][1]);
    const double ds = 0.5 * (cube[2][1][1] - cube[0][1][1]);
    const double dxx = cube[1][1][2] - 2.0 * cube[1][1][1] + cube[1][1][0];
    const double dyy = cube[1][2][1] - 2.0 * cube[1][1][1] + cube[1][0][1];
    const double dss = cube[2][1][1] - 2.0 * cube[1][1][1] + cube[0][1][1];
    const double dxy = 0.25 * (cube[1][2][2] - cube[1][2][0] - cube[1][0][2] + cube[1][0][0]);
    const double dxs = 0.25 * (cube[2][1][2] - cube[2][1][0] - cube[0][1][2] + cube[0][1][0]);
    const double dys = 0.25 * (cube[2][2][1] - cube[2][0][1] - cube[0][2][1] + cube[0][0][1]);

    // solve H * delta = -g by Cramer's rule
    const double det = dxx * (dyy * dss - dys * dys) - dxy * (dxy * dss - dys * dxs) +
                       dxs * (dxy * dys - dyy * dxs);
    ox = oy = os = 0.0;
    if (std::fabs(det) < 1e-30) return;
    const double inv = 1.0 / det;
    ox = -inv * (dx * (dyy * dss - dys * dys) - dxy * (dy * dss - dys * ds) + dxs * (dy * dys - dyy * ds));
    oy = -inv * (dxx * (dy * dss - dys * ds) - dx * (dxy * dss - dxs * dys) + dxs * (dxy * ds - dy * dxs));
    os = -inv * (dxx * (dyy * ds - dy * dys) - dxy * (dxy * ds - dy * dxs) + dx * (dxy * dys - dyy * dxs));
    ox = std::clamp(ox, -0.5, 0.5);
    oy = std::clamp(oy, -0.5, 0.5);
    os = std::clamp(os, -0.5, 0.5);
}

// Response value of a (possibly different-resolution) neighbour plane at the
// base-frame position of (x, y) on `from_ds`. Out-of-range samples yield
// `fallback` so they never block an extremum.
double cross_plane_value(const GrayImage& plane, int plane_ds, double x, double y, int from_ds,
                         double fallback) {
    const double px = x * from_ds / plane_ds;
    const double py = y * from_ds / plane_ds;
    if (!(px >= 0.0 && py >= 0.0 && px <= plane.width - 1.0 && py <= plane.height - 1.0)) return fallback;
    return bilinear_sample(plane, px, py);
}

struct ResponsePlane {
    const GrayImage* r;
    int downscale;
};

// Scale-space detections repeat across adjacent levels (and especially
// across octave boundaries, where the response landscape is resampled).
// Keep the strongest point of any cluster: a point is a duplicate when it
// sits within half the larger sigma of an already-kept stronger point.
// Input must be canonically sorted; output order is preserved.
std::vector<Keypoint> suppress_duplicates(std::vector<Keypoint> kps) {
    if (kps.size() < 2) return kps;
    constexpr double kCell = 8.0;
    struct Kept {
        double x, y, sigma;
    };
    std::unordered_map<std::int64_t, std::vector<Kept>> grid;
    auto cell_key = [](int cx, int cy) { return (static_cast<std::int64_t>(cx) << 32) ^ (cy & 0xffffffffLL); };

    std::vector<Keypoint> out;
    out.reserve(kps.size());
    double max_kept_sigma = 0.0;
    for (const Keypoint& kp : kps) {
        const double reach = 0.5 * std::max(kp.sigma, max_kept_sigma);
        const int span = static_cast<int>(reach / kCell) + 1;
        const int cx = static_cast<int>(std::floor(kp.x / kCell));
        const int cy = static_cast<int>(std::floor(kp.y / kCell));
        bool dup = false;
        for (int gy = cy - span; gy <= cy + span && !dup; ++gy)
            for (int gx = cx - span; gx <= cx + span && !dup; ++gx) {
                const auto it = grid.find(cell_key(gx, gy));
                if (it == grid.end()) continue;
                for (const Kept& k : it->second) {
                    const double r = 0.5 * std::max(kp.sigma, k.sigma);
                    const double dx = kp.x - k.x, dy = kp.y - k.y;
                    if (dx * dx + dy * dy <= r * r) {
                        dup = true;
                        break;
                    }
                }
            }
        if (dup) continue;
        grid[cell_key(cx, cy)].push_back({kp.x, kp.y, kp.sigma});
        max_kept_sigma = std::max(max_kept_sigma, kp.sigma);
        out.push_back(kp);
    }
    return out;
}

// Shared extremum scan. For each interior plane index i, pixels are tested
// against their 8 in-plane neighbours and 9 samples on each adjacent plane.
// `maxima_only` disables the minima branch (Hessian responses).
std::vector<Keypoint> scan_extrema(const std::vector<ResponsePlane>& planes, double gate, bool maxima_only,
                                   DetectorKind kind,
                                   const std::function<void(Keypoint&, int, double, double, double)>& emit) {
    std::vector<Keypoint> out;
    for (std::size_t i = 1; i + 1 < planes.size(); ++i) {
        const GrayImage& cur = *planes[i].r;
        const int ds = planes[i].downscale;
        std::vector<std::vector<Keypoint>> rows(cur.height);
#pragma omp parallel for schedule(dynamic)
        for (int y = 1; y < cur.height - 1; ++y) {
            for (int x = 1; x < cur.width - 1; ++x) {
                const double v = cur.at(x, y);
                const bool try_max = v > gate;
                const bool try_min = !maxima_only && v < -gate;
                if (!try_max && !try_min) continue;

                bool is_max = try_max, is_min = try_min;
                for (int dy = -1; dy <= 1 && (is_max || is_min); ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const double nv = cur.at(x + dx, y + dy);
                        if (nv >= v) is_max = false;
                        if (nv <= v) is_min = false;
                    }
                for (int adj : {-1, +1}) {
                    if (!is_max && !is_min) break;
                    const GrayImage& nb = *planes[i + adj].r;
                    const int nds = planes[i + adj].downscale;
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (is_max) {
                                const double nv = cross_plane_value(nb, nds, x + dx, y + dy, ds,
                                                                    -std::numeric_limits<double>::infinity());
                                if (nv >= v) is_max = false;
                            }
                            if (is_min) {
                                const double nv = cross_plane_value(nb, nds, x + dx, y + dy, ds,
                                                                    std::numeric_limits<double>::infinity());
                                if (nv <= v) is_min = false;
                            }
                        }
                }
                if (!is_max && !is_min) continue;

                double cube[3][3][3];
                for (int dsn = -1; dsn <= 1; ++dsn)
                    for (int dy = -1; dy <= 1; ++dy)
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dsn == 0)
                                cube[dsn + 1][dy + 1][dx + 1] = cur.at(x + dx, y + dy);
                            else
                                cube[dsn + 1][dy + 1][dx + 1] =
                                    cross_plane_value(*planes[i + dsn].r, planes[i + dsn].downscale, x + dx,
                                                      y + dy, ds, cur.at(x + dx, y + dy));
                        }
                double ox, oy, os;
                subpixel_offset(cube, ox, oy, os);

                Keypoint kp;
                kp.x = (x + ox) * ds;
                kp.y = (y + oy) * ds;
                kp.response = std::fabs(v);
                kp.detector = kind;
                emit(kp, static_cast<int>(i), ox, oy, os);
                rows[y].push_back(kp);
            }
        }
        for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    }
    canonical_sort(out);
    return out;
}

} // namespace

std::string detector_name(DetectorKind kind) {
    switch (kind) {
        case DetectorKind::NonlinearHessian: return "nonlinear-hessian";
        case DetectorKind::Dog: return "dog";
        case DetectorKind::Fast: return "fast";
    }
    return "unknown";
}

GradientPlane plane_of(const NonlinearScaleSpace& space, int level) {
    const EvolutionLevel& l = space.levels.at(level);
    return {&l.L, &l.Lx, &l.Ly, l.downscale, l.sigma};
}

GradientPlane plane_of(const GaussianPyramid& pyr, int level) {
    const int per = pyr.schedule.sublevels + 3;
    const int o = level / per;
    const int s = level % per;
    const auto& oct = pyr.octaves.at(o);
    const double sigma = pyr.schedule.base_sigma * std::pow(2.0, static_cast<double>(s) / pyr.schedule.sublevels) *
                         oct.downscale;
    return {&oct.planes.at(s), &oct.lx.at(s), &oct.ly.at(s), oct.downscale, sigma};
}

GrayImage hessian_response(const EvolutionLevel& level) {
    if (level.Lxx.size() != level.L.size() || level.Lyy.size() != level.L.size() ||
        level.Lxy.size() != level.L.size())
        throw std::invalid_argument("hessian_response: derivatives missing");
    return kernels::par::hessian_det(level.Lxx, level.Lyy, level.Lxy, level.sigma / level.downscale);
}

std::vector<Keypoint> detect_extrema(const NonlinearScaleSpace& space, double threshold) {
    if (space.levels.size() < 3) throw std::invalid_argument("detect_extrema: need >= 3 levels");
    std::vector<GrayImage> responses;
    responses.reserve(space.levels.size());
    for (const EvolutionLevel& l : space.levels) responses.push_back(hessian_response(l));
    std::vector<ResponsePlane> planes;
    for (std::size_t i = 0; i < responses.size(); ++i)
        planes.push_back({&responses[i], space.levels[i].downscale});

    const ScaleSchedule& sched = space.schedule;
    return suppress_duplicates(
        scan_extrema(planes, threshold, /*maxima_only=*/true, DetectorKind::NonlinearHessian,
                     [&](Keypoint& kp, int level, double, double, double os) {
                         kp.level = level;
                         kp.sigma = sched.base_sigma *
                                    std::pow(2.0, (static_cast<double>(level) + os) / sched.sublevels);
                     }));
}

std::vector<Keypoint> detect_extrema(const GaussianPyramid& pyr, double threshold_contrast) {
    const int per = pyr.schedule.sublevels + 3;
    if (pyr.octaves.empty() || pyr.octaves[0].dogs.size() < 3)
        throw std::invalid_argument("detect_extrema: need >= 3 DoG planes");
    const double gate = 0.5 * threshold_contrast;

    std::vector<Keypoint> all;
    for (std::size_t o = 0; o < pyr.octaves.size(); ++o) {
        const auto& oct = pyr.octaves[o];
        std::vector<ResponsePlane> planes;
        for (const GrayImage& d : oct.dogs) planes.push_back({&d, oct.downscale});
        const ScaleSchedule& sched = pyr.schedule;
        std::vector<Keypoint> kps =
            scan_extrema(planes, gate, /*maxima_only=*/false, DetectorKind::Dog,
                         [&](Keypoint& kp, int dog_index, double, double, double os) {
                             const double cont = dog_index + os;
                             kp.sigma = sched.base_sigma * std::pow(2.0, cont / sched.sublevels) * oct.downscale;
                             const int plane = std::clamp(static_cast<int>(std::lround(cont)), 0, per - 1);
                             kp.level = static_cast<int>(o) * per + plane;
                         });
        all.insert(all.end(), kps.begin(), kps.end());
    }
    canonical_sort(all);
    return suppress_duplicates(std::move(all));
}

namespace {

// radius-3 Bresenham circle, clockwise from 12 o'clock
constexpr int kCircle[16][2] = {{0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0},  {3, 1},  {2, 2},  {1, 3},
                                {0, 3},  {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3}};

// Longest circular run of set flags; on a full circle returns 16.
// `start` receives the run's first index (earliest among ties).
int longest_run(const bool flags[16], int& start) {
    int best = 0, best_start = 0;
    for (int s = 0; s < 16; ++s) {
        if (!flags[s]) continue;
        int len = 0;
        while (len < 16 && flags[(s + len) % 16]) ++len;
        if (len > best) {
            best = len;
            best_start = s;
        }
        if (best == 16) break;
    }
    start = best_start;
    return best;
}

} // namespace

std::vector<Keypoint> fast_corners(const GrayImage& img, double threshold, int arc) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("fast_corners: threshold must lie in (0,1)");
    if (arc < 1 || arc > 16) throw std::invalid_argument("fast_corners: arc must lie in [1,16]");
    GrayImage response(img.width, img.height, 0.0);
    if (img.width < 7 || img.height < 7) return {};

#pragma omp parallel for schedule(static)
    for (int y = 3; y < img.height - 3; ++y) {
        for (int x = 3; x < img.width - 3; ++x) {
            const double center = img.at(x, y);
            bool brighter[16], darker[16];
            double diffs[16];
            for (int i = 0; i < 16; ++i) {
                const double v = img.at(x + kCircle[i][0], y + kCircle[i][1]);
                diffs[i] = std::fabs(v - center);
                brighter[i] = v > center + threshold;
                darker[i] = v < center - threshold;
            }
            double score = 0.0;
            int start;
            if (const int len = longest_run(brighter, start); len >= arc) {
                for (int i = 0; i < len; ++i) score += diffs[(start + i) % 16];
            }
            if (const int len = longest_run(darker, start); len >= arc) {
                double s = 0.0;
                for (int i = 0; i < len; ++i) s += diffs[(start + i) % 16];
                score = std::max(score, s);
            }
            response.at(x, y) = score;
        }
    }

    std::vector<std::vector<Keypoint>> rows(img.height);
#pragma omp parallel for schedule(static)
    for (int y = 3; y < img.height - 3; ++y) {
        for (int x = 3; x < img.width - 3; ++x) {
            const double r = response.at(x, y);
            if (r <= 0.0) continue;
            // non-max suppression; plateaus keep the lexicographically first
            bool keep = true;
            for (int dy = -1; dy <= 1 && keep; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    const double nr = response.at(x + dx, y + dy);
                    if (nr > r || (nr == r && (dy < 0 || (dy == 0 && dx < 0)))) {
                        keep = false;
                        break;
                    }
                }
            if (!keep) continue;
            Keypoint kp;
            kp.x = x;
            kp.y = y;
            kp.sigma = 1.0;
            kp.level = 0;
            kp.response = r;
            kp.detector = DetectorKind::Fast;
            rows[y].push_back(kp);
        }
    }
    std::vector<Keypoint> out;
    for (auto& r : rows) out.insert(out.end(), r.begin(), r.end());
    canonical_sort(out);
    return out;
}

double assign_orientation(const Keypoint& kp, const GradientPlane& plane) {
    constexpr int kSectors = 72;          // pi/36 steps
    constexpr int kSectorSpan = 12;       // pi/3 window = 12 steps
    const double cx = kp.x / plane.downscale;
    const double cy = kp.y / plane.downscale;
    const double sigma = kp.sigma / plane.downscale;
    const int radius = std::max(1, static_cast<int>(std::lround(6.0 * sigma)));
    const double inv_two_var = 1.0 / (2.0 * (2.5 * sigma) * (2.5 * sigma));

    double bin_x[kSectors] = {0}, bin_y[kSectors] = {0};
    const int icx = static_cast<int>(std::lround(cx));
    const int icy = static_cast<int>(std::lround(cy));
    for (int dy = -radius; dy <= radius; ++dy) {
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int px = icx + dx, py = icy + dy;
            if (!plane.lx->in_bounds(px, py)) continue;
            const double gx = plane.lx->at(px, py);
            const double gy = plane.ly->at(px, py);
            if (gx == 0.0 && gy == 0.0) continue;
            const double w = std::exp(-(dx * dx + dy * dy) * inv_two_var);
            double ang = std::atan2(gy, gx);
            if (ang < 0.0) ang += kTwoPi;
            int bin = static_cast<int>(ang / kTwoPi * kSectors);
            if (bin >= kSectors) bin = kSectors - 1;
            bin_x[bin] += w * gx;
            bin_y[bin] += w * gy;
        }
    }

    double best = -1.0, best_x = 1.0, best_y = 0.0;
    for (int s = 0; s < kSectors; ++s) {
        double sx = 0.0, sy = 0.0;
        for (int j = 0; j < kSectorSpan; ++j) {
            sx += bin_x[(s + j) % kSectors];
            sy += bin_y[(s + j) % kSectors];
        }
        const double norm = sx * sx + sy * sy;
        if (norm > best) { // strict: earlier (smaller) sector wins ties
            best = norm;
            best_x = sx;
            best_y = sy;
        }
    }
    if (best <= 0.0) return 0.0;
    double ang = std::atan2(best_y, best_x);
    if (ang < 0.0) ang += kTwoPi;
    if (ang >= kTwoPi) ang = 0.0;
    return ang;
}

double assign_orientation(const Keypoint& kp, const EvolutionLevel& level) {
    return assign_orientation(kp, GradientPlane{&level.L, &level.Lx, &level.Ly, level.downscale, level.sigma});
}

void canonical_sort(std::vector<Keypoint>& kps) {
    std::sort(kps.begin(), kps.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.response != b.response) return a.response > b.response;
        if (a.y != b.y) return a.y < b.y;
        if (a.x != b.x) return a.x < b.x;
        return a.sigma < b.sigma;
    });
}

} // namespace crackalign

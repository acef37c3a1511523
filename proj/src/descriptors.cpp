#include "crackalign/descriptors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace crackalign {

namespace {

// ---- 64-d M-SURF-style descriptor ----
// 24 samples per axis at sigma spacing; 4x4 subregions of 6 samples extended
// by a 2-sample overlap margin; per-sample Gaussian 2.5 (in sample units)
// about the subregion centre and a 1.5 Gaussian over the subregion grid.
constexpr int kSamples = 24;
constexpr int kGrid = 4;
constexpr int kBlock = kSamples / kGrid;
constexpr int kOverlap = 2;

FloatDescriptor build_float_descriptor(const Keypoint& kp, const GradientPlane& plane) {
    const double ds = plane.downscale;
    const double sigma = kp.sigma / ds;
    const double cx = kp.x / ds;
    const double cy = kp.y / ds;
    const double c = std::cos(kp.orientation);
    const double s = std::sin(kp.orientation);

    // window bounding radius; entirely-outside windows are a caller error
    const double reach = 11.5 * sigma * std::sqrt(2.0);
    if (cx + reach < 0.0 || cy + reach < 0.0 || cx - reach > plane.L->width - 1.0 ||
        cy - reach > plane.L->height - 1.0)
        throw std::invalid_argument("float_descriptor: window entirely outside image");

    FloatDescriptor d;
    int out = 0;
    for (int gy = 0; gy < kGrid; ++gy) {
        for (int gx = 0; gx < kGrid; ++gx) {
            const double centre_u = gx * kBlock + (kBlock - 1) * 0.5 - (kSamples - 1) * 0.5;
            const double centre_v = gy * kBlock + (kBlock - 1) * 0.5 - (kSamples - 1) * 0.5;
            const int lo_x = std::max(0, gx * kBlock - kOverlap);
            const int hi_x = std::min(kSamples, (gx + 1) * kBlock + kOverlap);
            const int lo_y = std::max(0, gy * kBlock - kOverlap);
            const int hi_y = std::min(kSamples, (gy + 1) * kBlock + kOverlap);

            double sdx = 0.0, sdy = 0.0, sadx = 0.0, sady = 0.0;
            for (int j = lo_y; j < hi_y; ++j) {
                for (int i = lo_x; i < hi_x; ++i) {
                    const double su = i - (kSamples - 1) * 0.5;
                    const double sv = j - (kSamples - 1) * 0.5;
                    const double du = su - centre_u;
                    const double dv = sv - centre_v;
                    const double w = std::exp(-(du * du + dv * dv) / (2.0 * 2.5 * 2.5));
                    const double u = su * sigma;
                    const double v = sv * sigma;
                    const double px = cx + c * u - s * v;
                    const double py = cy + s * u + c * v;
                    const double gxv = bilinear_sample(*plane.lx, px, py);
                    const double gyv = bilinear_sample(*plane.ly, px, py);
                    const double rdx = c * gxv + s * gyv;
                    const double rdy = -s * gxv + c * gyv;
                    sdx += w * rdx;
                    sdy += w * rdy;
                    sadx += w * std::fabs(rdx);
                    sady += w * std::fabs(rdy);
                }
            }
            const double ggx = gx - (kGrid - 1) * 0.5;
            const double ggy = gy - (kGrid - 1) * 0.5;
            const double w2 = std::exp(-(ggx * ggx + ggy * ggy) / (2.0 * 1.5 * 1.5));
            d.v[out++] = w2 * sdx;
            d.v[out++] = w2 * sdy;
            d.v[out++] = w2 * sadx;
            d.v[out++] = w2 * sady;
        }
    }

    double norm = 0.0;
    for (double e : d.v) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
        d.v.fill(0.0);
        d.v[0] = 1.0;
        return d;
    }
    for (double& e : d.v) e /= norm;
    return d;
}

// ---- binary descriptor pattern ----

struct PatternPoint {
    double x, y, sigma;
};

struct Pattern {
    std::vector<PatternPoint> points;        // 43 points
    std::vector<std::pair<int, int>> pairs;  // 256 shortest pairs
};

Pattern build_pattern() {
    Pattern p;
    p.points.push_back({0.0, 0.0, 0.8});
    const struct {
        double radius;
        int count;
    } rings[] = {{2.0, 6}, {4.0, 8}, {7.0, 12}, {11.0, 16}};
    for (const auto& ring : rings) {
        for (int i = 0; i < ring.count; ++i) {
            const double ang = 2.0 * M_PI * i / ring.count;
            p.points.push_back({ring.radius * std::cos(ang), ring.radius * std::sin(ang), 0.4 * ring.radius});
        }
    }

    struct Cand {
        double dist;
        int i, j;
    };
    std::vector<Cand> cands;
    for (int i = 0; i < static_cast<int>(p.points.size()); ++i)
        for (int j = i + 1; j < static_cast<int>(p.points.size()); ++j)
            cands.push_back({std::hypot(p.points[i].x - p.points[j].x, p.points[i].y - p.points[j].y), i, j});
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    p.pairs.reserve(256);
    for (int n = 0; n < 256; ++n) p.pairs.emplace_back(cands[n].i, cands[n].j);
    return p;
}

const Pattern& pattern() {
    static const Pattern p = build_pattern();
    return p;
}

// Gaussian-weighted local mean at a subpixel point; out-of-image samples are
// skipped and the weight renormalized.
double smoothed_sample(const GrayImage& img, double x, double y, double sigma) {
    const int r = std::max(1, static_cast<int>(std::ceil(2.0 * sigma)));
    const int cx = static_cast<int>(std::lround(x));
    const int cy = static_cast<int>(std::lround(y));
    const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
    double acc = 0.0, wsum = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
            const int px = cx + dx, py = cy + dy;
            if (!img.in_bounds(px, py)) continue;
            const double ddx = px - x, ddy = py - y;
            const double w = std::exp(-(ddx * ddx + ddy * ddy) * inv_two_var);
            acc += w * img.at(px, py);
            wsum += w;
        }
    }
    return wsum > 0.0 ? acc / wsum : 0.0;
}

template <typename Desc, typename Dist>
std::vector<Match> match_impl(std::size_t na, std::size_t nb, double ratio, Dist dist) {
    if (nb == 0) throw std::invalid_argument("match_descriptors: empty train set");
    std::vector<int> best_j(na, -1);
    std::vector<double> best_d(na, 0.0), second_d(na, 0.0);

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(na); ++i) {
        double b1 = std::numeric_limits<double>::infinity();
        double b2 = std::numeric_limits<double>::infinity();
        int bj = -1;
        for (std::size_t j = 0; j < nb; ++j) {
            const double d = dist(static_cast<std::size_t>(i), j);
            if (d < b1) {
                b2 = b1;
                b1 = d;
                bj = static_cast<int>(j);
            } else if (d < b2) {
                b2 = d;
            }
        }
        best_j[i] = bj;
        best_d[i] = b1;
        second_d[i] = b2;
    }

    // reverse pass for the mutual check; ties keep the lower query index
    std::vector<int> best_i(nb, -1);
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(nb); ++j) {
        double b1 = std::numeric_limits<double>::infinity();
        int bi = -1;
        for (std::size_t i = 0; i < na; ++i) {
            const double d = dist(i, static_cast<std::size_t>(j));
            if (d < b1) {
                b1 = d;
                bi = static_cast<int>(i);
            }
        }
        best_i[j] = bi;
    }

    std::vector<Match> out;
    const bool has_second = nb > 1;
    for (std::size_t i = 0; i < na; ++i) {
        double r = 0.0;
        if (has_second) {
            r = second_d[i] > 0.0 ? best_d[i] / second_d[i] : 1.0;
            if (!(r < ratio)) continue;
        }
        if (best_i[static_cast<std::size_t>(best_j[i])] != static_cast<int>(i)) continue;
        out.push_back({static_cast<int>(i), best_j[i], best_d[i], r});
    }
    return out;
}

} // namespace

FloatDescriptor float_descriptor(const Keypoint& kp, const GradientPlane& plane) {
    return build_float_descriptor(kp, plane);
}

FloatDescriptor float_descriptor(const Keypoint& kp, const NonlinearScaleSpace& space) {
    return build_float_descriptor(kp, plane_of(space, kp.level));
}

FloatDescriptor float_descriptor(const Keypoint& kp, const GaussianPyramid& pyr) {
    return build_float_descriptor(kp, plane_of(pyr, kp.level));
}

BinaryDescriptor binary_descriptor(const Keypoint& kp, const GrayImage& img) {
    const double margin = 16.0 * kp.sigma;
    if (kp.x < margin || kp.y < margin || kp.x > img.width - 1 - margin || kp.y > img.height - 1 - margin)
        throw std::invalid_argument("binary_descriptor: keypoint too close to border");

    const Pattern& pat = pattern();
    const double c = std::cos(kp.orientation);
    const double s = std::sin(kp.orientation);
    std::array<double, 43> vals;
    for (std::size_t i = 0; i < pat.points.size(); ++i) {
        const PatternPoint& pp = pat.points[i];
        const double px = kp.x + kp.sigma * (c * pp.x - s * pp.y);
        const double py = kp.y + kp.sigma * (s * pp.x + c * pp.y);
        vals[i] = smoothed_sample(img, px, py, pp.sigma * kp.sigma);
    }

    BinaryDescriptor d;
    for (std::size_t n = 0; n < pat.pairs.size(); ++n) {
        if (vals[pat.pairs[n].first] > vals[pat.pairs[n].second])
            d.bits[n / 64] |= 1ULL << (n % 64);
    }
    return d;
}

double descriptor_distance(const FloatDescriptor& a, const FloatDescriptor& b) {
    double acc = 0.0;
    for (int i = 0; i < 64; ++i) {
        const double diff = a.v[i] - b.v[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

int descriptor_distance(const BinaryDescriptor& a, const BinaryDescriptor& b) {
    int acc = 0;
    for (int i = 0; i < 4; ++i) acc += std::popcount(a.bits[i] ^ b.bits[i]);
    return acc;
}

std::vector<Match> match_descriptors(std::span<const FloatDescriptor> a, std::span<const FloatDescriptor> b,
                                     double ratio) {
    return match_impl<FloatDescriptor>(a.size(), b.size(), ratio,
                                       [&](std::size_t i, std::size_t j) { return descriptor_distance(a[i], b[j]); });
}

std::vector<Match> match_descriptors(std::span<const BinaryDescriptor> a, std::span<const BinaryDescriptor> b,
                                     double ratio) {
    return match_impl<BinaryDescriptor>(
        a.size(), b.size(), ratio,
        [&](std::size_t i, std::size_t j) { return static_cast<double>(descriptor_distance(a[i], b[j])); });
}

} // namespace crackalign

#include "crackalign/synthetic.hpp"

#include "crackalign/metrics.hpp"
#include "crackalign/rng.hpp"
#include "crackalign/scalespace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace crackalign {

namespace {

constexpr double kFillTone = 0.6; // flat fill for warp-invalid pixels

bool on_grid(double v, std::initializer_list<double> grid) {
    for (double g : grid)
        if (std::fabs(v - g) < 1e-12) return true;
    return false;
}

void validate_spec(const PerturbSpec& s) {
    if (!on_grid(s.tilt, {0.0, 1e-4, 5e-4, 1.5e-3}))
        throw std::invalid_argument("perturb: tilt outside the declared grid");
    if (!on_grid(s.noise_sigma, {0.0, 2.0 / 255.0, 5.0 / 255.0, 10.0 / 255.0}))
        throw std::invalid_argument("perturb: noise sigma outside the declared grid");
    if (!on_grid(s.blur_sigma, {0.0, 0.5, 1.5, 3.0}))
        throw std::invalid_argument("perturb: blur sigma outside the declared grid");
    if (!on_grid(s.contrast, {1.0, 0.6, 0.3}))
        throw std::invalid_argument("perturb: contrast outside the declared grid");
    if (!on_grid(s.shadow, {1.0, 0.9, 0.6, 0.3}))
        throw std::invalid_argument("perturb: shadow outside the declared grid");
}

// bilinearly upsampled random lattice in [-1, 1]
GrayImage value_noise(int w, int h, int cell, Rng& rng) {
    const int gw = w / cell + 2, gh = h / cell + 2;
    std::vector<double> lattice(static_cast<std::size_t>(gw) * gh);
    for (double& v : lattice) v = rng.uniform(-1.0, 1.0);
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y) {
        const double gy = static_cast<double>(y) / cell;
        const int y0 = static_cast<int>(gy);
        const double fy = gy - y0;
        for (int x = 0; x < w; ++x) {
            const double gx = static_cast<double>(x) / cell;
            const int x0 = static_cast<int>(gx);
            const double fx = gx - x0;
            const double a = lattice[static_cast<std::size_t>(y0) * gw + x0];
            const double b = lattice[static_cast<std::size_t>(y0) * gw + x0 + 1];
            const double c = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0];
            const double d = lattice[static_cast<std::size_t>(y0 + 1) * gw + x0 + 1];
            out.at(x, y) = (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
        }
    }
    return out;
}

double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

} // namespace

Homography tilt_homography(double h31) {
    Homography h;
    h.h[6] = h31;
    return h;
}

GrayImage perturb(const GrayImage& img, const PerturbSpec& spec, std::uint64_t seed) {
    validate_spec(spec);
    GrayImage out = img;

    if (spec.tilt != 0.0) {
        WarpResult w = warp_image(img, tilt_homography(spec.tilt), img.width, img.height);
        out = std::move(w.image);
        for (std::size_t i = 0; i < out.size(); ++i)
            if (!w.valid.bits[i]) out.data[i] = kFillTone;
    }
    if (spec.noise_sigma > 0.0) {
        Rng rng = Rng::fork(seed, 0x6e6f697365ULL); // stream tag
        for (double& v : out.data) v = std::clamp(v + spec.noise_sigma * rng.normal(), 0.0, 1.0);
    }
    if (spec.blur_sigma > 0.0) out = gaussian_blur(out, spec.blur_sigma);
    if (spec.contrast != 1.0)
        for (double& v : out.data) v = 0.5 + spec.contrast * (v - 0.5);
    if (spec.shadow != 1.0) {
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) {
                const double f = 1.0 - (1.0 - spec.shadow) * x / std::max(1, out.width - 1);
                out.at(x, y) *= f;
            }
    }
    for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
    return out;
}

GrayImage synth_crack_scene(int width, int height, std::uint64_t seed) {
    if (width < 64 || height < 64) throw std::invalid_argument("synth_crack_scene: scene too small");
    Rng rng = Rng::fork(seed, 0x7363656e65ULL);

    GrayImage coarse = value_noise(width, height, 24, rng);
    GrayImage mid = value_noise(width, height, 7, rng);
    GrayImage fine = value_noise(width, height, 2, rng);
    GrayImage img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double shade = 0.03 * (static_cast<double>(x) + y) / (width + height);
            img.at(x, y) = 0.66 + shade + 0.06 * coarse.at(x, y) + 0.045 * mid.at(x, y) + 0.02 * fine.at(x, y);
        }

    // dark anchors (small, so the crack stays the largest dark component)
    // and bright speckles, for corner/blob features away from the crack
    const int blobs = 42;
    for (int b = 0; b < blobs; ++b) {
        const double bx = rng.uniform(0.06, 0.94) * width;
        const double by = rng.uniform(0.06, 0.94) * height;
        const double r = rng.uniform(2.0, 5.0);
        const double tone = (b % 2 == 0) ? rng.uniform(0.25, 0.4) : rng.uniform(0.88, 0.97);
        const int lo_y = std::max(0, static_cast<int>(by - r - 2)), hi_y = std::min(height - 1, static_cast<int>(by + r + 2));
        const int lo_x = std::max(0, static_cast<int>(bx - r - 2)), hi_x = std::min(width - 1, static_cast<int>(bx + r + 2));
        for (int y = lo_y; y <= hi_y; ++y)
            for (int x = lo_x; x <= hi_x; ++x) {
                const double d = std::hypot(x - bx, y - by);
                if (d > r + 1.0) continue;
                const double blend = std::clamp(r + 0.5 - d, 0.0, 1.0);
                img.at(x, y) = (1.0 - blend) * img.at(x, y) + blend * tone;
            }
    }

    // meandering crack polyline, left third to right third
    std::vector<Vec2> pts;
    double cx = 0.12 * width;
    double cy = rng.uniform(0.3, 0.7) * height;
    double heading = rng.uniform(-0.25, 0.25);
    pts.push_back({cx, cy});
    while (cx < 0.88 * width) {
        heading += rng.uniform(-0.35, 0.35);
        heading = std::clamp(heading, -0.9, 0.9);
        const double step = rng.uniform(9.0, 16.0);
        cx += step * std::cos(heading);
        cy += step * std::sin(heading);
        cy = std::clamp(cy, 0.15 * height, 0.85 * height);
        pts.push_back({cx, cy});
    }
    // crack edge falls over a 2 px ramp: an antisymmetric profile keeps its
    // threshold crossing in place under the symmetric smoothing that warp
    // resampling applies, so segmented width survives a correction round trip
    const double half_width = rng.uniform(2.2, 2.8); // ~5 px wide crack
    const double crack_tone = 0.10;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const Vec2 a = pts[i], b = pts[i + 1];
        const int lo_x = std::max(0, static_cast<int>(std::min(a.x, b.x) - half_width - 3));
        const int hi_x = std::min(width - 1, static_cast<int>(std::max(a.x, b.x) + half_width + 3));
        const int lo_y = std::max(0, static_cast<int>(std::min(a.y, b.y) - half_width - 3));
        const int hi_y = std::min(height - 1, static_cast<int>(std::max(a.y, b.y) + half_width + 3));
        for (int y = lo_y; y <= hi_y; ++y)
            for (int x = lo_x; x <= hi_x; ++x) {
                const double d = dist_to_segment(x, y, a.x, a.y, b.x, b.y);
                const double blend = std::clamp((half_width + 1.0 - d) / 2.0, 0.0, 1.0);
                if (blend <= 0.0) continue;
                const double target = crack_tone + 0.02 * fine.at(x, y);
                img.at(x, y) = std::min(img.at(x, y), (1.0 - blend) * img.at(x, y) + blend * target);
            }
    }

    for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
    return img;
}

PerturbSpec make_cell_spec(const std::string& factor, int level) {
    if (level < 0 || level > 2) throw std::invalid_argument("bench: level must be 0, 1 or 2");
    PerturbSpec s;
    if (factor == "tilt") {
        constexpr double g[3] = {1e-4, 5e-4, 1.5e-3};
        s.tilt = g[level];
    } else if (factor == "noise") {
        constexpr double g[3] = {2.0 / 255.0, 5.0 / 255.0, 10.0 / 255.0};
        s.noise_sigma = g[level];
    } else if (factor == "blur") {
        constexpr double g[3] = {0.5, 1.5, 3.0};
        s.blur_sigma = g[level];
    } else if (factor == "contrast") {
        constexpr double g[3] = {1.0, 0.6, 0.3};
        s.contrast = g[level];
    } else if (factor == "shadow") {
        constexpr double g[3] = {0.9, 0.6, 0.3};
        s.shadow = g[level];
    } else if (factor == "neutral") {
        // identity cell
    } else {
        throw std::invalid_argument("bench: unknown factor '" + factor + "'");
    }
    return s;
}

} // namespace crackalign

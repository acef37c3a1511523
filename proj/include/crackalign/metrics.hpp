#pragma once

#include "crackalign/homography.hpp"
#include "crackalign/image.hpp"

#include <cstdint>
#include <vector>

namespace crackalign {

struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits; // 1 = crack

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t count() const;
};

struct CrackMetrics {
    double area = 0.0;         // crack pixel count
    double spine_length = 0.0; // path length of the skeleton (1 / sqrt(2) steps)
    double avg_width = 0.0;    // mean of 2*EDT-1 along the skeleton
};

struct MetricErrors {
    double area_pct = 0.0;
    double length_pct = 0.0;
    double width_pct = 0.0;
};

struct WarpResult {
    GrayImage image;
    BinaryMask valid; // pixels whose preimage lies inside the source
};

/// Inverse-map warp of `img` by H (source -> output frame) onto an
/// out_w x out_h canvas.
WarpResult warp_image(const GrayImage& img, const Homography& H, int out_w, int out_h);

/// Otsu threshold on the inverted image (cracks are dark), 3x3-cross opening,
/// largest 8-connected component. The `valid` overload restricts both the
/// histogram and the mask to valid pixels.
BinaryMask segment_crack(const GrayImage& img);
BinaryMask segment_crack(const GrayImage& img, const BinaryMask& valid);

/// Zhang-Suen thinning to a 1-px 8-connected skeleton; idempotent.
BinaryMask skeletonize(const BinaryMask& mask);

/// Exact Euclidean distance to the nearest background pixel (image borders
/// count as background), for every foreground pixel.
std::vector<double> distance_transform(const BinaryMask& mask);

CrackMetrics compute_metrics(const BinaryMask& mask);

/// Percent errors 100*|corrected - baseline|/baseline per metric.
MetricErrors metric_errors(const CrackMetrics& corrected, const CrackMetrics& baseline);

/// Red = baseline only, blue = corrected only, purple = overlap, white = none.
RgbImage render_overlay(const BinaryMask& baseline, const BinaryMask& corrected);

} // namespace crackalign

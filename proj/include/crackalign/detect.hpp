#pragma once

#include "crackalign/image.hpp"
#include "crackalign/scalespace.hpp"

#include <string>
#include <vector>

namespace crackalign {

enum class DetectorKind { NonlinearHessian, Dog, Fast };

std::string detector_name(DetectorKind kind);

struct Keypoint {
    double x = 0.0; // base-image frame, subpixel
    double y = 0.0;
    double sigma = 1.0;     // base-frame px
    int level = 0;          // flat plane index within the owning space
    double response = 0.0;  // detector score, > 0
    double orientation = 0.0; // radians in [0, 2pi)
    DetectorKind detector = DetectorKind::NonlinearHessian;
};

/// View over one scale-space plane for orientation and descriptor sampling.
struct GradientPlane {
    const GrayImage* L = nullptr;
    const GrayImage* lx = nullptr;
    const GrayImage* ly = nullptr;
    int downscale = 1;
    double sigma = 1.0; // base-frame px
};

GradientPlane plane_of(const NonlinearScaleSpace& space, int level);
GradientPlane plane_of(const GaussianPyramid& pyr, int level);

/// Scale-normalized Hessian determinant (s^4 * (Lxx*Lyy - Lxy^2) with s the
/// octave-local scale).
GrayImage hessian_response(const EvolutionLevel& level);

/// Keypoints as strict 3x3x3 extrema of the Hessian response above
/// `threshold`, with one Newton refinement step (offsets clamped to 0.5).
std::vector<Keypoint> detect_extrema(const NonlinearScaleSpace& space, double threshold = 1e-4);

/// DoG extrema (maxima and minima) with |value| > 0.5 * threshold_contrast.
std::vector<Keypoint> detect_extrema(const GaussianPyramid& pyr, double threshold_contrast = 0.03);

/// FAST segment test on the radius-3 Bresenham circle: a corner needs `arc`
/// contiguous circle pixels all brighter than I(p)+T or all darker than
/// I(p)-T. Response is the absolute-difference sum over the qualifying run;
/// 3x3 non-max suppression; sigma fixed at 1.
std::vector<Keypoint> fast_corners(const GrayImage& img, double threshold = 0.1, int arc = 9);

/// Dominant orientation: angle of the largest Gaussian-weighted gradient
/// vector sum inside radius 6*sigma, scanned with a pi/3 sector sliding in
/// pi/36 steps; ties resolve to the smaller angle.
double assign_orientation(const Keypoint& kp, const GradientPlane& plane);
double assign_orientation(const Keypoint& kp, const EvolutionLevel& level);

/// Response descending, then y, x, sigma ascending: a schedule-independent
/// output order shared by every detector.
void canonical_sort(std::vector<Keypoint>& kps);

} // namespace crackalign

#pragma once

#include "crackalign/detect.hpp"
#include "crackalign/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace crackalign {

/// 64-d gradient-statistics descriptor, L2-normalized. A flat (zero-gradient)
/// window maps to the canonical basis vector e0.
struct FloatDescriptor {
    std::array<double, 64> v{};
};

/// 256 packed pairwise intensity comparisons on a concentric point pattern.
struct BinaryDescriptor {
    std::array<std::uint64_t, 4> bits{};
};

struct Match {
    int query = 0;
    int train = 0;
    double distance = 0.0;
    double ratio = 0.0; // best/second-best; 0 when no second neighbour exists
};

/// Sample a 24s x 24s window rotated to kp.orientation, split into a 4x4 grid
/// of overlapping subregions, and accumulate Gaussian-weighted sums of the
/// rotated first derivatives (dx, dy, |dx|, |dy| per subregion).
FloatDescriptor float_descriptor(const Keypoint& kp, const GradientPlane& plane);
FloatDescriptor float_descriptor(const Keypoint& kp, const NonlinearScaleSpace& space);
FloatDescriptor float_descriptor(const Keypoint& kp, const GaussianPyramid& pyr);

/// Comparisons I(p_i) > I(p_j) over the 256 shortest pairs of a 43-point
/// concentric pattern (radii 2/4/7/11 * kp.sigma, point smoothing
/// 0.4*radius), rotated to kp.orientation. Requires the keypoint to sit at
/// least 16*sigma from every border.
BinaryDescriptor binary_descriptor(const Keypoint& kp, const GrayImage& img);

double descriptor_distance(const FloatDescriptor& a, const FloatDescriptor& b);
int descriptor_distance(const BinaryDescriptor& a, const BinaryDescriptor& b);

/// Exhaustive 2-NN matching with the Lowe ratio test (waived when no second
/// neighbour exists) and a mutual-consistency check. Ties resolve to the
/// lower train index (query index on the reverse pass).
std::vector<Match> match_descriptors(std::span<const FloatDescriptor> a, std::span<const FloatDescriptor> b,
                                     double ratio = 0.8);
std::vector<Match> match_descriptors(std::span<const BinaryDescriptor> a, std::span<const BinaryDescriptor> b,
                                     double ratio = 0.8);

} // namespace crackalign

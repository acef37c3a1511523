#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace crackalign {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

/// Thrown when a geometric estimate cannot be produced (degenerate sample,
/// singular matrix, point at infinity, too few matches, no consensus).
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// 3x3 projective map, row-major. Canonical scaling fixes the gauge: h33 = 1
/// when |h33| > 1e-12, otherwise unit Frobenius norm with a positive first
/// nonzero entry.
struct Homography {
    std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return {}; }
    double det() const;
    double frobenius_distance(const Homography& other) const;
};

Homography canonical(const Homography& H);

/// Homogeneous product then divide by w. Throws when |w| < 1e-12.
Vec2 apply(const Homography& H, Vec2 p);

/// Non-throwing variant for estimation inner loops.
bool try_apply(const Homography& H, Vec2 p, Vec2& out);

Homography invert(const Homography& H);

struct Correspondence {
    Vec2 p1; // source point
    Vec2 p2; // target point
};

/// Hartley conditioning: translate the centroid to the origin and scale
/// isotropically so the mean distance from it is sqrt(2). Returns the
/// similarity and the transformed points.
std::pair<Homography, std::vector<Vec2>> normalize_points(std::span<const Vec2> pts);

/// Unit vector minimizing |A v| for the 2n x 9 system, computed as the
/// eigenvector of the smallest eigenvalue of A^T A via cyclic Jacobi sweeps
/// (off-diagonals of the norm-scaled matrix below 1e-12; at most 100 sweeps).
std::array<double, 9> smallest_singular_vector(const std::vector<std::array<double, 9>>& rows);

/// Normalized DLT over >= 4 correspondences. Throws EstimationError on
/// degenerate configurations (non-unique smallest eigenvalue or
/// rank-deficient result).
Homography dlt(std::span<const Correspondence> cs);

/// Euclidean distance between c.p2 and H applied to c.p1.
double reprojection_error(const Homography& H, const Correspondence& c);

/// Root-mean-square of the errors, floored at 0.25 px so exact-fit data
/// cannot collapse the inlier gate.
double update_sigma(std::span<const double> errors);

/// ceil(log(1-p) / log(1-(1-e)^k)), clamped to [1, cap]; e = 0 gives 1.
int required_iterations(double p, double e, int k, int cap = 5000);

struct RansacConfig {
    int sample_size = 10;
    double confidence = 0.99;
    double initial_outlier_ratio = 0.5;
    int max_iterations = 5000;
    double initial_sigma = 1.0;
    std::uint64_t seed = 0;
};

struct RansacResult {
    Homography h;                      // refined over the final inlier set
    Homography raw_h;                  // best sampled model before refinement
    std::vector<std::uint8_t> inliers; // flag per correspondence
    int inlier_count = 0;
    double sigma_final = 0.0;
    int iterations_run = 0;
    double total_error = 0.0; // sum of inlier reprojection errors under h
};

/// Adaptive RANSAC: fixed-size random samples, DLT model fits, inlier gate
/// sqrt(5.99)*sigma with sigma re-estimated from the incumbent best model's
/// inliers, and an iteration budget recomputed from the observed outlier
/// ratio. Deterministic for a fixed seed regardless of thread count.
RansacResult ransac(std::span<const Correspondence> matches, const RansacConfig& cfg);

} // namespace crackalign

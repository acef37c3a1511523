#pragma once

#include "crackalign/homography.hpp"
#include "crackalign/image.hpp"

#include <cstdint>
#include <string>

namespace crackalign {

/// Photometric/geometric perturbation of a test image. Every knob must sit
/// on its declared grid (or at the neutral value): tilt h31 in
/// {1e-4, 5e-4, 1.5e-3}, noise sigma in {2,5,10}/255, blur sigma in
/// {0.5, 1.5, 3}, contrast scale in {0.6, 0.3} about 0.5, shadow ramp end in
/// {0.9, 0.6, 0.3}.
struct PerturbSpec {
    double tilt = 0.0;
    double noise_sigma = 0.0;
    double blur_sigma = 0.0;
    double contrast = 1.0;
    double shadow = 1.0;
};

/// Pure perspective tilt: identity with h31 set.
Homography tilt_homography(double h31);

/// target = shadow(contrast(blur(noise(warp(img))))), clamped to [0,1].
/// Deterministic for a fixed seed; throws on out-of-grid values.
GrayImage perturb(const GrayImage& img, const PerturbSpec& spec, std::uint64_t seed);

/// Seeded concrete-like test scene: layered value-noise background, a dark
/// meandering crack a few pixels wide, and scattered blob/speckle anchors.
GrayImage synth_crack_scene(int width, int height, std::uint64_t seed);

/// Named grid levels ("mild"/"medium"/"severe" or "low"/"med"/"high") for the
/// bench CLI; throws std::invalid_argument on unknown names.
PerturbSpec make_cell_spec(const std::string& factor, int level);

} // namespace crackalign

#pragma once

#include "crackalign/image.hpp"

#include <vector>

namespace crackalign {

/// Geometric scale schedule sigma_i = base * 2^(o + s/S) with the usual
/// diffusion-time mapping t_i = sigma_i^2 / 2.
struct ScaleSchedule {
    double base_sigma = 1.6;
    int octaves = 4;
    int sublevels = 4;

    int level_count() const { return octaves * sublevels; }
    double sigma(int level) const;
    double time(int level) const;
    int octave_of(int level) const { return level / sublevels; }
};

/// One evolved image with its scale-adapted first and second derivatives.
/// Raster coordinates are octave-local; multiply by `downscale` to reach the
/// base-image frame.
struct EvolutionLevel {
    double sigma = 0.0; // base-frame px
    double time = 0.0;  // sigma^2 / 2
    int octave = 0;
    int downscale = 1;
    GrayImage L, Lx, Ly, Lxx, Lyy, Lxy;
};

struct NonlinearScaleSpace {
    ScaleSchedule schedule;
    double kappa = 0.0;
    std::vector<EvolutionLevel> levels;
};

/// Classic blurred/DoG pyramid baseline. Per octave: sublevels+3 blurred
/// planes, sublevels+2 DoG planes, and per-plane Scharr derivatives for
/// orientation/descriptor sampling.
struct GaussianPyramid {
    ScaleSchedule schedule;
    struct Octave {
        int downscale = 1;
        std::vector<GrayImage> planes;
        std::vector<GrayImage> dogs;
        std::vector<GrayImage> lx, ly;
    };
    std::vector<Octave> octaves;
};

struct GradientField {
    GrayImage lx, ly, mag;
};

/// Separable Gaussian, truncated at radius ceil(3*sigma), kernel normalized
/// to unit sum, mirror borders. sigma = 0 is the identity.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

/// Scharr 3x3 derivatives (3/10/3 over 32) and gradient magnitude. The
/// normalization makes a ramp of slope m report exactly m.
GradientField gradient(const GrayImage& img);

/// Contrast parameter kappa as a percentile (default 0.70) of the nonzero
/// gradient magnitudes of the sigma=1 pre-smoothed image, taken over a
/// 300-bin histogram. Falls back to 0.01 when the image has no gradients.
double estimate_kappa(const GrayImage& img, double percentile = 0.70);

/// Perona-Malik g2 conductivity of a gradient-magnitude field.
GrayImage conductivity(const GrayImage& mag, double kappa);

/// One AOS diffusion step (see kernels::aos_step).
GrayImage diffuse_step(const GrayImage& L, const GrayImage& c, double dt);

NonlinearScaleSpace build_nonlinear_scale_space(const GrayImage& img, const ScaleSchedule& schedule = {});
GaussianPyramid build_gaussian_pyramid(const GrayImage& img, const ScaleSchedule& schedule = {});

namespace detail {
/// Unit-sum Gaussian taps over [-ceil(3*sigma), +ceil(3*sigma)].
std::vector<double> gaussian_taps(double sigma);
/// Scale-adapted Scharr pair: smoothing taps (3/16, 10/16, 3/16) and
/// derivative taps (-1,0,1)/(2*scale) at offsets {-scale, 0, +scale}.
void scharr_taps(int scale, std::vector<double>& smooth, std::vector<double>& deriv);
/// First derivatives of `img` at integer operator scale (>= 1).
void scharr_derivatives(const GrayImage& img, int scale, GrayImage& lx, GrayImage& ly);
/// Plain 2x decimation (every second sample, ceil(n/2) output length).
GrayImage decimate2(const GrayImage& img);
} // namespace detail

} // namespace crackalign

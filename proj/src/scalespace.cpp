#include "crackalign/scalespace.hpp"

#include "crackalign/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace crackalign {

double ScaleSchedule::sigma(int level) const {
    return base_sigma * std::pow(2.0, static_cast<double>(level) / sublevels);
}

double ScaleSchedule::time(int level) const {
    const double s = sigma(level);
    return 0.5 * s * s;
}

namespace detail {

std::vector<double> gaussian_taps(double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> taps(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        taps[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += taps[i + r];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

void scharr_taps(int scale, std::vector<double>& smooth, std::vector<double>& deriv) {
    const int n = 2 * scale + 1;
    smooth.assign(n, 0.0);
    deriv.assign(n, 0.0);
    smooth[0] = 3.0 / 16.0;
    smooth[scale] = 10.0 / 16.0;
    smooth[n - 1] = 3.0 / 16.0;
    deriv[0] = -1.0 / (2.0 * scale);
    deriv[n - 1] = 1.0 / (2.0 * scale);
}

void scharr_derivatives(const GrayImage& img, int scale, GrayImage& lx, GrayImage& ly) {
    std::vector<double> smooth, deriv;
    scharr_taps(scale, smooth, deriv);
    lx = kernels::par::convolve_cols(kernels::par::convolve_rows(img, deriv), smooth);
    ly = kernels::par::convolve_rows(kernels::par::convolve_cols(img, deriv), smooth);
}

GrayImage decimate2(const GrayImage& img) {
    const int w = (img.width + 1) / 2;
    const int h = (img.height + 1) / 2;
    GrayImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(x, y) = img.at(2 * x, 2 * y);
    return out;
}

} // namespace detail

GrayImage gaussian_blur(const GrayImage& img, double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_blur: negative sigma");
    if (sigma == 0.0) return img;
    const std::vector<double> taps = detail::gaussian_taps(sigma);
    return kernels::par::convolve_cols(kernels::par::convolve_rows(img, taps), taps);
}

GradientField gradient(const GrayImage& img) {
    if (img.width < 3 || img.height < 3) throw std::invalid_argument("gradient: image smaller than 3x3");
    GradientField g;
    detail::scharr_derivatives(img, 1, g.lx, g.ly);
    g.mag = kernels::par::magnitude(g.lx, g.ly);
    return g;
}

double estimate_kappa(const GrayImage& img, double percentile) {
    if (!(percentile > 0.0 && percentile < 1.0))
        throw std::invalid_argument("estimate_kappa: percentile must lie in (0,1)");
    constexpr int kBins = 300;
    constexpr double kFallback = 0.01;
    const GradientField g = gradient(gaussian_blur(img, 1.0));

    double max_mag = 0.0;
    for (double m : g.mag.data) max_mag = std::max(max_mag, m);
    if (max_mag <= 0.0) return kFallback;

    std::vector<std::size_t> hist(kBins, 0);
    std::size_t npoints = 0;
    for (double m : g.mag.data) {
        if (m <= 1e-12) continue; // zero-gradient pixels, incl. blur residue
        int bin = static_cast<int>(kBins * (m / max_mag));
        if (bin >= kBins) bin = kBins - 1;
        ++hist[bin];
        ++npoints;
    }
    if (npoints == 0) return kFallback;

    const std::size_t target = static_cast<std::size_t>(percentile * npoints);
    std::size_t seen = 0;
    int k = 0;
    while (seen < target && k < kBins) seen += hist[k++];
    const double kappa = max_mag * static_cast<double>(k) / kBins;
    return kappa > 0.0 ? kappa : kFallback;
}

GrayImage conductivity(const GrayImage& mag, double kappa) {
    return kernels::par::conductivity_map(mag, kappa);
}

GrayImage diffuse_step(const GrayImage& L, const GrayImage& c, double dt) {
    return kernels::par::aos_step(L, c, dt);
}

namespace {

void check_min_size(const GrayImage& img, const ScaleSchedule& schedule) {
    if (img.width < 32 || img.height < 32)
        throw std::invalid_argument("scale space: image smaller than 32x32");
    if (schedule.octaves < 1 || schedule.sublevels < 1 || schedule.base_sigma <= 0.0)
        throw std::invalid_argument("scale space: bad schedule");
    const int top = schedule.octaves - 1;
    if ((img.width >> top) < 16 || (img.height >> top) < 16)
        throw std::invalid_argument("scale space: image too small for requested octaves (needs >= 16 px per side at every octave)");
}

// Evolve `L` in place from time t_from to t_to on the current octave grid.
// The span is split into sub-steps of at most dt_max (base-frame time), the
// conductivity is refreshed before each sub-step, and the solver gets the
// step converted to octave units (time scales with the squared grid spacing).
void evolve_span(GrayImage& L, double t_from, double t_to, double kappa_eff, int downscale) {
    constexpr double kDtMax = 10.0;
    const double span = t_to - t_from;
    if (span <= 0.0) return;
    const int nsub = static_cast<int>(std::ceil(span / kDtMax));
    const double dt_base = span / nsub;
    const double dt_oct = dt_base / (static_cast<double>(downscale) * downscale);
    for (int s = 0; s < nsub; ++s) {
        GradientField g = gradient(L);
        GrayImage c = conductivity(g.mag, kappa_eff);
        L = diffuse_step(L, c, dt_oct);
    }
}

} // namespace

NonlinearScaleSpace build_nonlinear_scale_space(const GrayImage& img, const ScaleSchedule& schedule) {
    check_min_size(img, schedule);
    NonlinearScaleSpace space;
    space.schedule = schedule;
    space.kappa = estimate_kappa(img);

    GrayImage current = gaussian_blur(img, 1.0);
    double t_prev = 0.5; // the sigma=1 pre-smooth sits at t = 1/2
    int octave = 0;

    space.levels.reserve(schedule.level_count());
    for (int i = 0; i < schedule.level_count(); ++i) {
        while (schedule.octave_of(i) > octave) {
            current = detail::decimate2(current);
            ++octave;
        }
        const int downscale = 1 << octave;
        // the contrast gate halves per octave so structure surviving to the
        // coarse levels keeps classifying as edge
        const double kappa_eff = space.kappa / downscale;
        EvolutionLevel level;
        level.sigma = schedule.sigma(i);
        level.time = schedule.time(i);
        level.octave = octave;
        level.downscale = downscale;
        evolve_span(current, t_prev, level.time, kappa_eff, downscale);
        t_prev = level.time;

        level.L = current;
        const int op_scale = std::max(1, static_cast<int>(std::lround(level.sigma / downscale)));
        detail::scharr_derivatives(level.L, op_scale, level.Lx, level.Ly);
        detail::scharr_derivatives(level.Lx, op_scale, level.Lxx, level.Lxy);
        {
            GrayImage lyx;
            detail::scharr_derivatives(level.Ly, op_scale, lyx, level.Lyy);
        }
        space.levels.push_back(std::move(level));
    }
    return space;
}

GaussianPyramid build_gaussian_pyramid(const GrayImage& img, const ScaleSchedule& schedule) {
    check_min_size(img, schedule);
    GaussianPyramid pyr;
    pyr.schedule = schedule;
    const int planes_per_octave = schedule.sublevels + 3;

    GrayImage base = img;
    for (int o = 0; o < schedule.octaves; ++o) {
        GaussianPyramid::Octave oct;
        oct.downscale = 1 << o;
        oct.planes.reserve(planes_per_octave);
        for (int s = 0; s < planes_per_octave; ++s) {
            const double target = schedule.base_sigma * std::pow(2.0, static_cast<double>(s) / schedule.sublevels);
            if (o == 0) {
                // first octave blurs straight from the input
                oct.planes.push_back(gaussian_blur(base, target));
            } else if (s == 0) {
                oct.planes.push_back(base);
            } else {
                // octave base already carries base_sigma; add the difference
                const double inc = std::sqrt(std::max(0.0, target * target - schedule.base_sigma * schedule.base_sigma));
                oct.planes.push_back(gaussian_blur(base, inc));
            }
        }
        oct.dogs.reserve(planes_per_octave - 1);
        for (int s = 0; s + 1 < planes_per_octave; ++s) {
            GrayImage d(oct.planes[s].width, oct.planes[s].height);
            for (std::size_t i = 0; i < d.size(); ++i)
                d.data[i] = oct.planes[s + 1].data[i] - oct.planes[s].data[i];
            oct.dogs.push_back(std::move(d));
        }
        oct.lx.resize(planes_per_octave);
        oct.ly.resize(planes_per_octave);
        for (int s = 0; s < planes_per_octave; ++s)
            detail::scharr_derivatives(oct.planes[s], 1, oct.lx[s], oct.ly[s]);

        if (o + 1 < schedule.octaves) {
            // next octave base: decimate the plane at 2*base_sigma
            base = detail::decimate2(oct.planes[schedule.sublevels]);
        }
        pyr.octaves.push_back(std::move(oct));
    }
    return pyr;
}

} // namespace crackalign

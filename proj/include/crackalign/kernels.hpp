#pragma once

#include "crackalign/image.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace crackalign::kernels {

/// Raster kernels behind the scale-space, detection and warping stages.
///
/// Every kernel exists twice: kernels::serial holds the plain reference
/// loops, kernels::par runs the same per-row/per-column workers under
/// OpenMP. Writes are disjoint and there are no floating-point reductions,
/// so the two variants are bitwise identical for any schedule or thread
/// count; tests/test_kernels.cpp asserts that and tools/bench_kernels
/// compares their throughput.

namespace serial {

/// Horizontal pass of a separable correlation, mirror (reflect-101) borders.
/// The kernel has odd length; taps index offsets -r..r.
GrayImage convolve_rows(const GrayImage& src, std::span<const double> taps);

/// Vertical pass of a separable correlation, mirror borders.
GrayImage convolve_cols(const GrayImage& src, std::span<const double> taps);

/// Elementwise sqrt(lx^2 + ly^2).
GrayImage magnitude(const GrayImage& lx, const GrayImage& ly);

/// Perona-Malik g2 conductivity: 1 / (1 + (m/kappa)^2).
GrayImage conductivity_map(const GrayImage& mag, double kappa);

/// One semi-implicit AOS diffusion step of size dt:
///   out = 1/2 * sum_axis (I - 2*dt*A_axis(c))^-1 L
/// A_axis is the 1-D divergence operator with half-pixel conductivities
/// (c_i + c_j)/2 and homogeneous Neumann ends; each 1-D system is
/// tridiagonal and solved with the Thomas algorithm.
GrayImage aos_step(const GrayImage& L, const GrayImage& c, double dt);

/// Scale-normalized Hessian determinant: s^4 * (lxx*lyy - lxy^2).
GrayImage hessian_det(const GrayImage& lxx, const GrayImage& lyy, const GrayImage& lxy, double scale);

/// Inverse warp: out(q) = bilinear_sample(src, M*q) for the 3x3 row-major
/// homogeneous map M (output frame -> source frame). valid[q] = 1 when the
/// preimage lands inside the source rectangle.
void inverse_warp(const GrayImage& src, const std::array<double, 9>& out_to_src, GrayImage& out,
                  std::vector<std::uint8_t>& valid);

} // namespace serial

namespace par {

GrayImage convolve_rows(const GrayImage& src, std::span<const double> taps);
GrayImage convolve_cols(const GrayImage& src, std::span<const double> taps);
GrayImage magnitude(const GrayImage& lx, const GrayImage& ly);
GrayImage conductivity_map(const GrayImage& mag, double kappa);
GrayImage aos_step(const GrayImage& L, const GrayImage& c, double dt);
GrayImage hessian_det(const GrayImage& lxx, const GrayImage& lyy, const GrayImage& lxy, double scale);
void inverse_warp(const GrayImage& src, const std::array<double, 9>& out_to_src, GrayImage& out,
                  std::vector<std::uint8_t>& valid);

} // namespace par

} // namespace crackalign::kernels

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crackalign {

/// Row-major single-channel raster with double samples.
///
/// Images that come from or go to disk keep intensities in [0,1]; derivative
/// and response planes reuse the same container without that restriction.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
        if (w <= 0 || h <= 0)
            throw std::invalid_argument("GrayImage: dimensions must be positive");
    }

    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double* row(int y) { return data.data() + static_cast<std::size_t>(y) * width; }
    const double* row(int y) const { return data.data() + static_cast<std::size_t>(y) * width; }

    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    std::size_t size() const { return data.size(); }
    bool same_size(const GrayImage& o) const { return width == o.width && height == o.height; }
};

/// Interleaved 8-bit RGB raster (overlay rendering and RGB PNG I/O).
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // r,g,b per pixel

    RgbImage() = default;
    RgbImage(int w, int h, std::uint8_t r = 255, std::uint8_t g = 255, std::uint8_t b = 255);

    std::uint8_t* px(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t* px(int x, int y) const {
        return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

struct ImageIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Decode a PNG (8-bit gray or RGB) or binary PGM (P5) file. 8-bit samples
/// map to [0,1] as v/255; color converts to Rec. 601 luma.
GrayImage load_image(const std::string& path);

/// Encode as 8-bit gray PNG (or PGM when the path ends in .pgm).
/// Round-tripping through disk changes any pixel by at most 1/255.
void save_image(const GrayImage& img, const std::string& path);

/// Encode an RGB raster as 8-bit PNG.
void save_rgb(const RgbImage& img, const std::string& path);

/// Bilinear interpolation of the four lattice neighbours. Coordinates outside
/// [0,w-1]x[0,h-1] return the background value 0.
double bilinear_sample(const GrayImage& img, double x, double y);

} // namespace crackalign

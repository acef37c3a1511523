#include "crackalign/image.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace crackalign {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

constexpr double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

bool has_suffix(const std::string& s, const char* suf) {
    std::string t(suf);
    if (s.size() < t.size()) return false;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[s.size() - t.size() + i])) != t[i]) return false;
    }
    return true;
}

// ---- PGM (P5, maxval 255) ----

int pgm_next_int(std::FILE* f, const std::string& path) {
    int c;
    // skip whitespace and '#' comments
    for (;;) {
        c = std::fgetc(f);
        if (c == EOF) throw ImageIoError(path + ": truncated PGM header");
        if (c == '#') {
            while (c != EOF && c != '\n') c = std::fgetc(f);
            continue;
        }
        if (!std::isspace(c)) break;
    }
    int value = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
        value = value * 10 + (c - '0');
        any = true;
        c = std::fgetc(f);
    }
    if (!any) throw ImageIoError(path + ": malformed PGM header");
    return value;
}

GrayImage load_pgm(std::FILE* f, const std::string& path) {
    char magic[2];
    if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || magic[1] != '5')
        throw ImageIoError(path + ": not a binary PGM");
    const int w = pgm_next_int(f, path);
    const int h = pgm_next_int(f, path);
    const int maxval = pgm_next_int(f, path);
    if (w <= 0 || h <= 0) throw ImageIoError(path + ": zero-dimension image");
    if (maxval != 255) throw ImageIoError(path + ": unsupported PGM maxval (only 255)");
    // exactly one whitespace byte separates header and samples; pgm_next_int
    // already consumed it as the digit terminator
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(w) * h);
    if (std::fread(raw.data(), 1, raw.size(), f) != raw.size())
        throw ImageIoError(path + ": truncated PGM data");
    GrayImage img(w, h);
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i] / 255.0;
    return img;
}

// ---- PNG via libpng ----

GrayImage load_png(std::FILE* f, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError(path + ": libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageIoError(path + ": libpng init failed");
    }
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError(path + ": PNG decode error");
    }
    png_init_io(png, f);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    if (w == 0 || h == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError(path + ": zero-dimension image");
    }
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    // normalize everything to 8-bit gray or RGB
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);

    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError(path + ": unsupported PNG channel layout");
    }
    pixels.resize(static_cast<std::size_t>(w) * h * channels);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = pixels.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    if (channels == 1) {
        for (std::size_t i = 0; i < img.size(); ++i) img.data[i] = pixels[i] / 255.0;
    } else {
        for (std::size_t i = 0; i < img.size(); ++i) {
            const std::uint8_t* p = pixels.data() + 3 * i;
            img.data[i] = (kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2]) / 255.0;
        }
    }
    return img;
}

void save_png_impl(const std::uint8_t* data, int w, int h, int channels, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw ImageIoError(path + ": cannot open for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw ImageIoError(path + ": libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageIoError(path + ": libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError(path + ": PNG encode error");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, w, h, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(data + static_cast<std::size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::uint8_t quantize(double v) {
    if (v <= 0.0) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

} // namespace

RgbImage::RgbImage(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b)
    : width(w), height(h), data(3 * static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("RgbImage: dimensions must be positive");
    for (std::size_t i = 0; i < data.size(); i += 3) {
        data[i] = r;
        data[i + 1] = g;
        data[i + 2] = b;
    }
}

GrayImage load_image(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw ImageIoError(path + ": cannot open file");
    unsigned char magic[8] = {0};
    const std::size_t got = std::fread(magic, 1, sizeof magic, f.get());
    std::rewind(f.get());
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (got >= 8 && std::memcmp(magic, png_sig, 8) == 0) return load_png(f.get(), path);
    if (got >= 2 && magic[0] == 'P' && magic[1] == '5') return load_pgm(f.get(), path);
    throw ImageIoError(path + ": unsupported format (expected PNG or binary PGM)");
}

void save_image(const GrayImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0) throw ImageIoError(path + ": refusing to save empty image");
    std::vector<std::uint8_t> raw(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) raw[i] = quantize(img.data[i]);
    if (has_suffix(path, ".pgm")) {
        FilePtr f(std::fopen(path.c_str(), "wb"));
        if (!f) throw ImageIoError(path + ": cannot open for writing");
        std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
        if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
            std::fwrite(raw.data(), 1, raw.size(), f.get()) != raw.size())
            throw ImageIoError(path + ": write failed");
        return;
    }
    save_png_impl(raw.data(), img.width, img.height, 1, path);
}

void save_rgb(const RgbImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0) throw ImageIoError(path + ": refusing to save empty image");
    save_png_impl(img.data.data(), img.width, img.height, 3, path);
}

double bilinear_sample(const GrayImage& img, double x, double y) {
    // inverted bounds test so NaN coordinates also take the background path
    if (!(x >= 0.0 && y >= 0.0 && x <= img.width - 1.0 && y <= img.height - 1.0)) return 0.0;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = x0 + 1 < img.width ? x0 + 1 : x0;
    const int y1 = y0 + 1 < img.height ? y0 + 1 : y0;
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0);
    const double bot = (1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1);
    return (1.0 - fy) * top + fy * bot;
}

} // namespace crackalign

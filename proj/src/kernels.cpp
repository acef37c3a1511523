#include "crackalign/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace crackalign::kernels {

namespace {

// reflect-101 folding: d c b | a b c d | c b a
int mirror(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

void check_odd(std::span<const double> taps) {
    if (taps.empty() || taps.size() % 2 == 0)
        throw std::invalid_argument("convolve: kernel length must be odd");
}

void convolve_row_worker(const GrayImage& src, std::span<const double> taps, GrayImage& dst, int y) {
    const int w = src.width;
    const int r = static_cast<int>(taps.size()) / 2;
    const double* in = src.row(y);
    double* out = dst.row(y);
    const int safe_lo = r < w ? r : w;
    const int safe_hi = w - r > safe_lo ? w - r : safe_lo;
    for (int x = 0; x < safe_lo; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += taps[k + r] * in[mirror(x + k, w)];
        out[x] = acc;
    }
    for (int x = safe_lo; x < safe_hi; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += taps[k + r] * in[x + k];
        out[x] = acc;
    }
    for (int x = safe_hi; x < w; ++x) {
        double acc = 0.0;
        for (int k = -r; k <= r; ++k) acc += taps[k + r] * in[mirror(x + k, w)];
        out[x] = acc;
    }
}

void convolve_col_worker(const GrayImage& src, std::span<const double> taps, GrayImage& dst, int y) {
    const int w = src.width;
    const int h = src.height;
    const int r = static_cast<int>(taps.size()) / 2;
    double* out = dst.row(y);
    for (int x = 0; x < w; ++x) out[x] = 0.0;
    for (int k = -r; k <= r; ++k) {
        const double t = taps[k + r];
        const double* in = src.row(mirror(y + k, h));
        for (int x = 0; x < w; ++x) out[x] += t * in[x];
    }
}

// Thomas solve of (I - 2 dt A) x = rhs for one 1-D line with conductivity c.
// half[i] = (c[i] + c[i+1]) / 2 must hold n-1 entries; cw/rhs/x are scratch
// of length n. Strict diagonal dominance makes the elimination stable.
void thomas_line(const double* rhs, const double* half, double dt, int n, double* cw, double* x) {
    const double f = 2.0 * dt;
    // forward sweep; diag_i = 1 + f*(half[i-1] + half[i]), off_i = -f*half[i]
    double diag0 = 1.0 + f * half[0];
    cw[0] = -f * half[0] / diag0;
    x[0] = rhs[0] / diag0;
    for (int i = 1; i < n; ++i) {
        const double lower = -f * half[i - 1];
        const double diag = 1.0 + f * ((i + 1 < n ? half[i] : 0.0) + half[i - 1]);
        const double m = diag - lower * cw[i - 1];
        cw[i] = (i + 1 < n ? -f * half[i] : 0.0) / m;
        x[i] = (rhs[i] - lower * x[i - 1]) / m;
    }
    for (int i = n - 2; i >= 0; --i) x[i] -= cw[i] * x[i + 1];
}

void aos_row_worker(const GrayImage& L, const GrayImage& c, double dt, GrayImage& out, int y,
                    std::vector<double>& half, std::vector<double>& cw, std::vector<double>& x) {
    const int w = L.width;
    const double* lrow = L.row(y);
    const double* crow = c.row(y);
    if (w == 1) {
        out.row(y)[0] = 0.5 * lrow[0];
        return;
    }
    for (int i = 0; i + 1 < w; ++i) half[i] = 0.5 * (crow[i] + crow[i + 1]);
    thomas_line(lrow, half.data(), dt, w, cw.data(), x.data());
    double* orow = out.row(y);
    for (int i = 0; i < w; ++i) orow[i] = 0.5 * x[i];
}

void aos_col_worker(const GrayImage& L, const GrayImage& c, double dt, GrayImage& out, int col,
                    std::vector<double>& half, std::vector<double>& rhs, std::vector<double>& cw,
                    std::vector<double>& x) {
    const int h = L.height;
    if (h == 1) {
        out.at(col, 0) += 0.5 * L.at(col, 0);
        return;
    }
    for (int i = 0; i < h; ++i) rhs[i] = L.at(col, i);
    for (int i = 0; i + 1 < h; ++i) half[i] = 0.5 * (c.at(col, i) + c.at(col, i + 1));
    thomas_line(rhs.data(), half.data(), dt, h, cw.data(), x.data());
    for (int i = 0; i < h; ++i) out.at(col, i) += 0.5 * x[i];
}

void warp_row_worker(const GrayImage& src, const std::array<double, 9>& m, GrayImage& out,
                     std::vector<std::uint8_t>& valid, int y) {
    const int w = out.width;
    double* orow = out.row(y);
    std::uint8_t* vrow = valid.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
        const double wq = m[6] * x + m[7] * y + m[8];
        if (std::fabs(wq) < 1e-12) {
            orow[x] = 0.0;
            vrow[x] = 0;
            continue;
        }
        const double sx = (m[0] * x + m[1] * y + m[2]) / wq;
        const double sy = (m[3] * x + m[4] * y + m[5]) / wq;
        const bool inside = sx >= 0.0 && sy >= 0.0 && sx <= src.width - 1.0 && sy <= src.height - 1.0;
        orow[x] = inside ? bilinear_sample(src, sx, sy) : 0.0;
        vrow[x] = inside ? 1 : 0;
    }
}

void validate_aos(const GrayImage& L, const GrayImage& c, double dt) {
    if (!L.same_size(c)) throw std::invalid_argument("aos_step: conductivity dimensions mismatch");
    if (!(dt > 0.0)) throw std::invalid_argument("aos_step: dt must be positive");
}

} // namespace

namespace serial {

GrayImage convolve_rows(const GrayImage& src, std::span<const double> taps) {
    check_odd(taps);
    GrayImage dst(src.width, src.height);
    for (int y = 0; y < src.height; ++y) convolve_row_worker(src, taps, dst, y);
    return dst;
}

GrayImage convolve_cols(const GrayImage& src, std::span<const double> taps) {
    check_odd(taps);
    GrayImage dst(src.width, src.height);
    for (int y = 0; y < src.height; ++y) convolve_col_worker(src, taps, dst, y);
    return dst;
}

GrayImage magnitude(const GrayImage& lx, const GrayImage& ly) {
    if (!lx.same_size(ly)) throw std::invalid_argument("magnitude: dimensions mismatch");
    GrayImage m(lx.width, lx.height);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data[i] = std::sqrt(lx.data[i] * lx.data[i] + ly.data[i] * ly.data[i]);
    return m;
}

GrayImage conductivity_map(const GrayImage& mag, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("conductivity: kappa must be positive");
    GrayImage c(mag.width, mag.height);
    const double inv_k2 = 1.0 / (kappa * kappa);
    for (std::size_t i = 0; i < c.size(); ++i)
        c.data[i] = 1.0 / (1.0 + mag.data[i] * mag.data[i] * inv_k2);
    return c;
}

GrayImage aos_step(const GrayImage& L, const GrayImage& c, double dt) {
    validate_aos(L, c, dt);
    GrayImage out(L.width, L.height, 0.0);
    {
        std::vector<double> half(L.width), cw(L.width), x(L.width);
        for (int y = 0; y < L.height; ++y) aos_row_worker(L, c, dt, out, y, half, cw, x);
    }
    {
        std::vector<double> half(L.height), rhs(L.height), cw(L.height), x(L.height);
        for (int col = 0; col < L.width; ++col) aos_col_worker(L, c, dt, out, col, half, rhs, cw, x);
    }
    return out;
}

GrayImage hessian_det(const GrayImage& lxx, const GrayImage& lyy, const GrayImage& lxy, double scale) {
    if (!lxx.same_size(lyy) || !lxx.same_size(lxy))
        throw std::invalid_argument("hessian_det: dimensions mismatch");
    GrayImage r(lxx.width, lxx.height);
    const double s4 = scale * scale * scale * scale;
    for (std::size_t i = 0; i < r.size(); ++i)
        r.data[i] = s4 * (lxx.data[i] * lyy.data[i] - lxy.data[i] * lxy.data[i]);
    return r;
}

void inverse_warp(const GrayImage& src, const std::array<double, 9>& out_to_src, GrayImage& out,
                  std::vector<std::uint8_t>& valid) {
    valid.assign(out.size(), 0);
    for (int y = 0; y < out.height; ++y) warp_row_worker(src, out_to_src, out, valid, y);
}

} // namespace serial

namespace par {

GrayImage convolve_rows(const GrayImage& src, std::span<const double> taps) {
    check_odd(taps);
    GrayImage dst(src.width, src.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < src.height; ++y) convolve_row_worker(src, taps, dst, y);
    return dst;
}

GrayImage convolve_cols(const GrayImage& src, std::span<const double> taps) {
    check_odd(taps);
    GrayImage dst(src.width, src.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < src.height; ++y) convolve_col_worker(src, taps, dst, y);
    return dst;
}

GrayImage magnitude(const GrayImage& lx, const GrayImage& ly) {
    if (!lx.same_size(ly)) throw std::invalid_argument("magnitude: dimensions mismatch");
    GrayImage m(lx.width, lx.height);
    const std::int64_t n = static_cast<std::int64_t>(m.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        m.data[i] = std::sqrt(lx.data[i] * lx.data[i] + ly.data[i] * ly.data[i]);
    return m;
}

GrayImage conductivity_map(const GrayImage& mag, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("conductivity: kappa must be positive");
    GrayImage c(mag.width, mag.height);
    const double inv_k2 = 1.0 / (kappa * kappa);
    const std::int64_t n = static_cast<std::int64_t>(c.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        c.data[i] = 1.0 / (1.0 + mag.data[i] * mag.data[i] * inv_k2);
    return c;
}

GrayImage aos_step(const GrayImage& L, const GrayImage& c, double dt) {
    validate_aos(L, c, dt);
    GrayImage out(L.width, L.height, 0.0);
#pragma omp parallel
    {
        std::vector<double> half(L.width), cw(L.width), x(L.width);
#pragma omp for schedule(static)
        for (int y = 0; y < L.height; ++y) aos_row_worker(L, c, dt, out, y, half, cw, x);
    }
#pragma omp parallel
    {
        std::vector<double> half(L.height), rhs(L.height), cw(L.height), x(L.height);
#pragma omp for schedule(static)
        for (int col = 0; col < L.width; ++col) aos_col_worker(L, c, dt, out, col, half, rhs, cw, x);
    }
    return out;
}

GrayImage hessian_det(const GrayImage& lxx, const GrayImage& lyy, const GrayImage& lxy, double scale) {
    if (!lxx.same_size(lyy) || !lxx.same_size(lxy))
        throw std::invalid_argument("hessian_det: dimensions mismatch");
    GrayImage r(lxx.width, lxx.height);
    const double s4 = scale * scale * scale * scale;
    const std::int64_t n = static_cast<std::int64_t>(r.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        r.data[i] = s4 * (lxx.data[i] * lyy.data[i] - lxy.data[i] * lxy.data[i]);
    return r;
}

void inverse_warp(const GrayImage& src, const std::array<double, 9>& out_to_src, GrayImage& out,
                  std::vector<std::uint8_t>& valid) {
    valid.assign(out.size(), 0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < out.height; ++y) warp_row_worker(src, out_to_src, out, valid, y);
}

} // namespace par

} // namespace crackalign::kernels

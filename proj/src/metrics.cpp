#include "crackalign/metrics.hpp"

#include "crackalign/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace crackalign {

std::size_t BinaryMask::count() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits) n += b != 0;
    return n;
}

WarpResult warp_image(const GrayImage& img, const Homography& H, int out_w, int out_h) {
    if (out_w <= 0 || out_h <= 0) throw std::invalid_argument("warp_image: bad output size");
    const Homography inv = invert(H); // throws on singular H
    WarpResult r;
    r.image = GrayImage(out_w, out_h);
    r.valid = BinaryMask(out_w, out_h);
    kernels::par::inverse_warp(img, inv.h, r.image, r.valid.bits);
    return r;
}

namespace {

// Otsu threshold over an 8-bit histogram; returns the bin maximizing the
// between-class variance (smallest bin on ties).
int otsu_threshold(const std::array<std::size_t, 256>& hist, std::size_t total) {
    double sum = 0.0;
    for (int i = 0; i < 256; ++i) sum += static_cast<double>(i) * hist[i];
    double sum_b = 0.0;
    std::size_t w_b = 0;
    double best = -1.0;
    int best_t = 0;
    for (int t = 0; t < 256; ++t) {
        w_b += hist[t];
        if (w_b == 0) continue;
        const std::size_t w_f = total - w_b;
        if (w_f == 0) break;
        sum_b += static_cast<double>(t) * hist[t];
        const double m_b = sum_b / w_b;
        const double m_f = (sum - sum_b) / w_f;
        const double var = static_cast<double>(w_b) * static_cast<double>(w_f) * (m_b - m_f) * (m_b - m_f);
        if (var > best) {
            best = var;
            best_t = t;
        }
    }
    return best_t;
}

// Opening with a 3x3 cross. Erosion treats out-of-image as foreground and
// dilation as background (the usual border convention), so components
// touching the frame are not eaten from the border side.
BinaryMask open_cross(const BinaryMask& m) {
    const int w = m.width, h = m.height;
    BinaryMask eroded(w, h), out(w, h);
    auto at_or = [&](const BinaryMask& mm, int x, int y, std::uint8_t outside) -> std::uint8_t {
        return mm.in_bounds(x, y) ? mm.at(x, y) : outside;
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            eroded.at(x, y) = m.at(x, y) && at_or(m, x - 1, y, 1) && at_or(m, x + 1, y, 1) &&
                              at_or(m, x, y - 1, 1) && at_or(m, x, y + 1, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(x, y) = eroded.at(x, y) || at_or(eroded, x - 1, y, 0) || at_or(eroded, x + 1, y, 0) ||
                           at_or(eroded, x, y - 1, 0) || at_or(eroded, x, y + 1, 0);
    return out;
}

BinaryMask largest_component(const BinaryMask& m) {
    const int w = m.width, h = m.height;
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    int best_label = -1;
    std::size_t best_size = 0;
    int next = 0;
    std::vector<std::pair<int, int>> stack;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            if (!m.at(sx, sy) || label[static_cast<std::size_t>(sy) * w + sx] >= 0) continue;
            const int id = next++;
            std::size_t size = 0;
            stack.clear();
            stack.emplace_back(sx, sy);
            label[static_cast<std::size_t>(sy) * w + sx] = id;
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                ++size;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        const int nx = x + dx, ny = y + dy;
                        if (!m.in_bounds(nx, ny) || !m.at(nx, ny)) continue;
                        int& l = label[static_cast<std::size_t>(ny) * w + nx];
                        if (l >= 0) continue;
                        l = id;
                        stack.emplace_back(nx, ny);
                    }
            }
            if (size > best_size) {
                best_size = size;
                best_label = id;
            }
        }
    }
    BinaryMask out(w, h);
    if (best_label < 0) return out;
    for (std::size_t i = 0; i < out.bits.size(); ++i) out.bits[i] = label[i] == best_label;
    return out;
}

BinaryMask segment_impl(const GrayImage& img, const BinaryMask* valid) {
    if (valid && (valid->width != img.width || valid->height != img.height))
        throw std::invalid_argument("segment_crack: valid mask dimensions mismatch");
    std::array<std::size_t, 256> hist{};
    std::size_t total = 0;
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (valid && !valid->bits[i]) continue;
        const double inv = 1.0 - std::clamp(img.data[i], 0.0, 1.0);
        int q = static_cast<int>(inv * 255.0 + 0.5);
        if (q > 255) q = 255;
        ++hist[q];
        ++total;
    }
    BinaryMask raw(img.width, img.height);
    if (total == 0) return raw;
    const int t = otsu_threshold(hist, total);
    for (std::size_t i = 0; i < img.size(); ++i) {
        if (valid && !valid->bits[i]) continue;
        const double inv = 1.0 - std::clamp(img.data[i], 0.0, 1.0);
        int q = static_cast<int>(inv * 255.0 + 0.5);
        if (q > 255) q = 255;
        raw.bits[i] = q > t;
    }
    return largest_component(open_cross(raw));
}

} // namespace

BinaryMask segment_crack(const GrayImage& img) { return segment_impl(img, nullptr); }

BinaryMask segment_crack(const GrayImage& img, const BinaryMask& valid) { return segment_impl(img, &valid); }

BinaryMask skeletonize(const BinaryMask& mask) {
    const int w = mask.width, h = mask.height;
    BinaryMask s = mask;
    if (w == 0 || h == 0) return s;
    auto px = [&](int x, int y) -> int { return s.in_bounds(x, y) ? s.at(x, y) : 0; };
    std::vector<std::pair<int, int>> kill;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int phase = 0; phase < 2; ++phase) {
            kill.clear();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    if (!s.at(x, y)) continue;
                    const int p2 = px(x, y - 1), p3 = px(x + 1, y - 1), p4 = px(x + 1, y);
                    const int p5 = px(x + 1, y + 1), p6 = px(x, y + 1), p7 = px(x - 1, y + 1);
                    const int p8 = px(x - 1, y), p9 = px(x - 1, y - 1);
                    const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    const int ring[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    int a = 0;
                    for (int i = 0; i < 8; ++i) a += ring[i] == 0 && ring[i + 1] == 1;
                    if (a != 1) continue;
                    if (phase == 0) {
                        if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
                    } else {
                        if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
                    }
                    kill.emplace_back(x, y);
                }
            }
            for (auto [x, y] : kill) s.at(x, y) = 0;
            changed = changed || !kill.empty();
        }
    }
    return s;
}

std::vector<double> distance_transform(const BinaryMask& mask) {
    // Felzenszwalb-Huttenlocher exact squared EDT on a grid padded with one
    // background ring, so image borders count as background.
    const int w = mask.width + 2, h = mask.height + 2;
    const double kInf = 1e20;
    std::vector<double> f(static_cast<std::size_t>(w) * h, 0.0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            f[static_cast<std::size_t>(y + 1) * w + (x + 1)] = mask.at(x, y) ? kInf : 0.0;

    auto dt_1d = [&](const double* src, double* dst, int n, std::vector<int>& v, std::vector<double>& z) {
        int k = 0;
        v[0] = 0;
        z[0] = -kInf;
        z[1] = kInf;
        for (int q = 1; q < n; ++q) {
            double s = ((src[q] + q * q) - (src[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            while (s <= z[k]) {
                --k;
                s = ((src[q] + q * q) - (src[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = kInf;
        }
        k = 0;
        for (int q = 0; q < n; ++q) {
            while (z[k + 1] < q) ++k;
            const double d = q - v[k];
            dst[q] = d * d + src[v[k]];
        }
    };

    std::vector<double> tmp(f.size());
    {
        std::vector<int> v(std::max(w, h));
        std::vector<double> z(std::max(w, h) + 1);
        std::vector<double> col_in(h), col_out(h);
        for (int x = 0; x < w; ++x) {
            for (int y = 0; y < h; ++y) col_in[y] = f[static_cast<std::size_t>(y) * w + x];
            dt_1d(col_in.data(), col_out.data(), h, v, z);
            for (int y = 0; y < h; ++y) tmp[static_cast<std::size_t>(y) * w + x] = col_out[y];
        }
        std::vector<double> row_out(w);
        for (int y = 0; y < h; ++y) {
            dt_1d(&tmp[static_cast<std::size_t>(y) * w], row_out.data(), w, v, z);
            for (int x = 0; x < w; ++x) f[static_cast<std::size_t>(y) * w + x] = row_out[x];
        }
    }

    std::vector<double> out(mask.bits.size(), 0.0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            out[static_cast<std::size_t>(y) * mask.width + x] =
                std::sqrt(f[static_cast<std::size_t>(y + 1) * w + (x + 1)]);
    return out;
}

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

// Total weight of a minimum spanning forest over the skeleton's 8-adjacency
// graph: axial steps cost 1, diagonal steps sqrt(2). Kruskal with the two
// weight classes processed in order.
double spine_length_of(const BinaryMask& skel) {
    const int w = skel.width, h = skel.height;
    std::vector<int> id(static_cast<std::size_t>(w) * h, -1);
    int n = 0;
    for (std::size_t i = 0; i < skel.bits.size(); ++i)
        if (skel.bits[i]) id[i] = n++;
    if (n == 0) return 0.0;
    UnionFind uf(n);
    double total = 0.0;
    const double kDiag = std::sqrt(2.0);
    // axial edges first
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!skel.at(x, y)) continue;
            const int a = id[static_cast<std::size_t>(y) * w + x];
            if (x + 1 < w && skel.at(x + 1, y) && uf.unite(a, id[static_cast<std::size_t>(y) * w + x + 1]))
                total += 1.0;
            if (y + 1 < h && skel.at(x, y + 1) && uf.unite(a, id[static_cast<std::size_t>(y + 1) * w + x]))
                total += 1.0;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!skel.at(x, y)) continue;
            const int a = id[static_cast<std::size_t>(y) * w + x];
            if (x + 1 < w && y + 1 < h && skel.at(x + 1, y + 1) &&
                uf.unite(a, id[static_cast<std::size_t>(y + 1) * w + x + 1]))
                total += kDiag;
            if (x > 0 && y + 1 < h && skel.at(x - 1, y + 1) &&
                uf.unite(a, id[static_cast<std::size_t>(y + 1) * w + x - 1]))
                total += kDiag;
        }
    return total;
}

} // namespace

CrackMetrics compute_metrics(const BinaryMask& mask) {
    CrackMetrics m;
    m.area = static_cast<double>(mask.count());
    if (m.area == 0.0) return m;
    const BinaryMask skel = skeletonize(mask);
    m.spine_length = spine_length_of(skel);
    const std::vector<double> edt = distance_transform(mask);
    double acc = 0.0;
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < skel.bits.size(); ++i) {
        if (!skel.bits[i]) continue;
        acc += 2.0 * edt[i] - 1.0;
        ++cnt;
    }
    m.avg_width = cnt > 0 ? acc / cnt : 0.0;
    return m;
}

MetricErrors metric_errors(const CrackMetrics& corrected, const CrackMetrics& baseline) {
    if (!(baseline.area > 0.0 && baseline.spine_length > 0.0 && baseline.avg_width > 0.0))
        throw std::invalid_argument("metric_errors: baseline metrics must be positive");
    MetricErrors e;
    e.area_pct = 100.0 * std::fabs(corrected.area - baseline.area) / baseline.area;
    e.length_pct = 100.0 * std::fabs(corrected.spine_length - baseline.spine_length) / baseline.spine_length;
    e.width_pct = 100.0 * std::fabs(corrected.avg_width - baseline.avg_width) / baseline.avg_width;
    return e;
}

RgbImage render_overlay(const BinaryMask& baseline, const BinaryMask& corrected) {
    if (baseline.width != corrected.width || baseline.height != corrected.height)
        throw std::invalid_argument("render_overlay: dimensions mismatch");
    RgbImage out(baseline.width, baseline.height, 255, 255, 255);
    for (int y = 0; y < out.height; ++y) {
        for (int x = 0; x < out.width; ++x) {
            const bool b = baseline.at(x, y), c = corrected.at(x, y);
            if (!b && !c) continue;
            std::uint8_t* p = out.px(x, y);
            if (b && c) {
                p[0] = 128, p[1] = 0, p[2] = 128;
            } else if (b) {
                p[0] = 255, p[1] = 0, p[2] = 0;
            } else {
                p[0] = 0, p[1] = 0, p[2] = 255;
            }
        }
    }
    return out;
}

} // namespace crackalign

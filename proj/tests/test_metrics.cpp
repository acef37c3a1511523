#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crackalign/metrics.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace crackalign;

namespace {

// white canvas with a black axis-aligned bar
GrayImage bar_image(int w, int h, int x0, int y0, int bw, int bh) {
    GrayImage img(w, h, 1.0);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) img.at(x, y) = 0.0;
    return img;
}

BinaryMask bar_mask(int w, int h, int x0, int y0, int bw, int bh) {
    BinaryMask m(w, h);
    for (int y = y0; y < y0 + bh; ++y)
        for (int x = x0; x < x0 + bw; ++x) m.at(x, y) = 1;
    return m;
}

} // namespace

TEST_CASE("warp_image identity and translation") {
    const GrayImage img = testutil::random_image(64, 48, 3);
    const WarpResult id = warp_image(img, Homography::identity(), 64, 48);
    CHECK(testutil::max_abs_diff(id.image, img) == 0.0);
    CHECK(id.valid.count() == img.size());

    Homography shift;
    shift.h = {1, 0, 10, 0, 1, 0, 0, 0, 1}; // source -> output: x' = x + 10
    const WarpResult tr = warp_image(img, shift, 64, 48);
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 10; ++x) CHECK(!tr.valid.at(x, y)); // left columns unmapped
        for (int x = 10; x < 64; ++x) {
            CHECK(tr.valid.at(x, y));
            CHECK(tr.image.at(x, y) == img.at(x - 10, y));
        }
    }

    Homography sing;
    sing.h = {1, 0, 0, 2, 0, 0, 0, 0, 1};
    CHECK_THROWS_AS(warp_image(img, sing, 8, 8), EstimationError);
}

TEST_CASE("warp round trip") {
    // smooth content: bilinear error goes as |I''|, so the 2/255 bound is a
    // statement about photographic smoothness, not about noise at Nyquist
    const GrayImage img = testutil::oracle_gaussian_blur(testutil::random_image(96, 80, 11), 3.0);
    Homography h;
    h.h = {0.97, 0.04, 3.0, -0.03, 1.02, -2.0, 1e-4, -8e-5, 1.0};
    const WarpResult fwd = warp_image(img, h, 96, 80);
    const WarpResult back = warp_image(fwd.image, invert(h), 96, 80);
    // two bilinear resamplings; compare where both warps stayed on-canvas
    double worst = 0.0;
    for (int y = 8; y < 72; ++y)
        for (int x = 8; x < 88; ++x) {
            Vec2 mid;
            if (!try_apply(h, {static_cast<double>(x), static_cast<double>(y)}, mid)) continue;
            if (mid.x < 1 || mid.y < 1 || mid.x > 94 || mid.y > 78) continue;
            worst = std::max(worst, std::fabs(back.image.at(x, y) - img.at(x, y)));
        }
    CHECK(worst <= 2.0 / 255.0);
}

TEST_CASE("segment_crack") {
    CHECK(segment_crack(testutil::constant_image(64, 64, 1.0)).count() == 0);

    // bar touching the left/right borders: the cross opening is exact there
    const GrayImage spanning = bar_image(400, 21, 0, 9, 400, 3);
    const BinaryMask m1 = segment_crack(spanning);
    CHECK(m1.count() == 1200);
    for (int y = 9; y < 12; ++y)
        for (int x = 0; x < 400; ++x) CHECK(m1.at(x, y));

    // interior bar: exact up to the 4 corner pixels the cross opening removes
    const GrayImage inner = bar_image(440, 41, 20, 19, 400, 3);
    const BinaryMask m2 = segment_crack(inner);
    const BinaryMask want = bar_mask(440, 41, 20, 19, 400, 3);
    int missing = 0;
    for (std::size_t i = 0; i < want.bits.size(); ++i) {
        CHECK(m2.bits[i] <= want.bits[i]); // never segments outside the bar
        missing += want.bits[i] && !m2.bits[i];
    }
    CHECK(missing <= 4);

    // isolated dark speck is removed by opening + largest component
    GrayImage speck = bar_image(440, 41, 20, 19, 400, 3);
    speck.at(430, 5) = 0.0;
    const BinaryMask m3 = segment_crack(speck);
    CHECK(!m3.at(430, 5));
    CHECK(m3.count() >= 1196);
}

TEST_CASE("segment_crack restricted to a validity mask") {
    GrayImage img = bar_image(100, 40, 10, 18, 80, 3);
    BinaryMask valid(100, 40, 1);
    for (int y = 0; y < 40; ++y)
        for (int x = 50; x < 100; ++x) valid.at(x, y) = 0; // right half unmapped
    const BinaryMask m = segment_crack(img, valid);
    for (int y = 18; y < 21; ++y) {
        CHECK(m.at(20, y));
        CHECK(!m.at(60, y)); // dark but outside the valid region
    }
}

TEST_CASE("skeletonize") {
    // 1-px line is already thin
    const BinaryMask line = bar_mask(60, 11, 5, 5, 50, 1);
    const BinaryMask thin = skeletonize(line);
    CHECK(thin.bits == line.bits);

    // 3-px bar thins to a centreline on the middle row
    const BinaryMask bar = bar_mask(420, 23, 10, 10, 400, 3);
    const BinaryMask skel = skeletonize(bar);
    const double n = static_cast<double>(skel.count());
    CHECK(n >= 396);
    CHECK(n <= 400);
    for (int x = 15; x < 405; ++x) CHECK(skel.at(x, 11)); // interior centreline

    // idempotent, subset of input
    const BinaryMask again = skeletonize(skel);
    CHECK(again.bits == skel.bits);
    for (std::size_t i = 0; i < bar.bits.size(); ++i) CHECK(skel.bits[i] <= bar.bits[i]);

    CHECK(skeletonize(BinaryMask(20, 20)).count() == 0);
}

TEST_CASE("compute_metrics on analytic shapes") {
    CHECK(compute_metrics(BinaryMask(32, 32)).area == 0.0);
    CHECK(compute_metrics(BinaryMask(32, 32)).spine_length == 0.0);
    CHECK(compute_metrics(BinaryMask(32, 32)).avg_width == 0.0);

    // 400x3 bar: area exact, spine ~398, width 3
    const CrackMetrics bar = compute_metrics(bar_mask(420, 23, 10, 10, 400, 3));
    CHECK(bar.area == 1200.0);
    CHECK(bar.spine_length >= 396.0);
    CHECK(bar.spine_length <= 400.0);
    CHECK(bar.avg_width == doctest::Approx(3.0).epsilon(0.04));

    // 10-px 45-degree line: 9 diagonal steps of sqrt(2), width 1
    BinaryMask diag(24, 24);
    for (int i = 0; i < 10; ++i) diag.at(5 + i, 5 + i) = 1;
    const CrackMetrics dm = compute_metrics(diag);
    CHECK(dm.area == 10.0);
    CHECK(dm.spine_length == doctest::Approx(9.0 * std::sqrt(2.0)).epsilon(1e-9));
    CHECK(dm.avg_width == doctest::Approx(1.0).epsilon(0.05));

    // constant-width bars: width w within 0.1 for w in {1,3,5}
    for (int w : {1, 3, 5}) {
        const CrackMetrics m = compute_metrics(bar_mask(220, 31, 10, 15 - w / 2, 200, w));
        CHECK(std::fabs(m.avg_width - w) <= 0.1);
    }

    // straight 1-px segments: exact path length per step weight
    const CrackMetrics ax = compute_metrics(bar_mask(40, 9, 4, 4, 30, 1));
    CHECK(ax.spine_length == doctest::Approx(29.0));
}

TEST_CASE("metric_errors") {
    // percent errors reproduce the published area comparisons
    CrackMetrics base{2422.0, 768.0, 3.2};
    CrackMetrics sift{2532.0, 671.0, 3.6};
    CrackMetrics kaze{2367.0, 784.0, 3.2};
    CHECK(metric_errors(sift, base).area_pct == doctest::Approx(4.5416).epsilon(1e-3));
    CHECK(metric_errors(kaze, base).area_pct == doctest::Approx(2.2709).epsilon(1e-3));

    const MetricErrors zero = metric_errors(base, base);
    CHECK(zero.area_pct == 0.0);
    CHECK(zero.length_pct == 0.0);
    CHECK(zero.width_pct == 0.0);

    CHECK_THROWS_AS(metric_errors(base, CrackMetrics{0, 0, 0}), std::invalid_argument);
}

TEST_CASE("render_overlay") {
    BinaryMask a(8, 4), b(8, 4);
    a.at(1, 1) = 1;
    b.at(1, 1) = 1; // overlap
    a.at(3, 2) = 1; // baseline only
    b.at(5, 3) = 1; // corrected only
    const RgbImage ov = render_overlay(a, b);
    const std::uint8_t* purple = ov.px(1, 1);
    CHECK(purple[0] == 128);
    CHECK(purple[1] == 0);
    CHECK(purple[2] == 128);
    const std::uint8_t* red = ov.px(3, 2);
    CHECK(red[0] == 255);
    CHECK(red[2] == 0);
    const std::uint8_t* blue = ov.px(5, 3);
    CHECK(blue[0] == 0);
    CHECK(blue[2] == 255);
    const std::uint8_t* white = ov.px(0, 0);
    CHECK(white[0] == 255);
    CHECK(white[1] == 255);
    CHECK(white[2] == 255);

    // 1-px shift: purple core with red/blue fringes, pixelwise set difference
    BinaryMask wide(60, 9), shifted(60, 9);
    for (int x = 10; x < 50; ++x)
        for (int y = 3; y < 6; ++y) wide.at(x, y) = 1;
    for (int x = 11; x < 51; ++x)
        for (int y = 3; y < 6; ++y) shifted.at(x, y) = 1;
    const RgbImage ov2 = render_overlay(wide, shifted);
    for (int y = 3; y < 6; ++y) {
        CHECK(ov2.px(10, y)[0] == 255); // red fringe
        CHECK(ov2.px(50, y)[2] == 255); // blue fringe
        CHECK(ov2.px(30, y)[0] == 128); // purple core
    }

    CHECK_THROWS_AS(render_overlay(BinaryMask(4, 4), BinaryMask(5, 4)), std::invalid_argument);
}

TEST_CASE("distance transform is exact against brute force") {
    const int w = 37, h = 29;
    BinaryMask m(w, h);
    crackalign::Rng rng(5);
    for (auto& b : m.bits) b = rng.uniform() < 0.6;
    const std::vector<double> edt = distance_transform(m);

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.at(x, y)) continue;
            // nearest background pixel or border, brute force
            double best = 1e18;
            for (int by = -1; by <= h; ++by)
                for (int bx = -1; bx <= w; ++bx) {
                    const bool bg = bx < 0 || by < 0 || bx >= w || by >= h || !m.at(bx, by);
                    if (!bg) continue;
                    best = std::min(best, std::hypot(bx - x, by - y));
                }
            CHECK(edt[static_cast<std::size_t>(y) * w + x] == doctest::Approx(best).epsilon(1e-12));
        }
}

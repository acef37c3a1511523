#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crackalign/pipeline.hpp"
#include "test_util.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace crackalign;

TEST_CASE("perturb grid and composition") {
    const GrayImage img = synth_crack_scene(160, 120, 1);

    // all-neutral spec leaves the image untouched
    const GrayImage same = perturb(img, PerturbSpec{}, 5);
    CHECK(testutil::max_abs_diff(same, img) == 0.0);

    // contrast 0.3 about 0.5 maps {0,1} to {0.35, 0.65}
    GrayImage binary(64, 64, 0.0);
    for (int x = 0; x < 64; ++x) binary.at(x, 1) = 1.0;
    PerturbSpec contrast;
    contrast.contrast = 0.3;
    const GrayImage c = perturb(binary, contrast, 0);
    CHECK(c.at(0, 0) == doctest::Approx(0.35));
    CHECK(c.at(0, 1) == doctest::Approx(0.65));

    // seeded noise is reproducible and seed-sensitive
    PerturbSpec noisy;
    noisy.noise_sigma = 5.0 / 255.0;
    const GrayImage n1 = perturb(img, noisy, 7);
    const GrayImage n2 = perturb(img, noisy, 7);
    const GrayImage n3 = perturb(img, noisy, 8);
    CHECK(testutil::max_abs_diff(n1, n2) == 0.0);
    CHECK(testutil::max_abs_diff(n1, n3) > 0.0);

    // shadow: multiplicative ramp from 1.0 at the left edge down to the end
    // factor at the right edge
    PerturbSpec shade;
    shade.shadow = 0.6;
    const GrayImage s = perturb(img, shade, 0);
    for (int y = 0; y < img.height; y += 17) {
        CHECK(s.at(0, y) == doctest::Approx(img.at(0, y)));
        CHECK(s.at(img.width - 1, y) == doctest::Approx(0.6 * img.at(img.width - 1, y)));
    }

    PerturbSpec bad;
    bad.tilt = 2e-4;
    CHECK_THROWS_AS(perturb(img, bad, 0), std::invalid_argument);
    PerturbSpec bad2;
    bad2.blur_sigma = 1.0;
    CHECK_THROWS_AS(perturb(img, bad2, 0), std::invalid_argument);
}

TEST_CASE("synthetic scenes are seeded and in range") {
    const GrayImage a = synth_crack_scene(200, 150, 3);
    const GrayImage b = synth_crack_scene(200, 150, 3);
    const GrayImage c = synth_crack_scene(200, 150, 4);
    CHECK(testutil::max_abs_diff(a, b) == 0.0);
    CHECK(testutil::max_abs_diff(a, c) > 0.0);
    for (double v : a.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // the crack segments as a sizeable dark component
    CHECK(segment_crack(a).count() > 500);
}

TEST_CASE("self-alignment is the identity") {
    const GrayImage img = synth_crack_scene(320, 240, 11);
    PipelineConfig cfg;
    cfg.ransac.seed = 1;
    const AlignOutput out = align(img, img, cfg);
    REQUIRE(out.report.success);
    CHECK(out.report.homography->frobenius_distance(Homography::identity()) < 1e-3);
    REQUIRE(out.report.errors.has_value());
    CHECK(out.report.errors->area_pct == 0.0);
    CHECK(out.report.errors->length_pct == 0.0);
    CHECK(out.report.errors->width_pct == 0.0);
}

TEST_CASE("featureless pair fails cleanly") {
    const GrayImage blank = testutil::constant_image(128, 128, 1.0);
    PipelineConfig cfg;
    const AlignOutput out = align(blank, blank, cfg);
    CHECK(!out.report.success);
    CHECK(out.report.ref_keypoints == 0);
    CHECK(out.report.tgt_keypoints == 0);
    CHECK(!out.report.homography.has_value());
    CHECK(!out.report.corrected.has_value());
    CHECK(!out.report.errors.has_value());
    // report JSON for a failure carries no homography or corrected block
    const std::string j = report_json(out.report);
    CHECK(j.find("failure_reason") != std::string::npos);
    CHECK(j.find("homography") == std::string::npos);
    CHECK(j.find("corrected") == std::string::npos);
}

TEST_CASE("report counts are internally consistent") {
    const GrayImage base = synth_crack_scene(320, 240, 21);
    PerturbSpec spec;
    spec.tilt = 1e-4;
    spec.noise_sigma = 2.0 / 255.0;
    const GrayImage target = perturb(base, spec, 22);
    for (DetectorKind det : {DetectorKind::NonlinearHessian, DetectorKind::Dog, DetectorKind::Fast}) {
        PipelineConfig cfg;
        cfg.detector = det;
        const AlignOutput out = align(base, target, cfg);
        const AlignReport& r = out.report;
        CHECK(r.matches_before_ransac <= std::min(r.ref_keypoints, r.tgt_keypoints));
        if (r.success) {
            CHECK(r.matches_after_ransac <= r.matches_before_ransac);
            CHECK(r.matches_after_ransac >= 4);
            CHECK(r.sigma_final >= 0.25);
        }
    }
}

TEST_CASE("align is deterministic across runs and thread counts") {
    const GrayImage base = synth_crack_scene(256, 192, 31);
    PerturbSpec spec;
    spec.noise_sigma = 2.0 / 255.0;
    spec.tilt = 1e-4;
    const GrayImage target = perturb(base, spec, 32);
    PipelineConfig cfg;
    cfg.ransac.seed = 9;

#ifdef _OPENMP
    omp_set_num_threads(2);
#endif
    const std::string a = report_json(align(base, target, cfg).report);
    const std::string b = report_json(align(base, target, cfg).report);
#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    const std::string c = report_json(align(base, target, cfg).report);
#ifdef _OPENMP
    omp_set_num_threads(2);
#endif
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("bench runs deterministically and scores cells") {
    BenchSpec bench;
    bench.factors = {"neutral", "tilt"};
    bench.detectors = {DetectorKind::NonlinearHessian, DetectorKind::Fast};
    bench.seeds = 2;
    bench.scene_width = 256;
    bench.scene_height = 192;
    PipelineConfig cfg;

    const std::vector<BenchRun> runs = run_bench(bench, cfg);
    CHECK(runs.size() == (1 + 3) * 2 * 2); // cells x detectors x seeds
    const std::string csv1 = bench_csv(runs);

#ifdef _OPENMP
    omp_set_num_threads(1);
#endif
    const std::vector<BenchRun> again = run_bench(bench, cfg);
#ifdef _OPENMP
    omp_set_num_threads(2);
#endif
    CHECK(bench_csv(again) == csv1);

    // neutral cell: identity ground truth recovered within half a pixel
    for (const BenchRun& r : runs)
        if (r.cell == "neutral" && r.success && r.inliers >= 4) CHECK(r.corner_error_px < 0.5);

    // CSV shape: header + one row per run
    std::size_t lines = 0;
    for (char ch : csv1) lines += ch == '\n';
    CHECK(lines == runs.size() + 1);

    const std::string summary = bench_summary(runs);
    CHECK(summary.find("neutral") != std::string::npos);
    CHECK(summary.find("tilt:2") != std::string::npos);
    CHECK(summary.find("nonlinear-hessian") != std::string::npos);
}

TEST_CASE("failed bench runs carry no scores") {
    BenchSpec bench;
    bench.factors = {"neutral"};
    bench.detectors = {DetectorKind::Fast};
    bench.seeds = 1;
    bench.corpus_paths = {}; // synthetic
    bench.scene_width = 256;
    bench.scene_height = 192;
    PipelineConfig cfg;
    cfg.fast_threshold = 0.9; // starve the detector
    const std::vector<BenchRun> runs = run_bench(bench, cfg);
    REQUIRE(runs.size() == 1);
    CHECK(!runs[0].success);
    CHECK(runs[0].inliers == 0);
    CHECK(!runs[0].errors.has_value());
    const std::string csv = bench_csv(runs);
    CHECK(csv.find(",0,") != std::string::npos);
}

TEST_CASE("detector names parse") {
    CHECK(parse_detector("nonlinear") == DetectorKind::NonlinearHessian);
    CHECK(parse_detector("nonlinear-hessian") == DetectorKind::NonlinearHessian);
    CHECK(parse_detector("dog") == DetectorKind::Dog);
    CHECK(parse_detector("fast") == DetectorKind::Fast);
    CHECK_THROWS_AS(parse_detector("sift"), std::invalid_argument);
}

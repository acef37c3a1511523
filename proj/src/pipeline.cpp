#include "crackalign/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace crackalign {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void cap_keypoints(std::vector<Keypoint>& kps, int max_keypoints) {
    if (max_keypoints > 0 && static_cast<int>(kps.size()) > max_keypoints)
        kps.resize(max_keypoints); // already in canonical order (response desc)
}

GrayImage decimate_n(const GrayImage& img, int factor) {
    GrayImage out = img;
    for (int f = 1; f < factor; f *= 2) out = detail::decimate2(out);
    return out;
}

double round_to(double v, int decimals) {
    const double s = std::pow(10.0, decimals);
    return std::round(v * s) / s;
}

nlohmann::ordered_json metrics_json(const CrackMetrics& m) {
    return {{"area", static_cast<std::int64_t>(std::llround(m.area))},
            {"spine_length", round_to(m.spine_length, 1)},
            {"avg_width", round_to(m.avg_width, 1)}};
}

nlohmann::ordered_json errors_json(const MetricErrors& e) {
    return {{"area_pct", round_to(e.area_pct, 2)},
            {"length_pct", round_to(e.length_pct, 2)},
            {"width_pct", round_to(e.width_pct, 2)}};
}

} // namespace

DetectorKind parse_detector(const std::string& name) {
    if (name == "nonlinear" || name == "nonlinear-hessian" || name == "kaze") return DetectorKind::NonlinearHessian;
    if (name == "dog") return DetectorKind::Dog;
    if (name == "fast" || name == "fast-binary") return DetectorKind::Fast;
    throw std::invalid_argument("unknown detector '" + name + "' (expected nonlinear|dog|fast)");
}

Features extract_features(const GrayImage& img, const PipelineConfig& cfg) {
    Features f;
    switch (cfg.detector) {
        case DetectorKind::NonlinearHessian: {
            const NonlinearScaleSpace space = build_nonlinear_scale_space(img, cfg.schedule);
            f.keypoints = detect_extrema(space, cfg.hessian_threshold);
            cap_keypoints(f.keypoints, cfg.max_keypoints);
            f.float_descs.resize(f.keypoints.size());
            const std::int64_t n = static_cast<std::int64_t>(f.keypoints.size());
#pragma omp parallel for schedule(dynamic)
            for (std::int64_t i = 0; i < n; ++i) {
                Keypoint& kp = f.keypoints[i];
                kp.orientation = assign_orientation(kp, plane_of(space, kp.level));
                f.float_descs[i] = float_descriptor(kp, space);
            }
            break;
        }
        case DetectorKind::Dog: {
            const GaussianPyramid pyr = build_gaussian_pyramid(img, cfg.schedule);
            f.keypoints = detect_extrema(pyr, cfg.dog_contrast);
            cap_keypoints(f.keypoints, cfg.max_keypoints);
            f.float_descs.resize(f.keypoints.size());
            const std::int64_t n = static_cast<std::int64_t>(f.keypoints.size());
#pragma omp parallel for schedule(dynamic)
            for (std::int64_t i = 0; i < n; ++i) {
                Keypoint& kp = f.keypoints[i];
                kp.orientation = assign_orientation(kp, plane_of(pyr, kp.level));
                f.float_descs[i] = float_descriptor(kp, pyr);
            }
            break;
        }
        case DetectorKind::Fast: {
            std::vector<Keypoint> all;
            for (int factor : {1, 2, 4}) {
                const GrayImage level = decimate_n(img, factor);
                if (level.width < 7 || level.height < 7) break;
                const std::vector<Keypoint> kps = fast_corners(level, cfg.fast_threshold);
                const GradientField g = gradient(level);
                const GradientPlane plane{&level, &g.lx, &g.ly, factor, static_cast<double>(factor)};
                for (const Keypoint& kp : kps) {
                    Keypoint base = kp;
                    base.x = kp.x * factor;
                    base.y = kp.y * factor;
                    base.sigma = factor; // coarse-scale coverage via decimation
                    base.orientation = assign_orientation(base, plane);
                    // descriptors need the full pattern inside the frame
                    const double margin = 16.0 * base.sigma;
                    if (base.x < margin || base.y < margin || base.x > img.width - 1 - margin ||
                        base.y > img.height - 1 - margin)
                        continue;
                    all.push_back(base);
                }
            }
            canonical_sort(all);
            cap_keypoints(all, cfg.max_keypoints);
            f.keypoints = std::move(all);
            f.binary_descs.resize(f.keypoints.size());
            const std::int64_t n = static_cast<std::int64_t>(f.keypoints.size());
#pragma omp parallel for schedule(dynamic)
            for (std::int64_t i = 0; i < n; ++i)
                f.binary_descs[i] = binary_descriptor(f.keypoints[i], img);
            break;
        }
    }
    return f;
}

AlignOutput align(const GrayImage& reference, const GrayImage& target, const PipelineConfig& cfg) {
    AlignOutput out;
    AlignReport& r = out.report;
    r.detector = cfg.detector;
    r.seed = cfg.ransac.seed;
    const auto t_total = Clock::now();

    auto t0 = Clock::now();
    Features ref_f = extract_features(reference, cfg);
    Features tgt_f = extract_features(target, cfg);
    r.timings.detect_ms = ms_since(t0); // detection and description run fused
    r.ref_keypoints = static_cast<int>(ref_f.keypoints.size());
    r.tgt_keypoints = static_cast<int>(tgt_f.keypoints.size());
    out.ref_keypoints = ref_f.keypoints;
    out.tgt_keypoints = tgt_f.keypoints;

    t0 = Clock::now();
    if (cfg.detector == DetectorKind::Fast) {
        if (!ref_f.binary_descs.empty() && !tgt_f.binary_descs.empty())
            out.matches = match_descriptors(std::span<const BinaryDescriptor>(ref_f.binary_descs),
                                            std::span<const BinaryDescriptor>(tgt_f.binary_descs), cfg.match_ratio);
    } else if (!ref_f.float_descs.empty() && !tgt_f.float_descs.empty()) {
        out.matches = match_descriptors(std::span<const FloatDescriptor>(ref_f.float_descs),
                                        std::span<const FloatDescriptor>(tgt_f.float_descs), cfg.match_ratio);
    }
    r.timings.match_ms = ms_since(t0);
    r.matches_before_ransac = static_cast<int>(out.matches.size());

    out.correspondences.reserve(out.matches.size());
    for (const Match& m : out.matches) {
        const Keypoint& q = ref_f.keypoints[m.query];
        const Keypoint& t = tgt_f.keypoints[m.train];
        out.correspondences.push_back({{t.x, t.y}, {q.x, q.y}}); // target -> reference
    }

    // metrics on both raw inputs are always reported
    const auto t_metrics_inputs = Clock::now();
    const BinaryMask baseline_mask = segment_crack(reference);
    r.baseline = compute_metrics(baseline_mask);
    r.target_raw = compute_metrics(segment_crack(target));
    double metrics_ms = ms_since(t_metrics_inputs);

    t0 = Clock::now();
    RansacResult rr;
    bool ok = false;
    std::string why;
    if (static_cast<int>(out.correspondences.size()) < std::max(4, cfg.ransac.sample_size)) {
        why = "insufficient matches for RANSAC (" + std::to_string(out.correspondences.size()) + ")";
    } else {
        try {
            rr = ransac(out.correspondences, cfg.ransac);
            ok = true;
        } catch (const EstimationError& e) {
            why = e.what();
        }
    }
    r.timings.ransac_ms = ms_since(t0);

    if (!ok) {
        r.success = false;
        r.failure_reason = why;
        r.timings.total_ms = ms_since(t_total);
        r.timings.metrics_ms = metrics_ms;
        return out;
    }

    r.success = true;
    r.homography = rr.h;
    r.matches_after_ransac = rr.inlier_count;
    r.sigma_final = rr.sigma_final;
    r.iterations_run = rr.iterations_run;
    r.total_error = rr.total_error;

    t0 = Clock::now();
    WarpResult warped = warp_image(target, *r.homography, reference.width, reference.height);
    r.timings.warp_ms = ms_since(t0);

    t0 = Clock::now();
    const BinaryMask corrected_mask = segment_crack(warped.image, warped.valid);
    r.corrected = compute_metrics(corrected_mask);
    if (r.baseline.area > 0.0 && r.baseline.spine_length > 0.0 && r.baseline.avg_width > 0.0)
        r.errors = metric_errors(*r.corrected, r.baseline);
    out.overlay = render_overlay(baseline_mask, corrected_mask);
    out.corrected = std::move(warped.image);
    metrics_ms += ms_since(t0);
    r.timings.metrics_ms = metrics_ms;
    r.timings.total_ms = ms_since(t_total);
    return out;
}

std::string report_json(const AlignReport& r) {
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["detector"] = detector_name(r.detector);
    j["seed"] = r.seed;
    j["success"] = r.success;
    if (!r.success) j["failure_reason"] = r.failure_reason;
    j["keypoints"] = {{"reference", r.ref_keypoints}, {"target", r.tgt_keypoints}};
    j["matches_before_ransac"] = r.matches_before_ransac;
    if (r.success) {
        j["matches_after_ransac"] = r.matches_after_ransac;
        j["inliers"] = r.matches_after_ransac;
        j["sigma_final"] = r.sigma_final;
        j["iterations_run"] = r.iterations_run;
        j["total_reprojection_error"] = r.total_error;
        j["homography"] = r.homography->h; // row-major, h33-normalized
    }
    j["metrics"]["baseline"] = metrics_json(r.baseline);
    j["metrics"]["target"] = metrics_json(r.target_raw);
    if (r.corrected) j["metrics"]["corrected"] = metrics_json(*r.corrected);
    if (r.errors) j["metric_errors"] = errors_json(*r.errors);
    nlohmann::ordered_json artifacts;
    if (!r.corrected_path.empty()) artifacts["corrected"] = r.corrected_path;
    if (!r.overlay_path.empty()) artifacts["overlay"] = r.overlay_path;
    if (!r.matches_path.empty()) artifacts["matches"] = r.matches_path;
    if (!artifacts.empty()) j["artifacts"] = artifacts;
    return j.dump(2) + "\n";
}

std::string timings_json(const StageTimings& t) {
    nlohmann::ordered_json j;
    j["detect_describe_ms"] = round_to(t.detect_ms, 3);
    j["match_ms"] = round_to(t.match_ms, 3);
    j["ransac_ms"] = round_to(t.ransac_ms, 3);
    j["warp_ms"] = round_to(t.warp_ms, 3);
    j["metrics_ms"] = round_to(t.metrics_ms, 3);
    j["total_ms"] = round_to(t.total_ms, 3);
    return j.dump(2) + "\n";
}

std::vector<BenchRun> run_bench(const BenchSpec& bench, const PipelineConfig& base_cfg) {
    std::vector<BenchRun> runs;
    for (const std::string& factor : bench.factors) {
        const int levels = factor == "neutral" ? 1 : 3;
        for (int level = 0; level < levels; ++level) {
            const PerturbSpec spec = make_cell_spec(factor, level);
            const std::string cell = factor == "neutral" ? "neutral" : factor + ":" + std::to_string(level);
            for (DetectorKind det : bench.detectors)
                for (int seed = 0; seed < bench.seeds; ++seed) {
                    BenchRun run;
                    run.cell = cell;
                    run.spec = spec;
                    run.detector = det;
                    run.seed = static_cast<std::uint64_t>(seed);
                    runs.push_back(run);
                }
        }
    }

    std::vector<GrayImage> corpus;
    for (const std::string& path : bench.corpus_paths) corpus.push_back(load_image(path));

    const std::int64_t n = static_cast<std::int64_t>(runs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        BenchRun& run = runs[i];
        // one bad cell (e.g. an undersized corpus image) must not abort the
        // sweep; exceptions may not cross the parallel region anyway
        AlignOutput out;
        int base_w = 0, base_h = 0;
        try {
            const GrayImage base = corpus.empty()
                                       ? synth_crack_scene(bench.scene_width, bench.scene_height, run.seed)
                                       : corpus[run.seed % corpus.size()];
            base_w = base.width;
            base_h = base.height;
            const GrayImage target = perturb(base, run.spec, run.seed + 1);

            PipelineConfig cfg = base_cfg;
            cfg.detector = run.detector;
            cfg.ransac.seed = run.seed;
            out = align(base, target, cfg);
        } catch (const std::exception&) {
            out.report.success = false;
        }

        run.success = out.report.success;
        run.ref_keypoints = out.report.ref_keypoints;
        run.tgt_keypoints = out.report.tgt_keypoints;
        run.matches = out.report.matches_before_ransac;
        run.inliers = out.report.matches_after_ransac;
        run.errors = out.report.errors;
        if (run.success) {
            const Homography gt = tilt_homography(run.spec.tilt);
            const Homography est = *out.report.homography;
            const Vec2 corners[4] = {{0.0, 0.0},
                                     {static_cast<double>(base_w - 1), 0.0},
                                     {0.0, static_cast<double>(base_h - 1)},
                                     {static_cast<double>(base_w - 1), static_cast<double>(base_h - 1)}};
            double worst = 0.0;
            for (const Vec2& c : corners) {
                Vec2 roundtrip;
                if (!try_apply(est, apply(gt, c), roundtrip)) {
                    worst = std::numeric_limits<double>::infinity();
                    break;
                }
                worst = std::max(worst, std::hypot(roundtrip.x - c.x, roundtrip.y - c.y));
            }
            run.corner_error_px = worst;
        }
    }
    return runs;
}

std::string bench_csv(const std::vector<BenchRun>& runs) {
    std::string out = "cell,detector,seed,tilt,noise,blur,contrast,shadow,success,keypoints_ref,"
                      "keypoints_tgt,matches,inliers,corner_err_px,area_err_pct,length_err_pct,width_err_pct\n";
    char buf[512];
    for (const BenchRun& r : runs) {
        std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.6g,%.6g,%.6g,%.6g,%.6g,%d,%d,%d,%d,%d,", r.cell.c_str(),
                      detector_name(r.detector).c_str(), static_cast<unsigned long long>(r.seed), r.spec.tilt,
                      r.spec.noise_sigma, r.spec.blur_sigma, r.spec.contrast, r.spec.shadow, r.success ? 1 : 0,
                      r.ref_keypoints, r.tgt_keypoints, r.matches, r.inliers);
        out += buf;
        if (r.success) {
            std::snprintf(buf, sizeof buf, "%.4f", r.corner_error_px);
            out += buf;
        }
        out += ',';
        if (r.errors) {
            std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f", r.errors->area_pct, r.errors->length_pct,
                          r.errors->width_pct);
            out += buf;
        } else {
            out += ",,";
        }
        out += '\n';
    }
    return out;
}

std::string bench_summary(const std::vector<BenchRun>& runs) {
    struct Agg {
        int n = 0, successes = 0;
        double inliers = 0.0, corner = 0.0;
    };
    // stable cell / detector orders as first seen
    std::vector<std::string> cells;
    std::vector<DetectorKind> dets;
    for (const BenchRun& r : runs) {
        if (std::find(cells.begin(), cells.end(), r.cell) == cells.end()) cells.push_back(r.cell);
        if (std::find(dets.begin(), dets.end(), r.detector) == dets.end()) dets.push_back(r.detector);
    }
    std::vector<Agg> agg(cells.size() * dets.size());
    for (const BenchRun& r : runs) {
        const std::size_t ci = std::find(cells.begin(), cells.end(), r.cell) - cells.begin();
        const std::size_t di = std::find(dets.begin(), dets.end(), r.detector) - dets.begin();
        Agg& a = agg[ci * dets.size() + di];
        ++a.n;
        if (r.success) {
            ++a.successes;
            a.inliers += r.inliers;
            a.corner += r.corner_error_px;
        }
    }

    std::string out = "mean inliers per cell (successful runs; '-' = no success)\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-12s", "cell");
    out += buf;
    for (DetectorKind d : dets) {
        std::snprintf(buf, sizeof buf, "%18s", detector_name(d).c_str());
        out += buf;
    }
    out += '\n';
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        std::snprintf(buf, sizeof buf, "%-12s", cells[ci].c_str());
        out += buf;
        for (std::size_t di = 0; di < dets.size(); ++di) {
            const Agg& a = agg[ci * dets.size() + di];
            if (a.successes == 0)
                std::snprintf(buf, sizeof buf, "%18s", "-");
            else
                std::snprintf(buf, sizeof buf, "%13.1f %d/%d", a.inliers / a.successes, a.successes, a.n);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

} // namespace crackalign

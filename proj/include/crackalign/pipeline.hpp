#pragma once

#include "crackalign/descriptors.hpp"
#include "crackalign/detect.hpp"
#include "crackalign/metrics.hpp"
#include "crackalign/synthetic.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace crackalign {

struct PipelineConfig {
    DetectorKind detector = DetectorKind::NonlinearHessian;
    ScaleSchedule schedule;
    double hessian_threshold = 1e-4;
    double dog_contrast = 0.03;
    double fast_threshold = 0.1;
    double match_ratio = 0.8;
    int max_keypoints = 2500;
    RansacConfig ransac;
};

struct StageTimings {
    double detect_ms = 0.0;
    double describe_ms = 0.0;
    double match_ms = 0.0;
    double ransac_ms = 0.0;
    double warp_ms = 0.0;
    double metrics_ms = 0.0;
    double total_ms = 0.0;
};

/// Everything `align` measured. Timings live here but are serialized to a
/// separate sidecar so report.json stays byte-identical across runs.
struct AlignReport {
    bool success = false;
    std::string failure_reason;
    DetectorKind detector = DetectorKind::NonlinearHessian;
    std::uint64_t seed = 0;
    int ref_keypoints = 0;
    int tgt_keypoints = 0;
    int matches_before_ransac = 0;
    int matches_after_ransac = 0; // inlier count
    double sigma_final = 0.0;
    int iterations_run = 0;
    double total_error = 0.0;
    std::optional<Homography> homography; // target -> reference
    CrackMetrics baseline;                // reference image
    CrackMetrics target_raw;              // target before correction
    std::optional<CrackMetrics> corrected;
    std::optional<MetricErrors> errors;
    StageTimings timings;
    std::string corrected_path, overlay_path, matches_path;
};

struct AlignOutput {
    AlignReport report;
    GrayImage corrected;
    RgbImage overlay;
    std::vector<Match> matches;
    std::vector<Keypoint> ref_keypoints;
    std::vector<Keypoint> tgt_keypoints;
    std::vector<Correspondence> correspondences;
};

struct Features {
    std::vector<Keypoint> keypoints;
    std::vector<FloatDescriptor> float_descs;
    std::vector<BinaryDescriptor> binary_descs;
};

/// Detect + orient + describe one image with the configured detector.
Features extract_features(const GrayImage& img, const PipelineConfig& cfg);

/// Full alignment: features on both images, ratio+mutual matching, adaptive
/// RANSAC, inverse warp of the target into the reference frame, segmentation
/// and crack metrics on both sides. RANSAC failure is reported, not thrown.
AlignOutput align(const GrayImage& reference, const GrayImage& target, const PipelineConfig& cfg);

/// Deterministic JSON report (schema 1). Timings go to write_timings_json.
std::string report_json(const AlignReport& r);
std::string timings_json(const StageTimings& t);

// ---- synthetic benchmark ----

struct BenchRun {
    std::string cell;       // e.g. "tilt:1" or "neutral"
    PerturbSpec spec;
    DetectorKind detector = DetectorKind::NonlinearHessian;
    std::uint64_t seed = 0;

    bool success = false;
    int ref_keypoints = 0;
    int tgt_keypoints = 0;
    int matches = 0;
    int inliers = 0;
    double corner_error_px = 0.0; // max corner reprojection vs ground truth
    std::optional<MetricErrors> errors;
};

struct BenchSpec {
    std::vector<std::string> factors = {"neutral", "tilt", "noise", "blur", "contrast", "shadow"};
    std::vector<DetectorKind> detectors = {DetectorKind::NonlinearHessian, DetectorKind::Dog,
                                           DetectorKind::Fast};
    int seeds = 3;
    int scene_width = 400;
    int scene_height = 300;
    std::vector<std::string> corpus_paths; // when set, these replace synthetic scenes
};

/// One run per (cell x detector x seed). Runs execute in parallel; output
/// order and content are independent of the thread count.
std::vector<BenchRun> run_bench(const BenchSpec& bench, const PipelineConfig& base_cfg);

std::string bench_csv(const std::vector<BenchRun>& runs);

/// Per-cell x detector mean-inlier table (the aggregate view).
std::string bench_summary(const std::vector<BenchRun>& runs);

DetectorKind parse_detector(const std::string& name);

} // namespace crackalign

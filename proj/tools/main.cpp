#include "crackalign/pipeline.hpp"

#include <CLI11.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

using namespace crackalign;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitAlignFailed = 2;

void set_jobs(int jobs) {
#ifdef _OPENMP
    if (jobs > 0) omp_set_num_threads(jobs);
#else
    (void)jobs;
#endif
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ImageIoError(path + ": cannot open for writing");
    f << text;
}

std::string keypoints_csv(const std::vector<Keypoint>& kps) {
    std::string out = "x,y,sigma,response,orientation,detector\n";
    char buf[256];
    for (const Keypoint& k : kps) {
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.8g,%.6f,%s\n", k.x, k.y, k.sigma, k.response,
                      k.orientation, detector_name(k.detector).c_str());
        out += buf;
    }
    return out;
}

std::string matches_csv(const AlignOutput& out) {
    std::string text = "qx,qy,tx,ty,distance,ratio\n";
    char buf[256];
    for (const Match& m : out.matches) {
        const Keypoint& q = out.ref_keypoints[m.query];
        const Keypoint& t = out.tgt_keypoints[m.train];
        std::snprintf(buf, sizeof buf, "%.4f,%.4f,%.4f,%.4f,%.6g,%.6g\n", q.x, q.y, t.x, t.y, m.distance,
                      m.ratio);
        text += buf;
    }
    return text;
}

void add_pipeline_flags(CLI::App* cmd, PipelineConfig& cfg, std::string& detector) {
    cmd->add_option("--detector", detector, "Feature detector: nonlinear|dog|fast")
        ->default_val("nonlinear");
    cmd->add_option("--hessian-threshold", cfg.hessian_threshold, "Nonlinear Hessian response threshold");
    cmd->add_option("--dog-contrast", cfg.dog_contrast, "DoG contrast threshold");
    cmd->add_option("--fast-threshold", cfg.fast_threshold, "FAST intensity threshold");
    cmd->add_option("--match-ratio", cfg.match_ratio, "Lowe ratio-test bound");
    cmd->add_option("--max-keypoints", cfg.max_keypoints, "Keep the strongest N keypoints (0 = all)");
    cmd->add_option("--ransac-k", cfg.ransac.sample_size, "Correspondences drawn per RANSAC iteration");
    cmd->add_option("--ransac-p", cfg.ransac.confidence, "RANSAC confidence level");
    cmd->add_option("--ransac-e0", cfg.ransac.initial_outlier_ratio, "Initial outlier ratio");
    cmd->add_option("--ransac-cap", cfg.ransac.max_iterations, "RANSAC iteration cap");
    cmd->add_option("--ransac-sigma0", cfg.ransac.initial_sigma, "Initial inlier-gate sigma (px)");
    cmd->add_option("--seed", cfg.ransac.seed, "Random seed");
}

int run_align(const std::string& ref_path, const std::string& tgt_path, PipelineConfig cfg,
              const std::string& detector, const std::string& out_dir) {
    cfg.detector = parse_detector(detector);
    const GrayImage ref = load_image(ref_path);
    const GrayImage tgt = load_image(tgt_path);

    std::filesystem::create_directories(out_dir);
    AlignOutput out = align(ref, tgt, cfg);
    AlignReport& r = out.report;

    r.matches_path = out_dir + "/matches.csv";
    write_text(r.matches_path, matches_csv(out));
    if (r.success) {
        r.corrected_path = out_dir + "/corrected.png";
        r.overlay_path = out_dir + "/overlay.png";
        save_image(out.corrected, r.corrected_path);
        save_rgb(out.overlay, r.overlay_path);
    }
    write_text(out_dir + "/report.json", report_json(r));
    write_text(out_dir + "/timings.json", timings_json(r.timings));

    if (!r.success) {
        std::cerr << "alignment failed: " << r.failure_reason << "\n";
        return kExitAlignFailed;
    }
    std::cout << report_json(r);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"crackalign - perspective alignment and crack morphometry for time-lapse imagery"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand
    int jobs = 0;
    app.add_option("--jobs", jobs, "Worker threads (0 = library default)");

    PipelineConfig cfg;
    std::string detector = "nonlinear";

    // align
    auto* align_cmd = app.add_subcommand("align", "Align a target photo to a reference and compare crack metrics");
    std::string ref_path, tgt_path, out_dir = "out";
    align_cmd->add_option("reference", ref_path, "Reference image (PNG or PGM)")->required();
    align_cmd->add_option("target", tgt_path, "Target image to correct")->required();
    align_cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
    add_pipeline_flags(align_cmd, cfg, detector);

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "Detect keypoints and print them as CSV");
    std::string img_path, dump_dir;
    detect_cmd->add_option("image", img_path, "Input image")->required();
    detect_cmd->add_option("--dump-levels", dump_dir, "Write each scale-space level to DIR as PNG");
    add_pipeline_flags(detect_cmd, cfg, detector);

    // match
    auto* match_cmd = app.add_subcommand("match", "Match two images and print correspondences as CSV");
    match_cmd->add_option("reference", ref_path, "Reference image")->required();
    match_cmd->add_option("target", tgt_path, "Target image")->required();
    add_pipeline_flags(match_cmd, cfg, detector);

    // metrics
    auto* metrics_cmd = app.add_subcommand("metrics", "Segment one image and print crack metrics as JSON");
    metrics_cmd->add_option("image", img_path, "Input image")->required();

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "Synthetic ground-truth benchmark over perturbation cells");
    BenchSpec bench;
    std::string corpus_dir;
    std::vector<std::string> grid;
    std::string bench_out = "bench.csv";
    bool synthetic = true;
    bench_cmd->add_flag("--synthetic,!--no-synthetic", synthetic, "Use generated scenes (default)");
    bench_cmd->add_option("--corpus", corpus_dir, "Directory of base images instead of synthetic scenes");
    bench_cmd->add_option("--grid", grid, "Factors to sweep (neutral,tilt,noise,blur,contrast,shadow)")
        ->delimiter(',');
    bench_cmd->add_option("--seeds", bench.seeds, "Seeds per cell")->capture_default_str();
    bench_cmd->add_option("--out", bench_out, "CSV output path")->capture_default_str();
    add_pipeline_flags(bench_cmd, cfg, detector);

    CLI11_PARSE(app, argc, argv);
    set_jobs(jobs);

    try {
        if (align_cmd->parsed()) return run_align(ref_path, tgt_path, cfg, detector, out_dir);

        if (detect_cmd->parsed()) {
            cfg.detector = parse_detector(detector);
            const GrayImage img = load_image(img_path);
            if (!dump_dir.empty()) {
                std::filesystem::create_directories(dump_dir);
                char name[160];
                if (cfg.detector == DetectorKind::Dog) {
                    const GaussianPyramid pyr = build_gaussian_pyramid(img, cfg.schedule);
                    for (std::size_t o = 0; o < pyr.octaves.size(); ++o)
                        for (std::size_t s = 0; s < pyr.octaves[o].planes.size(); ++s) {
                            std::snprintf(name, sizeof name, "%s/octave%zu_plane%zu.png", dump_dir.c_str(), o, s);
                            save_image(pyr.octaves[o].planes[s], name);
                        }
                } else {
                    const NonlinearScaleSpace space = build_nonlinear_scale_space(img, cfg.schedule);
                    for (std::size_t i = 0; i < space.levels.size(); ++i) {
                        std::snprintf(name, sizeof name, "%s/level%02zu_sigma%.2f.png", dump_dir.c_str(), i,
                                      space.levels[i].sigma);
                        save_image(space.levels[i].L, name);
                    }
                }
            }
            const Features f = extract_features(img, cfg);
            std::cout << keypoints_csv(f.keypoints);
            return kExitOk;
        }

        if (match_cmd->parsed()) {
            cfg.detector = parse_detector(detector);
            const GrayImage ref = load_image(ref_path);
            const GrayImage tgt = load_image(tgt_path);
            const AlignOutput out = align(ref, tgt, cfg);
            std::cout << matches_csv(out);
            return kExitOk;
        }

        if (metrics_cmd->parsed()) {
            const GrayImage img = load_image(img_path);
            const CrackMetrics m = compute_metrics(segment_crack(img));
            std::printf("{\n  \"area\": %lld,\n  \"spine_length\": %.1f,\n  \"avg_width\": %.1f\n}\n",
                        static_cast<long long>(m.area + 0.5), m.spine_length, m.avg_width);
            return kExitOk;
        }

        if (bench_cmd->parsed()) {
            cfg.detector = parse_detector(detector);
            if (!grid.empty()) bench.factors = grid;
            if (!corpus_dir.empty()) {
                for (const auto& entry : std::filesystem::directory_iterator(corpus_dir)) {
                    const std::string p = entry.path().string();
                    if (p.ends_with(".png") || p.ends_with(".pgm")) bench.corpus_paths.push_back(p);
                }
                std::sort(bench.corpus_paths.begin(), bench.corpus_paths.end());
                if (bench.corpus_paths.empty()) {
                    std::cerr << "bench: no .png/.pgm images under " << corpus_dir << "\n";
                    return kExitError;
                }
            }
            const std::vector<BenchRun> runs = run_bench(bench, cfg);
            write_text(bench_out, bench_csv(runs));
            std::cout << bench_summary(runs);
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

// Timing harness comparing the serial reference kernels against the
// OpenMP-parallel ones on synthetic inputs.

#include "crackalign/kernels.hpp"
#include "crackalign/scalespace.hpp"
#include "crackalign/synthetic.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace {

using namespace crackalign;
using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn(); // warm-up
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = Clock::now();
        fn();
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        if (ms < best) best = ms;
    }
    return best;
}

void report(const char* name, int size, double serial_ms, double parallel_ms) {
    std::printf("%-16s %5dpx %10.2f ms %10.2f ms %8.2fx\n", name, size, serial_ms, parallel_ms,
                serial_ms / parallel_ms);
}

} // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
#ifdef _OPENMP
    std::printf("threads: %d, reps: %d (best-of)\n", omp_get_max_threads(), reps);
#else
    std::printf("threads: 1 (OpenMP disabled), reps: %d (best-of)\n", reps);
#endif
    std::printf("%-16s %7s %13s %13s %9s\n", "kernel", "size", "serial", "parallel", "speedup");

    for (int size : {512, 1024}) {
        const GrayImage img = synth_crack_scene(size, size, 7);
        const std::vector<double> taps = detail::gaussian_taps(2.0);
        const GradientField g = gradient(img);
        const GrayImage c = kernels::serial::conductivity_map(g.mag, 0.1);
        const std::array<double, 9> tilt = {1, 0, 0, 0, 1, 0, 1e-4, 0, 1};

        report("convolve_rows", size,
               time_ms([&] { kernels::serial::convolve_rows(img, taps); }, reps),
               time_ms([&] { kernels::par::convolve_rows(img, taps); }, reps));
        report("convolve_cols", size,
               time_ms([&] { kernels::serial::convolve_cols(img, taps); }, reps),
               time_ms([&] { kernels::par::convolve_cols(img, taps); }, reps));
        report("magnitude", size,
               time_ms([&] { kernels::serial::magnitude(g.lx, g.ly); }, reps),
               time_ms([&] { kernels::par::magnitude(g.lx, g.ly); }, reps));
        report("conductivity", size,
               time_ms([&] { kernels::serial::conductivity_map(g.mag, 0.1); }, reps),
               time_ms([&] { kernels::par::conductivity_map(g.mag, 0.1); }, reps));
        report("aos_step", size,
               time_ms([&] { kernels::serial::aos_step(img, c, 5.0); }, reps),
               time_ms([&] { kernels::par::aos_step(img, c, 5.0); }, reps));
        report("hessian_det", size,
               time_ms([&] { kernels::serial::hessian_det(g.lx, g.ly, g.mag, 1.6); }, reps),
               time_ms([&] { kernels::par::hessian_det(g.lx, g.ly, g.mag, 1.6); }, reps));
        {
            GrayImage out_s(size, size), out_p(size, size);
            std::vector<std::uint8_t> valid;
            report("inverse_warp", size,
                   time_ms([&] { kernels::serial::inverse_warp(img, tilt, out_s, valid); }, reps),
                   time_ms([&] { kernels::par::inverse_warp(img, tilt, out_p, valid); }, reps));
        }
    }
    return 0;
}

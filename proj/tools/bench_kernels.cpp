// Benchmark of the OpenMP kernels against the serial reference
// implementations. The reference side is the same code the tests use as an
// oracle, so the max-abs-diff column doubles as a correctness spot check.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "uwie/kernels.hpp"
#include "uwie/metrics.hpp"
#include "uwie/reference.hpp"
#include "uwie/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace uwie;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <typename F>
double time_best_ms(F&& fn, int repeats) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const double t0 = now_ms();
        fn();
        best = std::min(best, now_ms() - t0);
    }
    return best;
}

double max_abs_diff(const float* a, const float* b, std::int64_t n) {
    double m = 0.0;
    for (std::int64_t i = 0; i < n; ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
    return m;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
    std::printf("%-16s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   max|diff| %.3e\n",
                name, serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
    int repeats = 3;
    bool quick = false;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--quick") quick = true;
        else if (arg == "--repeats" && i + 1 < argc) repeats = std::atoi(argv[++i]);
        else {
            std::fprintf(stderr, "usage: %s [--quick] [--repeats N]\n", argv[0]);
            return 1;
        }
    }

#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (built without OpenMP)\n");
#endif

    Rng rng(42);

    {  // matmul
        const int n = quick ? 96 : 256;
        Tensor a = Tensor::zeros({n, n}), b = Tensor::zeros({n, n});
        fill_uniform(a, rng, -1, 1);
        fill_uniform(b, rng, -1, 1);
        Tensor c0 = Tensor::zeros({n, n}), c1 = Tensor::zeros({n, n});
        const double ts = time_best_ms(
            [&] { reference::matmul_naive(n, n, n, a.ptr(), b.ptr(), c0.ptr()); }, repeats);
        const double tp = time_best_ms(
            [&] { kernels::gemm_nn(n, n, n, a.ptr(), b.ptr(), c1.ptr(), false); }, repeats);
        report("matmul", ts, tp, max_abs_diff(c0.ptr(), c1.ptr(), c0.size()));
    }

    {  // conv2d 3x3
        const int hw = quick ? 64 : 128, ci = 8, co = 8;
        Tensor x = Tensor::zeros({ci, hw, hw}), k = Tensor::zeros({co, ci, 3, 3});
        fill_uniform(x, rng, -1, 1);
        fill_uniform(k, rng, -1, 1);
        Tensor y0 = Tensor::zeros({co, hw, hw}), y1 = Tensor::zeros({co, hw, hw});
        const double ts = time_best_ms(
            [&] { reference::conv2d_naive(x.ptr(), ci, hw, hw, k.ptr(), co, 3, 3, 1, true, y0.ptr(), hw, hw); },
            repeats);
        const double tp = time_best_ms(
            [&] { kernels::conv2d_forward(x.ptr(), ci, hw, hw, k.ptr(), co, 3, 3, 1, Pad::kSame, y1.ptr()); },
            repeats);
        report("conv2d_3x3", ts, tp, max_abs_diff(y0.ptr(), y1.ptr(), y0.size()));
    }

    {  // 2D transform: naive DFT vs radix-2 FFT
        const int n = quick ? 32 : 64;
        Tensor x = Tensor::zeros({n, n});
        fill_uniform(x, rng, -1, 1);
        Tensor re0 = Tensor::zeros({n, n}), im0 = Tensor::zeros({n, n});
        Tensor re1 = Tensor::zeros({n, n}), im1 = Tensor::zeros({n, n});
        const double ts = time_best_ms(
            [&] { reference::dft2d_naive(x.ptr(), n, n, re0.ptr(), im0.ptr()); }, repeats);
        const double tp = time_best_ms(
            [&] { kernels::fft2d_forward(x.ptr(), n, n, re1.ptr(), im1.ptr()); }, repeats);
        const double diff = std::max(max_abs_diff(re0.ptr(), re1.ptr(), re0.size()),
                                     max_abs_diff(im0.ptr(), im1.ptr(), im0.size()));
        report("fft2d", ts, tp, diff);
    }

    {  // SSIM: direct sliding window vs separable implementation
        const int hw = quick ? 96 : 192;
        Image a({3, hw, hw}), b({3, hw, hw});
        fill_uniform(a, rng, 0, 1);
        fill_uniform(b, rng, 0, 1);
        double v0 = 0, v1 = 0;
        const double ts = time_best_ms([&] { v0 = reference::ssim_naive(a.ptr(), b.ptr(), 3, hw, hw); },
                                       repeats);
        const double tp = time_best_ms([&] { v1 = ssim(a, b); }, repeats);
        report("ssim", ts, tp, std::abs(v0 - v1));
    }

    return 0;
}

#pragma once

#include <vector>

#include "uwie/tensor.hpp"

// Serial, deliberately naive implementations used as independent oracles in
// tests and as the baseline side of the kernel benchmark. Nothing here shares
// code with uwie::kernels.

namespace uwie::reference {

// C[m,n] = A·B, plain triple loop, double accumulators.
void matmul_naive(int m, int n, int k, const float* a, const float* b, float* c);
void matmul_naive(int m, int n, int k, const double* a, const double* b, double* c);

// Six nested loops over (o, oh, ow, c, dy, dx) with explicit bounds checks.
void conv2d_naive(const float* x, int C, int H, int W, const float* k, int O, int kh, int kw,
                  int stride, bool same_pad, float* y, int Ho, int Wo);
void conv2d_naive(const double* x, int C, int H, int W, const double* k, int O, int kh, int kw,
                  int stride, bool same_pad, double* y, int Ho, int Wo);

// O(n^4) direct DFT, double trig throughout.
void dft2d_naive(const float* x, int H, int W, float* re, float* im);
void dft2d_naive(const double* x, int H, int W, double* re, double* im);

// PSNR from the plain MSE loop; no cap, no floor (caller compares post-cap).
double psnr_naive(const float* a, const float* b, std::int64_t n);

// Sliding 11x11 Gaussian window (sigma 1.5), valid positions only, direct 2D
// weights, averaged over channels. Images are [3,H,W] (or [C,H,W]).
double ssim_naive(const float* a, const float* b, int C, int H, int W);

// Trilinear interpolation into a size^3 lattice stored red-fastest, used to
// verify exported LUT files against the network they sample.
// color = (r,g,b) in [0,1]; lattice holds size^3 * 3 floats.
void trilinear_sample(const std::vector<float>& lattice, int size, const float color[3], float out[3]);

}  // namespace uwie::reference

#pragma once

#include <cstdint>

#include "uwie/tensor.hpp"

// OpenMP-parallel kernels backing the tensor ops. Every loop assigns each
// output element to exactly one iteration and accumulates serially inside it,
// so results are bit-identical for any thread count. Scalar reductions use
// fixed-size chunking for the same reason.
//
// uwie/reference.hpp holds the independently written serial versions used as
// test oracles and as the baseline in the kernel benchmark.

namespace uwie::kernels {

template <typename T>
bool all_finite(const T* p, std::int64_t n);

// Deterministic sum with double accumulation (fixed 4096-element chunks).
template <typename T>
double sum_chunked(const T* p, std::int64_t n);

// ---- GEMM ----------------------------------------------------------------
// C[m,n] (+)= op(A)·op(B). A,B,C row-major and dense.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);
// C = A·Bᵀ with B stored [n,k]
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);
// C = Aᵀ·B with A stored [k,m]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate);

// ---- conv2d ---------------------------------------------------------------
// Cross-correlation, zero padding. x:[C,H,W], k:[O,C,kh,kw], y:[O,Ho,Wo].
void conv2d_output_shape(int H, int W, int kh, int kw, int stride, Pad pad, int& Ho, int& Wo);

template <typename T>
void conv2d_forward(const T* x, int C, int H, int W, const T* k, int O, int kh, int kw,
                    int stride, Pad pad, T* y);
template <typename T>
void conv2d_backward_input(const T* gy, const T* k, int C, int H, int W, int O, int kh, int kw,
                           int stride, Pad pad, T* gx);
template <typename T>
void conv2d_backward_kernel(const T* gy, const T* x, int C, int H, int W, int O, int kh, int kw,
                            int stride, Pad pad, T* gk);

// ---- layer norm -----------------------------------------------------------
// x viewed as [outer, L, inner]; normalization runs over L per (outer,inner).
template <typename T>
void layer_norm_forward(const T* x, std::int64_t outer, std::int64_t L, std::int64_t inner,
                        const T* gamma, const T* beta, T eps, T* y, T* xhat, T* inv_std);
template <typename T>
void layer_norm_backward(const T* gy, const T* xhat, const T* inv_std, const T* gamma,
                         std::int64_t outer, std::int64_t L, std::int64_t inner, T* gx);
// accumulates (+=) into ggamma/gbeta
template <typename T>
void layer_norm_param_grads(const T* gy, const T* xhat, std::int64_t outer, std::int64_t L,
                            std::int64_t inner, T* ggamma, T* gbeta);

// ---- FFT -------------------------------------------------------------------
// Unnormalized forward DFT of a real H×W signal, radix-2 (H, W powers of two).
template <typename T>
void fft2d_forward(const T* x, int H, int W, T* re, T* im);
// Gradient of (re,im) back to the real input: real part of the unnormalized
// inverse-direction transform of gre + i·gim.
template <typename T>
void fft2d_adjoint(const T* gre, const T* gim, int H, int W, T* gx);

// ---- bilinear resize -------------------------------------------------------
// Half-pixel centers (align_corners = false). x:[C,H,W] -> y:[C,Ho,Wo].
template <typename T>
void bilinear_forward(const T* x, int C, int H, int W, int Ho, int Wo, T* y);
template <typename T>
void bilinear_backward(const T* gy, int C, int H, int W, int Ho, int Wo, T* gx);

// ---- block/grid partition ---------------------------------------------------
// x:[C,H,W] -> y:[G,C,p*p]. Block: non-overlapping p×p windows. Grid: p×p
// lattice of strided samples (one per cell, same intra-cell offset per group).
template <typename T>
void partition_forward(const T* x, int C, int H, int W, PartMode mode, int p, T* y);
// Exact inverse scatter; also the backward of partition_forward.
template <typename T>
void partition_inverse(const T* y, int C, int H, int W, PartMode mode, int p, T* x);

int partition_groups(int H, int W, PartMode mode, int p);

}  // namespace uwie::kernels

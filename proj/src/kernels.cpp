#include "uwie/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uwie::kernels {

template <typename T>
bool all_finite(const T* p, std::int64_t n) {
    bool ok = true;
#pragma omp parallel for reduction(&& : ok) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) ok = ok && std::isfinite(p[i]);
    return ok;
}

template <typename T>
double sum_chunked(const T* p, std::int64_t n) {
    constexpr std::int64_t kChunk = 4096;
    const std::int64_t chunks = (n + kChunk - 1) / kChunk;
    std::vector<double> partial(static_cast<size_t>(chunks), 0.0);
#pragma omp parallel for schedule(static)
    for (std::int64_t c = 0; c < chunks; ++c) {
        const std::int64_t lo = c * kChunk;
        const std::int64_t hi = std::min(n, lo + kChunk);
        double acc = 0.0;
        for (std::int64_t i = lo; i < hi; ++i) acc += static_cast<double>(p[i]);
        partial[static_cast<size_t>(c)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

// ---------------------------------------------------------------------------
// GEMM. ikj ordering keeps the inner loop unit-stride over both B and C.

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::int64_t>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        const T* arow = a + static_cast<std::int64_t>(i) * k;
        for (int t = 0; t < k; ++t) {
            const T av = arow[t];
            const T* brow = b + static_cast<std::int64_t>(t) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* arow = a + static_cast<std::int64_t>(i) * k;
        T* crow = c + static_cast<std::int64_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* brow = b + static_cast<std::int64_t>(j) * k;
            T acc = T(0);
            for (int t = 0; t < k; ++t) acc += arow[t] * brow[t];
            crow[j] = accumulate ? crow[j] + acc : acc;
        }
    }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<std::int64_t>(i) * n;
        if (!accumulate)
            for (int j = 0; j < n; ++j) crow[j] = T(0);
        for (int t = 0; t < k; ++t) {
            const T av = a[static_cast<std::int64_t>(t) * m + i];
            const T* brow = b + static_cast<std::int64_t>(t) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d

void conv2d_output_shape(int H, int W, int kh, int kw, int stride, Pad pad, int& Ho, int& Wo) {
    if (stride < 1) throw ShapeError("conv2d: stride must be >= 1");
    if (pad == Pad::kSame) {
        if (kh % 2 == 0 || kw % 2 == 0) throw ShapeError("conv2d: same-padding requires odd kernel extents");
        Ho = (H + stride - 1) / stride;
        Wo = (W + stride - 1) / stride;
    } else {
        if (H < kh || W < kw) throw ShapeError("conv2d: input smaller than kernel under valid padding");
        Ho = (H - kh) / stride + 1;
        Wo = (W - kw) / stride + 1;
    }
}

template <typename T>
void conv2d_forward(const T* x, int C, int H, int W, const T* k, int O, int kh, int kw,
                    int stride, Pad pad, T* y) {
    int Ho, Wo;
    conv2d_output_shape(H, W, kh, kw, stride, pad, Ho, Wo);
    const int ph = pad == Pad::kSame ? (kh - 1) / 2 : 0;
    const int pw = pad == Pad::kSame ? (kw - 1) / 2 : 0;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;

#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < O; ++o) {
        for (int oh = 0; oh < Ho; ++oh) {
            T* yrow = y + o * oplane + static_cast<std::int64_t>(oh) * Wo;
            for (int ow = 0; ow < Wo; ++ow) yrow[ow] = T(0);
            for (int c = 0; c < C; ++c) {
                const T* xc = x + c * plane;
                const T* kc = k + ((static_cast<std::int64_t>(o) * C + c) * kh) * kw;
                for (int dy = 0; dy < kh; ++dy) {
                    const int ih = oh * stride + dy - ph;
                    if (ih < 0 || ih >= H) continue;
                    const T* xrow = xc + static_cast<std::int64_t>(ih) * W;
                    const T* krow = kc + static_cast<std::int64_t>(dy) * kw;
                    for (int dx = 0; dx < kw; ++dx) {
                        const T kv = krow[dx];
                        const int off = dx - pw;
                        // clip ow range so iw = ow*stride + off stays in [0,W)
                        int ow0 = 0;
                        if (off < 0) ow0 = (-off + stride - 1) / stride;
                        int ow1 = Wo;
                        if (off > W - 1 - (Wo - 1) * stride)
                            ow1 = std::min(Wo, (W - off - 1) / stride + 1);
                        const T* xr = xrow + off;
                        for (int ow = ow0; ow < ow1; ++ow) yrow[ow] += kv * xr[ow * stride];
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_input(const T* gy, const T* k, int C, int H, int W, int O, int kh, int kw,
                           int stride, Pad pad, T* gx) {
    int Ho, Wo;
    conv2d_output_shape(H, W, kh, kw, stride, pad, Ho, Wo);
    const int ph = pad == Pad::kSame ? (kh - 1) / 2 : 0;
    const int pw = pad == Pad::kSame ? (kw - 1) / 2 : 0;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;

    // gather formulation: every input element sums its contributions, no races
#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c) {
        for (int ih = 0; ih < H; ++ih) {
            T* grow = gx + c * plane + static_cast<std::int64_t>(ih) * W;
            for (int iw = 0; iw < W; ++iw) {
                T acc = T(0);
                for (int dy = 0; dy < kh; ++dy) {
                    const int t = ih + ph - dy;
                    if (t < 0 || t % stride != 0) continue;
                    const int oh = t / stride;
                    if (oh >= Ho) continue;
                    for (int dx = 0; dx < kw; ++dx) {
                        const int s = iw + pw - dx;
                        if (s < 0 || s % stride != 0) continue;
                        const int ow = s / stride;
                        if (ow >= Wo) continue;
                        for (int o = 0; o < O; ++o) {
                            acc += gy[o * oplane + static_cast<std::int64_t>(oh) * Wo + ow] *
                                   k[((static_cast<std::int64_t>(o) * C + c) * kh + dy) * kw + dx];
                        }
                    }
                }
                grow[iw] = acc;
            }
        }
    }
}

template <typename T>
void conv2d_backward_kernel(const T* gy, const T* x, int C, int H, int W, int O, int kh, int kw,
                            int stride, Pad pad, T* gk) {
    int Ho, Wo;
    conv2d_output_shape(H, W, kh, kw, stride, pad, Ho, Wo);
    const int ph = pad == Pad::kSame ? (kh - 1) / 2 : 0;
    const int pw = pad == Pad::kSame ? (kw - 1) / 2 : 0;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;

#pragma omp parallel for collapse(2) schedule(static)
    for (int o = 0; o < O; ++o) {
        for (int c = 0; c < C; ++c) {
            for (int dy = 0; dy < kh; ++dy) {
                for (int dx = 0; dx < kw; ++dx) {
                    double acc = 0.0;
                    for (int oh = 0; oh < Ho; ++oh) {
                        const int ih = oh * stride + dy - ph;
                        if (ih < 0 || ih >= H) continue;
                        const T* gyrow = gy + o * oplane + static_cast<std::int64_t>(oh) * Wo;
                        const T* xrow = x + c * plane + static_cast<std::int64_t>(ih) * W;
                        for (int ow = 0; ow < Wo; ++ow) {
                            const int iw = ow * stride + dx - pw;
                            if (iw < 0 || iw >= W) continue;
                            acc += static_cast<double>(gyrow[ow]) * xrow[iw];
                        }
                    }
                    gk[((static_cast<std::int64_t>(o) * C + c) * kh + dy) * kw + dx] = static_cast<T>(acc);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// layer norm

template <typename T>
void layer_norm_forward(const T* x, std::int64_t outer, std::int64_t L, std::int64_t inner,
                        const T* gamma, const T* beta, T eps, T* y, T* xhat, T* inv_std) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t ou = 0; ou < outer; ++ou) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = ou * L * inner + in;
            double mean = 0.0;
            for (std::int64_t l = 0; l < L; ++l) mean += static_cast<double>(x[base + l * inner]);
            mean /= static_cast<double>(L);
            double var = 0.0;
            for (std::int64_t l = 0; l < L; ++l) {
                const double d = static_cast<double>(x[base + l * inner]) - mean;
                var += d * d;
            }
            var /= static_cast<double>(L);
            const double istd = 1.0 / std::sqrt(var + static_cast<double>(eps));
            inv_std[ou * inner + in] = static_cast<T>(istd);
            for (std::int64_t l = 0; l < L; ++l) {
                const std::int64_t idx = base + l * inner;
                const T xh = static_cast<T>((static_cast<double>(x[idx]) - mean) * istd);
                xhat[idx] = xh;
                y[idx] = gamma[l] * xh + beta[l];
            }
        }
    }
}

template <typename T>
void layer_norm_backward(const T* gy, const T* xhat, const T* inv_std, const T* gamma,
                         std::int64_t outer, std::int64_t L, std::int64_t inner, T* gx) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t ou = 0; ou < outer; ++ou) {
        for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = ou * L * inner + in;
            const double istd = static_cast<double>(inv_std[ou * inner + in]);
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::int64_t l = 0; l < L; ++l) {
                const std::int64_t idx = base + l * inner;
                const double gh = static_cast<double>(gamma[l]) * gy[idx];
                sum_g += gh;
                sum_gx += gh * xhat[idx];
            }
            const double invL = 1.0 / static_cast<double>(L);
            for (std::int64_t l = 0; l < L; ++l) {
                const std::int64_t idx = base + l * inner;
                const double gh = static_cast<double>(gamma[l]) * gy[idx];
                gx[idx] = static_cast<T>((gh - sum_g * invL - xhat[idx] * sum_gx * invL) * istd);
            }
        }
    }
}

// gamma/beta grads: per-channel serial accumulation, parallel over channels.
template <typename T>
void layer_norm_param_grads(const T* gy, const T* xhat, std::int64_t outer, std::int64_t L,
                            std::int64_t inner, T* ggamma, T* gbeta) {
#pragma omp parallel for schedule(static)
    for (std::int64_t l = 0; l < L; ++l) {
        double gg = 0.0, gb = 0.0;
        for (std::int64_t ou = 0; ou < outer; ++ou) {
            const std::int64_t base = ou * L * inner + l * inner;
            for (std::int64_t in = 0; in < inner; ++in) {
                gg += static_cast<double>(gy[base + in]) * xhat[base + in];
                gb += static_cast<double>(gy[base + in]);
            }
        }
        ggamma[l] += static_cast<T>(gg);
        gbeta[l] += static_cast<T>(gb);
    }
}

// ---------------------------------------------------------------------------
// FFT: radix-2 complex core, rows then columns.

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place radix-2 transform of length n; sign -1 for the forward kernel
// e^{-2πi kn/N}, +1 for the adjoint direction. Unnormalized.
template <typename T>
void fft1d(std::complex<double>* v, int n, int sign) {
    // bit reversal
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(v[i], v[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * M_PI / len;
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int j = 0; j < len / 2; ++j) {
                const auto u = v[i + j];
                const auto t = v[i + j + len / 2] * w;
                v[i + j] = u + t;
                v[i + j + len / 2] = u - t;
                w *= wl;
            }
        }
    }
    (void)sign;
}

template <typename T>
void fft2d_complex(std::vector<std::complex<double>>& buf, int H, int W, int sign) {
#pragma omp parallel for schedule(static)
    for (int h = 0; h < H; ++h) fft1d<T>(buf.data() + static_cast<std::int64_t>(h) * W, W, sign);
#pragma omp parallel for schedule(static)
    for (int w = 0; w < W; ++w) {
        std::vector<std::complex<double>> col(static_cast<size_t>(H));
        for (int h = 0; h < H; ++h) col[static_cast<size_t>(h)] = buf[static_cast<std::int64_t>(h) * W + w];
        fft1d<T>(col.data(), H, sign);
        for (int h = 0; h < H; ++h) buf[static_cast<std::int64_t>(h) * W + w] = col[static_cast<size_t>(h)];
    }
}

}  // namespace

template <typename T>
void fft2d_forward(const T* x, int H, int W, T* re, T* im) {
    if (!is_pow2(H) || !is_pow2(W))
        throw ShapeError("fft2d: unsupported size " + std::to_string(H) + "x" + std::to_string(W) +
                         " (extents must be powers of two)");
    std::vector<std::complex<double>> buf(static_cast<size_t>(H) * W);
    const std::int64_t n = static_cast<std::int64_t>(H) * W;
    for (std::int64_t i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = {static_cast<double>(x[i]), 0.0};
    fft2d_complex<T>(buf, H, W, -1);
    for (std::int64_t i = 0; i < n; ++i) {
        re[i] = static_cast<T>(buf[static_cast<size_t>(i)].real());
        im[i] = static_cast<T>(buf[static_cast<size_t>(i)].imag());
    }
}

template <typename T>
void fft2d_adjoint(const T* gre, const T* gim, int H, int W, T* gx) {
    if (!is_pow2(H) || !is_pow2(W)) throw ShapeError("fft2d_adjoint: extents must be powers of two");
    std::vector<std::complex<double>> buf(static_cast<size_t>(H) * W);
    const std::int64_t n = static_cast<std::int64_t>(H) * W;
    for (std::int64_t i = 0; i < n; ++i)
        buf[static_cast<size_t>(i)] = {static_cast<double>(gre[i]), static_cast<double>(gim[i])};
    fft2d_complex<T>(buf, H, W, +1);
    for (std::int64_t i = 0; i < n; ++i) gx[i] = static_cast<T>(buf[static_cast<size_t>(i)].real());
}

// ---------------------------------------------------------------------------
// bilinear resize

namespace {

struct LerpTap {
    int i0, i1;
    double f;  // weight of i1
};

inline LerpTap tap(int o, int out_len, int in_len) {
    const double scale = static_cast<double>(in_len) / out_len;
    double s = (o + 0.5) * scale - 0.5;
    int i0 = static_cast<int>(std::floor(s));
    double f = s - i0;
    int i1 = i0 + 1;
    if (i0 < 0) i0 = 0;
    if (i1 < 0) i1 = 0;
    if (i0 > in_len - 1) i0 = in_len - 1;
    if (i1 > in_len - 1) i1 = in_len - 1;
    return {i0, i1, f};
}

}  // namespace

template <typename T>
void bilinear_forward(const T* x, int C, int H, int W, int Ho, int Wo, T* y) {
    if (Ho < 1 || Wo < 1) throw ShapeError("bilinear_resize: target extents must be >= 1");
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
    std::vector<LerpTap> tys(static_cast<size_t>(Ho)), txs(static_cast<size_t>(Wo));
    for (int oh = 0; oh < Ho; ++oh) tys[static_cast<size_t>(oh)] = tap(oh, Ho, H);
    for (int ow = 0; ow < Wo; ++ow) txs[static_cast<size_t>(ow)] = tap(ow, Wo, W);

#pragma omp parallel for collapse(2) schedule(static)
    for (int c = 0; c < C; ++c) {
        for (int oh = 0; oh < Ho; ++oh) {
            const LerpTap& ty = tys[static_cast<size_t>(oh)];
            const T* r0 = x + c * plane + static_cast<std::int64_t>(ty.i0) * W;
            const T* r1 = x + c * plane + static_cast<std::int64_t>(ty.i1) * W;
            T* yrow = y + c * oplane + static_cast<std::int64_t>(oh) * Wo;
            for (int ow = 0; ow < Wo; ++ow) {
                const LerpTap& tx = txs[static_cast<size_t>(ow)];
                const double top = static_cast<double>(r0[tx.i0]) * (1.0 - tx.f) + static_cast<double>(r0[tx.i1]) * tx.f;
                const double bot = static_cast<double>(r1[tx.i0]) * (1.0 - tx.f) + static_cast<double>(r1[tx.i1]) * tx.f;
                yrow[ow] = static_cast<T>(top * (1.0 - ty.f) + bot * ty.f);
            }
        }
    }
}

template <typename T>
void bilinear_backward(const T* gy, int C, int H, int W, int Ho, int Wo, T* gx) {
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t oplane = static_cast<std::int64_t>(Ho) * Wo;
    std::vector<LerpTap> tys(static_cast<size_t>(Ho)), txs(static_cast<size_t>(Wo));
    for (int oh = 0; oh < Ho; ++oh) tys[static_cast<size_t>(oh)] = tap(oh, Ho, H);
    for (int ow = 0; ow < Wo; ++ow) txs[static_cast<size_t>(ow)] = tap(ow, Wo, W);

    // scatter within a channel stays on one thread
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        T* gplane = gx + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) gplane[i] = T(0);
        const T* gyc = gy + c * oplane;
        for (int oh = 0; oh < Ho; ++oh) {
            const LerpTap& ty = tys[static_cast<size_t>(oh)];
            for (int ow = 0; ow < Wo; ++ow) {
                const LerpTap& tx = txs[static_cast<size_t>(ow)];
                const double g = static_cast<double>(gyc[static_cast<std::int64_t>(oh) * Wo + ow]);
                gplane[static_cast<std::int64_t>(ty.i0) * W + tx.i0] += static_cast<T>(g * (1.0 - ty.f) * (1.0 - tx.f));
                gplane[static_cast<std::int64_t>(ty.i0) * W + tx.i1] += static_cast<T>(g * (1.0 - ty.f) * tx.f);
                gplane[static_cast<std::int64_t>(ty.i1) * W + tx.i0] += static_cast<T>(g * ty.f * (1.0 - tx.f));
                gplane[static_cast<std::int64_t>(ty.i1) * W + tx.i1] += static_cast<T>(g * ty.f * tx.f);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// partition

int partition_groups(int H, int W, PartMode mode, int p) {
    if (p < 1) throw ShapeError("partition: p must be >= 1");
    if (H % p != 0 || W % p != 0)
        throw ShapeError("partition: extents " + std::to_string(H) + "x" + std::to_string(W) +
                         " not divisible for p=" + std::to_string(p));
    (void)mode;
    return (H / p) * (W / p);
}

namespace {

// flat source index in [C,H,W] for (group g, channel c, position i)
inline std::int64_t part_src(int C, int H, int W, PartMode mode, int p, int g, int c, int i) {
    (void)C;
    int h, w;
    if (mode == PartMode::kBlock) {
        const int bw = W / p;  // blocks per row
        const int by = g / bw, bx = g % bw;
        const int dy = i / p, dx = i % p;
        h = by * p + dy;
        w = bx * p + dx;
    } else {
        const int cw = W / p;  // cell extents
        const int oy = g / cw, ox = g % cw;
        const int gy = i / p, gx = i % p;
        h = gy * (H / p) + oy;
        w = gx * cw + ox;
    }
    return (static_cast<std::int64_t>(c) * H + h) * W + w;
}

}  // namespace

template <typename T>
void partition_forward(const T* x, int C, int H, int W, PartMode mode, int p, T* y) {
    const int G = partition_groups(H, W, mode, p);
    const int P = p * p;
#pragma omp parallel for collapse(2) schedule(static)
    for (int g = 0; g < G; ++g) {
        for (int c = 0; c < C; ++c) {
            T* dst = y + (static_cast<std::int64_t>(g) * C + c) * P;
            for (int i = 0; i < P; ++i) dst[i] = x[part_src(C, H, W, mode, p, g, c, i)];
        }
    }
}

template <typename T>
void partition_inverse(const T* y, int C, int H, int W, PartMode mode, int p, T* x) {
    const int G = partition_groups(H, W, mode, p);
    const int P = p * p;
#pragma omp parallel for collapse(2) schedule(static)
    for (int g = 0; g < G; ++g) {
        for (int c = 0; c < C; ++c) {
            const T* src = y + (static_cast<std::int64_t>(g) * C + c) * P;
            for (int i = 0; i < P; ++i) x[part_src(C, H, W, mode, p, g, c, i)] = src[i];
        }
    }
}

// ---------------------------------------------------------------------------
// explicit instantiations

#define UWIE_INSTANTIATE(T)                                                                        \
    template bool all_finite<T>(const T*, std::int64_t);                                           \
    template double sum_chunked<T>(const T*, std::int64_t);                                        \
    template void gemm_nn<T>(int, int, int, const T*, const T*, T*, bool);                         \
    template void gemm_nt<T>(int, int, int, const T*, const T*, T*, bool);                         \
    template void gemm_tn<T>(int, int, int, const T*, const T*, T*, bool);                         \
    template void conv2d_forward<T>(const T*, int, int, int, const T*, int, int, int, int, Pad, T*); \
    template void conv2d_backward_input<T>(const T*, const T*, int, int, int, int, int, int, int, Pad, T*); \
    template void conv2d_backward_kernel<T>(const T*, const T*, int, int, int, int, int, int, int, Pad, T*); \
    template void layer_norm_forward<T>(const T*, std::int64_t, std::int64_t, std::int64_t, const T*, const T*, T, T*, T*, T*); \
    template void layer_norm_backward<T>(const T*, const T*, const T*, const T*, std::int64_t, std::int64_t, std::int64_t, T*); \
    template void layer_norm_param_grads<T>(const T*, const T*, std::int64_t, std::int64_t, std::int64_t, T*, T*); \
    template void fft2d_forward<T>(const T*, int, int, T*, T*);                                    \
    template void fft2d_adjoint<T>(const T*, const T*, int, int, T*);                              \
    template void bilinear_forward<T>(const T*, int, int, int, int, int, T*);                      \
    template void bilinear_backward<T>(const T*, int, int, int, int, int, T*);                     \
    template void partition_forward<T>(const T*, int, int, int, PartMode, int, T*);                \
    template void partition_inverse<T>(const T*, int, int, int, PartMode, int, T*);

UWIE_INSTANTIATE(float)
UWIE_INSTANTIATE(double)

#undef UWIE_INSTANTIATE

}  // namespace uwie::kernels

#include "uwie/reference.hpp"

#include <cmath>

namespace uwie::reference {

namespace {

template <typename T>
void matmul_impl(int m, int n, int k, const T* a, const T* b, T* c) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int t = 0; t < k; ++t)
                acc += static_cast<double>(a[i * k + t]) * static_cast<double>(b[t * n + j]);
            c[i * n + j] = static_cast<T>(acc);
        }
    }
}

template <typename T>
void conv2d_impl(const T* x, int C, int H, int W, const T* k, int O, int kh, int kw,
                 int stride, bool same_pad, T* y, int Ho, int Wo) {
    const int ph = same_pad ? (kh - 1) / 2 : 0;
    const int pw = same_pad ? (kw - 1) / 2 : 0;
    for (int o = 0; o < O; ++o) {
        for (int oh = 0; oh < Ho; ++oh) {
            for (int ow = 0; ow < Wo; ++ow) {
                double acc = 0.0;
                for (int c = 0; c < C; ++c) {
                    for (int dy = 0; dy < kh; ++dy) {
                        for (int dx = 0; dx < kw; ++dx) {
                            const int ih = oh * stride + dy - ph;
                            const int iw = ow * stride + dx - pw;
                            if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                            acc += static_cast<double>(x[(c * H + ih) * W + iw]) *
                                   static_cast<double>(k[((o * C + c) * kh + dy) * kw + dx]);
                        }
                    }
                }
                y[(o * Ho + oh) * Wo + ow] = static_cast<T>(acc);
            }
        }
    }
}

template <typename T>
void dft2d_impl(const T* x, int H, int W, T* re, T* im) {
    for (int u = 0; u < H; ++u) {
        for (int v = 0; v < W; ++v) {
            double sr = 0.0, si = 0.0;
            for (int h = 0; h < H; ++h) {
                for (int w = 0; w < W; ++w) {
                    const double ang = -2.0 * M_PI * (static_cast<double>(u) * h / H +
                                                      static_cast<double>(v) * w / W);
                    const double xv = static_cast<double>(x[h * W + w]);
                    sr += xv * std::cos(ang);
                    si += xv * std::sin(ang);
                }
            }
            re[u * W + v] = static_cast<T>(sr);
            im[u * W + v] = static_cast<T>(si);
        }
    }
}

}  // namespace

void matmul_naive(int m, int n, int k, const float* a, const float* b, float* c) {
    matmul_impl(m, n, k, a, b, c);
}
void matmul_naive(int m, int n, int k, const double* a, const double* b, double* c) {
    matmul_impl(m, n, k, a, b, c);
}

void conv2d_naive(const float* x, int C, int H, int W, const float* k, int O, int kh, int kw,
                  int stride, bool same_pad, float* y, int Ho, int Wo) {
    conv2d_impl(x, C, H, W, k, O, kh, kw, stride, same_pad, y, Ho, Wo);
}
void conv2d_naive(const double* x, int C, int H, int W, const double* k, int O, int kh, int kw,
                  int stride, bool same_pad, double* y, int Ho, int Wo) {
    conv2d_impl(x, C, H, W, k, O, kh, kw, stride, same_pad, y, Ho, Wo);
}

void dft2d_naive(const float* x, int H, int W, float* re, float* im) { dft2d_impl(x, H, W, re, im); }
void dft2d_naive(const double* x, int H, int W, double* re, double* im) { dft2d_impl(x, H, W, re, im); }

double psnr_naive(const float* a, const float* b, std::int64_t n) {
    double mse = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    if (mse <= 0.0) return HUGE_VAL;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim_naive(const float* a, const float* b, int C, int H, int W) {
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (H < kWin || W < kWin) throw ShapeError("ssim: image smaller than the 11x11 window");

    double w[kWin][kWin];
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            const double dy = i - (kWin - 1) / 2.0;
            const double dx = j - (kWin - 1) / 2.0;
            w[i][j] = std::exp(-(dy * dy + dx * dx) / (2.0 * kSigma * kSigma));
            wsum += w[i][j];
        }
    }
    for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) w[i][j] /= wsum;

    double total = 0.0;
    for (int c = 0; c < C; ++c) {
        const float* pa = a + static_cast<std::int64_t>(c) * H * W;
        const float* pb = b + static_cast<std::int64_t>(c) * H * W;
        double acc = 0.0;
        int count = 0;
        for (int y = 0; y + kWin <= H; ++y) {
            for (int x = 0; x + kWin <= W; ++x) {
                double mu1 = 0, mu2 = 0, s11 = 0, s22 = 0, s12 = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        const double va = pa[(y + i) * W + (x + j)];
                        const double vb = pb[(y + i) * W + (x + j)];
                        mu1 += w[i][j] * va;
                        mu2 += w[i][j] * vb;
                        s11 += w[i][j] * va * va;
                        s22 += w[i][j] * vb * vb;
                        s12 += w[i][j] * va * vb;
                    }
                }
                const double var1 = s11 - mu1 * mu1;
                const double var2 = s22 - mu2 * mu2;
                const double cov = s12 - mu1 * mu2;
                const double num = (2.0 * mu1 * mu2 + kC1) * (2.0 * cov + kC2);
                const double den = (mu1 * mu1 + mu2 * mu2 + kC1) * (var1 + var2 + kC2);
                acc += num / den;
                ++count;
            }
        }
        total += acc / count;
    }
    return total / C;
}

void trilinear_sample(const std::vector<float>& lattice, int size, const float color[3], float out[3]) {
    const int n = size;
    auto fetch = [&](int r, int g, int b, int ch) {
        const std::int64_t idx = (static_cast<std::int64_t>(b) * n * n + static_cast<std::int64_t>(g) * n + r) * 3 + ch;
        return static_cast<double>(lattice[static_cast<size_t>(idx)]);
    };
    double pos[3], frac[3];
    int i0[3], i1[3];
    for (int c = 0; c < 3; ++c) {
        double v = color[c];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
        pos[c] = v * (n - 1);
        i0[c] = static_cast<int>(std::floor(pos[c]));
        if (i0[c] > n - 2) i0[c] = n - 2;
        if (i0[c] < 0) i0[c] = 0;
        i1[c] = i0[c] + 1;
        frac[c] = pos[c] - i0[c];
    }
    for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int db = 0; db < 2; ++db) {
            for (int dg = 0; dg < 2; ++dg) {
                for (int dr = 0; dr < 2; ++dr) {
                    const double wr = dr ? frac[0] : 1.0 - frac[0];
                    const double wg = dg ? frac[1] : 1.0 - frac[1];
                    const double wb = db ? frac[2] : 1.0 - frac[2];
                    acc += wr * wg * wb *
                           fetch(dr ? i1[0] : i0[0], dg ? i1[1] : i0[1], db ? i1[2] : i0[2], ch);
                }
            }
        }
        out[ch] = static_cast<float>(acc);
    }
}

}  // namespace uwie::reference

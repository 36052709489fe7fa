#include "uwie/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace uwie {

double psnr(const Image& out, const Image& target, double cap_db) {
    if (!same_shape(out.shape, target.shape))
        throw ShapeError("psnr: shape mismatch " + shape_str(out.shape) + " vs " + shape_str(target.shape));
    const std::int64_t n = out.size();
    if (n == 0) throw ShapeError("psnr: empty image");
    double mse = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(out[i]) - static_cast<double>(target[i]);
        mse += d * d;
    }
    mse /= static_cast<double>(n);
    const double db = 10.0 * std::log10(1.0 / std::max(mse, 1e-12));
    return std::min(db, cap_db);
}

namespace {

// separable Gaussian, valid extent along one axis
void blur_rows(const std::vector<double>& src, int H, int W, const std::vector<double>& k,
               std::vector<double>& dst) {
    const int kw = static_cast<int>(k.size());
    const int Wo = W - kw + 1;
    dst.assign(static_cast<size_t>(H) * Wo, 0.0);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < Wo; ++x) {
            double acc = 0.0;
            for (int j = 0; j < kw; ++j) acc += k[static_cast<size_t>(j)] * src[static_cast<size_t>(y) * W + x + j];
            dst[static_cast<size_t>(y) * Wo + x] = acc;
        }
    }
}

void blur_cols(const std::vector<double>& src, int H, int W, const std::vector<double>& k,
               std::vector<double>& dst) {
    const int kh = static_cast<int>(k.size());
    const int Ho = H - kh + 1;
    dst.assign(static_cast<size_t>(Ho) * W, 0.0);
    for (int y = 0; y < Ho; ++y) {
        for (int x = 0; x < W; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kh; ++i) acc += k[static_cast<size_t>(i)] * src[static_cast<size_t>(y + i) * W + x];
            dst[static_cast<size_t>(y) * W + x] = acc;
        }
    }
}

void gauss_blur(const std::vector<double>& src, int H, int W, const std::vector<double>& k,
                std::vector<double>& tmp, std::vector<double>& dst) {
    blur_rows(src, H, W, k, tmp);
    blur_cols(tmp, H, W - static_cast<int>(k.size()) + 1, k, dst);
}

}  // namespace

double ssim(const Image& out, const Image& target) {
    if (!same_shape(out.shape, target.shape))
        throw ShapeError("ssim: shape mismatch " + shape_str(out.shape) + " vs " + shape_str(target.shape));
    if (out.rank() != 3) throw ShapeError("ssim: expected [C,H,W]");
    const int C = out.dim(0), H = out.dim(1), W = out.dim(2);
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (H < kWin || W < kWin) throw ShapeError("ssim: image smaller than the 11x11 window");

    std::vector<double> k(kWin);
    double ks = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        k[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        ks += k[static_cast<size_t>(i)];
    }
    for (auto& v : k) v /= ks;

    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const int Ho = H - kWin + 1, Wo = W - kWin + 1;
    std::vector<double> a(static_cast<size_t>(plane)), b(static_cast<size_t>(plane)),
        aa(static_cast<size_t>(plane)), bb(static_cast<size_t>(plane)), ab(static_cast<size_t>(plane));
    std::vector<double> tmp, mu1, mu2, s11, s22, s12;

    double total = 0.0;
    for (int c = 0; c < C; ++c) {
        const float* pa = out.ptr() + c * plane;
        const float* pb = target.ptr() + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            a[static_cast<size_t>(i)] = pa[i];
            b[static_cast<size_t>(i)] = pb[i];
            aa[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] * a[static_cast<size_t>(i)];
            bb[static_cast<size_t>(i)] = b[static_cast<size_t>(i)] * b[static_cast<size_t>(i)];
            ab[static_cast<size_t>(i)] = a[static_cast<size_t>(i)] * b[static_cast<size_t>(i)];
        }
        gauss_blur(a, H, W, k, tmp, mu1);
        gauss_blur(b, H, W, k, tmp, mu2);
        gauss_blur(aa, H, W, k, tmp, s11);
        gauss_blur(bb, H, W, k, tmp, s22);
        gauss_blur(ab, H, W, k, tmp, s12);
        double acc = 0.0;
        for (std::int64_t i = 0; i < static_cast<std::int64_t>(Ho) * Wo; ++i) {
            const double m1 = mu1[static_cast<size_t>(i)], m2 = mu2[static_cast<size_t>(i)];
            const double v1 = s11[static_cast<size_t>(i)] - m1 * m1;
            const double v2 = s22[static_cast<size_t>(i)] - m2 * m2;
            const double cov = s12[static_cast<size_t>(i)] - m1 * m2;
            const double num = (2.0 * m1 * m2 + kC1) * (2.0 * cov + kC2);
            const double den = (m1 * m1 + m2 * m2 + kC1) * (v1 + v2 + kC2);
            acc += num / den;
        }
        total += acc / (static_cast<double>(Ho) * Wo);
    }
    return total / C;
}

}  // namespace uwie
